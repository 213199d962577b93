#include "gpwarp/io.hpp"

#include "gpwarp/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace gpwarp {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path raw_path_for(const std::filesystem::path& header_path) {
  std::filesystem::path p = header_path;
  p.replace_extension(".raw");
  return p;
}

void write_raw_f32(const std::filesystem::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<float> read_raw_f32(const std::filesystem::path& path,
                                std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open raw file: " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != expected_count * sizeof(float))
    throw IoError("raw size mismatch: " + path.string());
  in.seekg(0);
  std::vector<float> data(expected_count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path.string());
  return data;
}

ordered_json grid_header(const Grid& grid) {
  ordered_json j;
  j["dims"] = {grid.dims[0], grid.dims[1], grid.dims[2]};
  j["spacing"] = {grid.spacing[0], grid.spacing[1], grid.spacing[2]};
  j["origin"] = {grid.origin[0], grid.origin[1], grid.origin[2]};
  return j;
}

void write_header(const ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

ordered_json read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open header: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header " + path.string() + ": " + e.what());
  }
  return j;
}

Grid grid_from_header(const ordered_json& j, const std::filesystem::path& path) {
  Grid grid;
  try {
    const auto& dims = j.at("dims");
    const auto& spacing = j.at("spacing");
    const auto& origin = j.at("origin");
    if (dims.size() != 3 || spacing.size() != 3 || origin.size() != 3)
      throw IoError("header arrays must have 3 entries: " + path.string());
    for (int a = 0; a < 3; ++a) {
      grid.dims[a] = dims[static_cast<std::size_t>(a)].get<std::int64_t>();
      grid.spacing[a] = spacing[static_cast<std::size_t>(a)].get<double>();
      grid.origin[a] = origin[static_cast<std::size_t>(a)].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header " + path.string() + ": " + e.what());
  }
  try {
    grid.validate();
  } catch (const InvalidInput& e) {
    throw IoError("invalid grid in " + path.string() + ": " + e.what());
  }
  return grid;
}

std::filesystem::path resolve_data_path(const ordered_json& j,
                                        const std::filesystem::path& header_path) {
  std::string data;
  try {
    data = j.at("data").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header " + header_path.string() + ": " + e.what());
  }
  std::filesystem::path p(data);
  if (p.is_relative()) p = header_path.parent_path() / p;
  return p;
}

void require_dtype_f32(const ordered_json& j, const std::filesystem::path& path) {
  std::string dtype;
  try {
    dtype = j.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header " + path.string() + ": " + e.what());
  }
  if (dtype != "f32") throw IoError("unsupported dtype \"" + dtype + "\"");
}

double parse_double_field(const std::string& text, std::size_t line_no,
                          const std::filesystem::path& path) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + text.size() || !std::isfinite(v))
    throw IoError("bad value \"" + text + "\" at line " + std::to_string(line_no) +
                  " of " + path.string());
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_volume(const Volume& vol, const std::filesystem::path& header_path) {
  vol.validate();
  if (vol.grid.dim != 3) throw InvalidInput("volume files are 3-d only");
  const std::filesystem::path raw = raw_path_for(header_path);

  ordered_json j = grid_header(vol.grid);
  j["dtype"] = "f32";
  j["data"] = raw.filename().string();
  write_header(j, header_path);

  std::vector<float> data(vol.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<float>(vol.samples[i]);
  write_raw_f32(raw, data);
}

Grid read_grid(const std::filesystem::path& header_path) {
  const ordered_json j = read_header(header_path);
  return grid_from_header(j, header_path);
}

Volume read_volume(const std::filesystem::path& header_path) {
  const ordered_json j = read_header(header_path);
  Volume vol;
  vol.grid = grid_from_header(j, header_path);
  require_dtype_f32(j, header_path);
  if (j.contains("components"))
    throw IoError("expected a volume header, found a field header: " +
                  header_path.string());
  const auto data = read_raw_f32(resolve_data_path(j, header_path),
                                 vol.grid.voxel_count());
  vol.samples.assign(data.begin(), data.end());
  vol.validate();
  return vol;
}

void write_field(const DenseFieldResult& field,
                 const std::filesystem::path& header_path) {
  field.validate();
  if (field.grid.dim != 3) throw InvalidInput("field files are 3-d only");
  const int components = field.has_uncertainty() ? 4 : 3;
  const std::filesystem::path raw = raw_path_for(header_path);

  ordered_json j = grid_header(field.grid);
  j["dtype"] = "f32";
  j["components"] = components;
  j["data"] = raw.filename().string();
  write_header(j, header_path);

  const std::size_t n = field.field.size();
  std::vector<float> data(n * static_cast<std::size_t>(components));
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    data[c++] = static_cast<float>(field.field[i][0]);
    data[c++] = static_cast<float>(field.field[i][1]);
    data[c++] = static_cast<float>(field.field[i][2]);
    if (components == 4) data[c++] = static_cast<float>(field.uncertainty[i]);
  }
  write_raw_f32(raw, data);
}

DenseFieldResult read_field(const std::filesystem::path& header_path) {
  const ordered_json j = read_header(header_path);
  DenseFieldResult field;
  field.grid = grid_from_header(j, header_path);
  require_dtype_f32(j, header_path);
  int components = 0;
  try {
    components = j.at("components").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header " + header_path.string() + ": " + e.what());
  }
  if (components != 3 && components != 4)
    throw IoError("unsupported component count " + std::to_string(components));

  const std::size_t n = field.grid.voxel_count();
  const auto data = read_raw_f32(resolve_data_path(j, header_path),
                                 n * static_cast<std::size_t>(components));
  field.field.resize(n);
  if (components == 4) field.uncertainty.resize(n);
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    field.field[i] = Vec3(data[c], data[c + 1], data[c + 2]);
    c += 3;
    if (components == 4) {
      double u = data[c++];
      if (u < 0.0 && u >= -1e-9) u = 0.0;
      field.uncertainty[i] = u;
    }
  }
  field.validate();
  return field;
}

void write_landmarks(const SparseCorrespondence& corr,
                     const std::filesystem::path& path) {
  corr.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "x,y,z,xt,yt,zt\n";
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3& s = corr.source_points[i];
    const Vec3& m = corr.matched_points[i];
    out << format_g17(s[0]) << ',' << format_g17(s[1]) << ',' << format_g17(s[2])
        << ',' << format_g17(m[0]) << ',' << format_g17(m[1]) << ','
        << format_g17(m[2]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SparseCorrespondence read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open landmarks: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty landmarks file: " + path.string());
  if (strip_cr(line) != "x,y,z,xt,yt,zt")
    throw IoError("unexpected header in " + path.string());

  std::vector<Vec3> source;
  std::vector<Vec3> matched;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6)
      throw IoError("expected 6 fields at line " + std::to_string(line_no) + " of " +
                    path.string());
    double v[6];
    for (int k = 0; k < 6; ++k) v[k] = parse_double_field(fields[static_cast<std::size_t>(k)], line_no, path);
    source.emplace_back(v[0], v[1], v[2]);
    matched.emplace_back(v[3], v[4], v[5]);
  }
  if (source.empty()) throw IoError("no landmarks in " + path.string());
  // Displacements are recomputed, so the pairing invariant holds exactly.
  return SparseCorrespondence::from_pairs(std::move(source), std::move(matched));
}

void write_points(std::span<const Vec3> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "x,y,z\n";
  for (const Vec3& p : points)
    out << format_g17(p[0]) << ',' << format_g17(p[1]) << ',' << format_g17(p[2])
        << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Vec3> read_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open points: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty points file: " + path.string());
  if (strip_cr(line) != "x,y,z") throw IoError("unexpected header in " + path.string());
  std::vector<Vec3> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw IoError("expected 3 fields at line " + std::to_string(line_no) + " of " +
                    path.string());
    points.emplace_back(parse_double_field(fields[0], line_no, path),
                        parse_double_field(fields[1], line_no, path),
                        parse_double_field(fields[2], line_no, path));
  }
  return points;
}

void write_slice_pgm(const Volume& vol, int axis, std::int64_t index,
                     const std::filesystem::path& path, double window_lo,
                     double window_hi) {
  vol.validate();
  if (axis < 0 || axis > 2) throw InvalidInput("slice axis must be 0, 1 or 2");
  if (index < 0 || index >= vol.grid.dims[axis])
    throw InvalidInput("slice index out of range");
  if (!(window_lo < window_hi)) throw InvalidInput("window must satisfy lo < hi");

  const int a0 = axis == 0 ? 1 : 0;           // fast (column) axis
  const int a1 = axis == 2 ? 1 : 2;           // slow (row) axis
  const std::int64_t width = vol.grid.dims[a0];
  const std::int64_t height = vol.grid.dims[a1];

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  const double scale = 255.0 / (window_hi - window_lo);
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      Index3 idx{};
      idx[axis] = index;
      idx[a0] = c;
      idx[a1] = r;
      const double v = vol.samples[vol.grid.linear_index(idx)];
      unsigned char byte;
      if (v <= window_lo) {
        byte = 0;
      } else if (v >= window_hi) {
        byte = 255;
      } else {
        // round half up
        byte = static_cast<unsigned char>(
            std::floor((v - window_lo) * scale + 0.5));
      }
      out.put(static_cast<char>(byte));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gpwarp
