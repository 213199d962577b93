// gpwarp: sparse-to-dense displacement field interpolation with a GP or a
// cubic B-spline FFD, hyperparameter tuning, warping, metrics and a seeded
// synthetic benchmark. All numeric output uses 17 significant digits.

#include "gpwarp/bspline.hpp"
#include "gpwarp/errors.hpp"
#include "gpwarp/geometry.hpp"
#include "gpwarp/gp.hpp"
#include "gpwarp/hyperparams.hpp"
#include "gpwarp/io.hpp"
#include "gpwarp/metrics.hpp"
#include "gpwarp/synth.hpp"
#include "gpwarp/warp.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace gpwarp;

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_number(double v) {
  return std::isfinite(v) ? g17(v) : std::string("null");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || end != s.c_str() + s.size())
    throw InvalidInput("cannot parse " + what + ": \"" + s + "\"");
  return v;
}

// "a,b,c", or a single value broadcast to all three axes.
Vec3 parse_triplet(const std::string& s, const std::string& what) {
  const auto parts = split_commas(s);
  if (parts.size() == 1) {
    const double v = parse_double(parts[0], what);
    return Vec3(v, v, v);
  }
  if (parts.size() != 3) throw InvalidInput(what + " needs 1 or 3 comma-separated values");
  return Vec3(parse_double(parts[0], what), parse_double(parts[1], what),
              parse_double(parts[2], what));
}

Index3 parse_dims(const std::string& s) {
  const Vec3 v = parse_triplet(s, "--dims");
  Index3 out{};
  for (int a = 0; a < 3; ++a) {
    const double d = v[a];
    if (!(d >= 1.0) || d != std::floor(d))
      throw InvalidInput("--dims entries must be positive integers");
    out[a] = static_cast<std::int64_t>(d);
  }
  return out;
}

struct GridArgs {
  std::string grid_like;
  std::string dims;
  std::string spacing = "1";
  std::string origin = "0";

  void add_to(CLI::App* cmd, bool grid_like_only = false) {
    cmd->add_option("--grid-like", grid_like,
                    "Take the grid from this volume/field header");
    if (!grid_like_only) {
      cmd->add_option("--dims", dims, "Voxel counts, e.g. 64,64,64");
      cmd->add_option("--spacing", spacing, "Voxel spacing in mm (default 1)");
      cmd->add_option("--origin", origin, "World origin in mm (default 0)");
    }
  }

  Grid resolve() const {
    if (!grid_like.empty()) {
      if (!dims.empty())
        throw InvalidInput("pass either --grid-like or --dims, not both");
      return read_grid(grid_like);
    }
    if (dims.empty()) throw InvalidInput("a grid is required: --grid-like or --dims");
    Grid grid;
    grid.dims = parse_dims(dims);
    grid.spacing = parse_triplet(spacing, "--spacing");
    grid.origin = parse_triplet(origin, "--origin");
    grid.validate();
    return grid;
  }
};

WarpConvention parse_convention(const std::string& s) {
  if (s == "pullback") return WarpConvention::PullbackTargetAnchored;
  if (s == "pushforward") return WarpConvention::PushforwardSourceAnchored;
  throw InvalidInput("--warp-convention must be pullback or pushforward");
}

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + out_path);
  out << text;
  if (!out) throw IoError("write failed: " + out_path);
}

KernelParams params_from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open params file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed params file " + path + ": " + e.what());
  }
  KernelParams p;
  try {
    p.sigma = j.at("sigma").get<double>();
    p.length_scale = j.at("length_scale").get<double>();
    if (j.contains("jitter")) p.jitter = j.at("jitter").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed params file " + path + ": " + e.what());
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------- tune ----

struct TuneArgs {
  std::string method;
  std::string landmarks;
  std::string source;
  std::string target;
  std::string convention = "pullback";
  std::string out;
  bool length_scale_sqrt = false;
  double jitter = kDefaultJitter;
  double fill = 0.0;
  int threads = 0;
};

std::string tune_json(const TuneArgs& args) {
  const SparseCorrespondence corr = read_landmarks(args.landmarks);
  MeanOptions mean_options;
  mean_options.length_scale_sqrt = args.length_scale_sqrt;
  mean_options.jitter = args.jitter;

  std::ostringstream os;
  os << "{\n";
  if (args.method == "mean") {
    const MeanEstimate est = estimate_mean(corr, mean_options);
    os << "  \"sigma\": " << json_number(est.params.sigma) << ",\n";
    os << "  \"length_scale\": " << json_number(est.params.length_scale) << ",\n";
    os << "  \"method\": \"mean\",\n";
    os << "  \"converged\": true,\n";
    os << "  \"sigma_floored\": " << (est.sigma_floored ? "true" : "false") << "\n";
  } else if (args.method == "nml") {
    const MeanEstimate init = estimate_mean(corr, mean_options);
    const NmlEstimate est = estimate_nml(corr, init.params);
    os << "  \"sigma\": " << json_number(est.params.sigma) << ",\n";
    os << "  \"length_scale\": " << json_number(est.params.length_scale) << ",\n";
    os << "  \"method\": \"nml\",\n";
    os << "  \"converged\": " << (est.converged ? "true" : "false") << "\n";
  } else if (args.method == "dgs") {
    if (args.source.empty() || args.target.empty())
      throw InvalidInput("--method dgs requires --source and --target");
    DgsConfig config;
    config.source = read_volume(args.source);
    config.target = read_volume(args.target);
    config.grid = config.target.grid;
    config.convention = parse_convention(args.convention);
    config.oob_value = args.fill;
    config.mean_options = mean_options;
    config.jitter = args.jitter;
    config.threads = args.threads;
    const DgsEstimate est = estimate_dgs(corr, config);
    os << "  \"sigma\": " << json_number(est.params.sigma) << ",\n";
    os << "  \"length_scale\": " << json_number(est.params.length_scale) << ",\n";
    os << "  \"method\": \"dgs\",\n";
    os << "  \"converged\": true,\n";
    os << "  \"rmse_table\": [\n";
    for (std::size_t i = 0; i < est.table.size(); ++i) {
      const DgsCell& cell = est.table[i];
      os << "    {\"sigma\": " << json_number(cell.sigma)
         << ", \"length_scale\": " << json_number(cell.length_scale)
         << ", \"rmse\": " << json_number(cell.rmse) << "}"
         << (i + 1 < est.table.size() ? "," : "") << "\n";
    }
    os << "  ]\n";
  } else {
    throw InvalidInput("--method must be mean, nml or dgs");
  }
  os << "}\n";
  return os.str();
}

// --------------------------------------------------------- interpolate ----

struct InterpolateArgs {
  std::string method;
  std::string landmarks;
  GridArgs grid;
  std::string params_file;
  std::string out;
  std::string convention = "pullback";
  double sigma = 0.0;        // optional override
  double length_scale = 0.0; // optional override
  double jitter = kDefaultJitter;
  double control_spacing = 0.0;  // 0 = extent/8 per axis
  double lambda = 1e-6;
  std::size_t chunk = 65536;
  int threads = 0;
};

void run_interpolate(const InterpolateArgs& args) {
  const SparseCorrespondence corr = read_landmarks(args.landmarks);
  const Grid grid = args.grid.resolve();
  const FieldAnchor anchor = anchor_for(parse_convention(args.convention));

  DenseFieldResult field;
  if (args.method == "gp") {
    KernelParams p;
    if (!args.params_file.empty()) p = params_from_json_file(args.params_file);
    if (args.sigma > 0.0) p.sigma = args.sigma;
    if (args.length_scale > 0.0) p.length_scale = args.length_scale;
    p.jitter = args.jitter;
    if (args.params_file.empty() && !(args.sigma > 0.0 && args.length_scale > 0.0))
      throw InvalidInput("gp interpolation needs --params or --sigma/--length-scale");
    const GpModel model = fit_gp(corr, p, anchor);
    DenseFieldOptions options;
    options.chunk_size = args.chunk;
    options.threads = args.threads;
    field = dense_field(model, grid, options);
  } else if (args.method == "bspline") {
    const Vec3 spacing = args.control_spacing > 0.0
                             ? Vec3(args.control_spacing, args.control_spacing,
                                    args.control_spacing)
                             : default_control_spacing(grid);
    const BsplineField bsp = fit_bspline(corr, grid, spacing, args.lambda, anchor);
    field = eval_bspline(bsp, grid);
  } else {
    throw InvalidInput("--method must be gp or bspline");
  }
  write_field(field, args.out);
}

// ----------------------------------------------------------------- warp ----

struct WarpArgs {
  std::string field;
  std::string source;
  std::string out;
  std::string convention = "pullback";
  double fill = 0.0;
  int threads = 0;
};

void run_warp(const WarpArgs& args) {
  const DenseFieldResult field = read_field(args.field);
  const Volume source = read_volume(args.source);
  WarpOptions options;
  options.convention = parse_convention(args.convention);
  options.oob_value = args.fill;
  options.threads = args.threads;
  write_volume(warp_image(source, field, options), args.out);
}

// ------------------------------------------------------------- evaluate ----

struct EvaluateArgs {
  std::string metric;
  std::string a;
  std::string b;
  std::string points_a;
  std::string points_b;
  std::string out;
  double tol = 0.5;
};

void run_evaluate(const EvaluateArgs& args) {
  double value = 0.0;
  if (args.metric == "mhd") {
    if (args.points_a.empty() || args.points_b.empty())
      throw InvalidInput("--metric mhd requires --points-a and --points-b");
    const auto pa = read_points(args.points_a);
    const auto pb = read_points(args.points_b);
    value = mhd(pa, pb);
  } else {
    if (args.a.empty() || args.b.empty())
      throw InvalidInput("volume metrics require --a and --b");
    const Volume a = read_volume(args.a);
    const Volume b = read_volume(args.b);
    if (args.metric == "rmse")
      value = rmse(a, b);
    else if (args.metric == "mismatch")
      value = mismatch_fraction(a, b, args.tol);
    else if (args.metric == "mad")
      value = mean_abs_diff(a, b);
    else
      throw InvalidInput("--metric must be rmse, mismatch, mad or mhd");
  }
  write_text(args.out, args.metric + "," + g17(value) + "\n");
}

// ---------------------------------------------------------------- synth ----

struct SynthPhantomArgs {
  GridArgs grid;
  std::string kind = "binary_blob";
  std::uint64_t seed = 42;
  std::string out;
};

void run_synth_phantom(const SynthPhantomArgs& args) {
  PhantomKind kind;
  if (args.kind == "binary_blob")
    kind = PhantomKind::BinaryBlob;
  else if (args.kind == "gradient_ramp")
    kind = PhantomKind::GradientRamp;
  else
    throw InvalidInput("--kind must be binary_blob or gradient_ramp");
  write_volume(make_phantom(args.grid.resolve(), kind, args.seed), args.out);
}

struct SynthBumpArgs {
  GridArgs grid;
  std::string center;
  std::string amplitude;
  double radius = 0.0;
};

BumpField resolve_bump(const SynthBumpArgs& args, const Grid& grid) {
  const Vec3 center = args.center.empty()
                          ? Vec3(grid.origin + 0.5 * grid.world_extent())
                          : parse_triplet(args.center, "--center");
  if (args.amplitude.empty()) throw InvalidInput("--amplitude is required");
  const Vec3 amplitude = parse_triplet(args.amplitude, "--amplitude");
  if (!(args.radius > 0.0)) throw InvalidInput("--radius must be positive");
  return make_bump_deformation(center, amplitude, args.radius);
}

struct SynthDeformationArgs {
  SynthBumpArgs bump;
  std::string out;
};

void run_synth_deformation(const SynthDeformationArgs& args) {
  const Grid grid = args.bump.grid.resolve();
  write_field(evaluate_field_on_grid(resolve_bump(args.bump, grid), grid), args.out);
}

struct SynthLandmarksArgs {
  SynthBumpArgs bump;
  std::size_t n = 1000;
  std::uint64_t seed = 42;
  double fraction = 1.0;
  std::uint64_t subsample_seed = 0;
  std::string out;
};

void run_synth_landmarks(const SynthLandmarksArgs& args) {
  const Grid grid = args.bump.grid.resolve();
  SparseCorrespondence corr =
      sample_landmarks(resolve_bump(args.bump, grid), grid, args.n, args.seed);
  if (args.fraction < 1.0) corr = subsample(corr, args.fraction, args.subsample_seed);
  write_landmarks(corr, args.out);
}

// ------------------------------------------------------------ benchmark ----

struct BenchmarkArgs {
  std::uint64_t seed = 42;
  GridArgs grid;
  std::size_t n_features = 1000;
  double fraction = 0.2;
  double fill = 0.0;
  double jitter = kDefaultJitter;
  double control_spacing = 0.0;
  double lambda = 1e-6;
  bool length_scale_sqrt = false;
  bool timing = false;
  std::string out;
  int threads = 0;
};

void run_benchmark(const BenchmarkArgs& args) {
  Grid grid;
  if (args.grid.grid_like.empty() && args.grid.dims.empty()) {
    grid.dims = {64, 64, 64};
  } else {
    grid = args.grid.resolve();
  }
  grid.validate();

  SyntheticCaseParams case_params;
  case_params.feature_count = args.n_features;
  case_params.used_fraction = args.fraction;
  case_params.oob_value = args.fill;
  const SyntheticCase scase = make_synthetic_case(grid, args.seed, case_params);

  MeanOptions mean_options;
  mean_options.length_scale_sqrt = args.length_scale_sqrt;
  mean_options.jitter = args.jitter;
  DenseFieldOptions field_options;
  field_options.threads = args.threads;
  field_options.with_variance = false;
  WarpOptions warp_options;
  warp_options.oob_value = args.fill;
  warp_options.threads = args.threads;
  const FieldAnchor anchor = anchor_for(warp_options.convention);

  auto gp_field = [&](const KernelParams& p) {
    return dense_field(fit_gp(scase.landmarks, p, anchor), grid, field_options);
  };

  const char* method_names[4] = {"mean", "nml", "dgs", "bspline"};
  std::ostringstream csv;
  csv << "method,metric,value,wall_ms\n";
  int succeeded = 0;
  for (int m = 0; m < 4; ++m) {
    const auto t0 = std::chrono::steady_clock::now();
    double values[3];
    bool ok = true;
    try {
      DenseFieldResult field;
      switch (m) {
        case 0:
          field = gp_field(estimate_mean(scase.landmarks, mean_options).params);
          break;
        case 1: {
          const KernelParams init = estimate_mean(scase.landmarks, mean_options).params;
          field = gp_field(estimate_nml(scase.landmarks, init).params);
          break;
        }
        case 2: {
          DgsConfig config;
          config.source = scase.phantom;
          config.target = scase.target;
          config.grid = grid;
          config.convention = warp_options.convention;
          config.oob_value = args.fill;
          config.mean_options = mean_options;
          config.jitter = args.jitter;
          config.threads = args.threads;
          field = gp_field(estimate_dgs(scase.landmarks, config).params);
          break;
        }
        case 3: {
          const Vec3 spacing = args.control_spacing > 0.0
                                   ? Vec3(args.control_spacing, args.control_spacing,
                                          args.control_spacing)
                                   : default_control_spacing(grid);
          const BsplineField bsp =
              fit_bspline(scase.landmarks, grid, spacing, args.lambda, anchor);
          field = eval_bspline(bsp, grid);
          break;
        }
      }
      const Volume warped = warp_image(scase.phantom, field, warp_options);
      values[0] = rmse(warped, scase.target);
      values[1] = mismatch_fraction(warped, scase.target);
      values[2] = mean_abs_diff(warped, scase.target);
    } catch (const Error& e) {
      std::cerr << "benchmark: method " << method_names[m] << " failed: " << e.what()
                << "\n";
      ok = false;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double wall_ms =
        args.timing
            ? std::chrono::duration<double, std::milli>(t1 - t0).count()
            : 0.0;
    const char* metric_names[3] = {"rmse", "mismatch", "mad"};
    for (int k = 0; k < 3; ++k) {
      csv << method_names[m] << ',' << metric_names[k] << ','
          << (ok ? g17(values[k]) : "nan") << ',' << g17(wall_ms) << '\n';
    }
    if (ok) ++succeeded;
  }
  if (succeeded == 0) throw NumericalFailure("all benchmark methods failed");
  write_text(args.out, csv.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-to-dense displacement interpolation with Gaussian-process "
               "regression (posterior mean + uncertainty) and a cubic B-spline "
               "baseline"};
  app.require_subcommand(1);

  std::function<void()> action;

  TuneArgs tune_args;
  auto* tune = app.add_subcommand("tune", "Estimate kernel hyperparameters");
  tune->add_option("--method", tune_args.method, "mean, nml or dgs")->required();
  tune->add_option("--landmarks", tune_args.landmarks, "Landmark CSV")->required();
  tune->add_option("--source", tune_args.source, "Source volume (dgs)");
  tune->add_option("--target", tune_args.target, "Target volume (dgs)");
  tune->add_option("--warp-convention", tune_args.convention,
                   "pullback or pushforward (dgs objective)");
  tune->add_flag("--length-scale-sqrt", tune_args.length_scale_sqrt,
                 "Use sqrt of the mean squared pairwise distance");
  tune->add_option("--jitter", tune_args.jitter, "Relative diagonal jitter");
  tune->add_option("--fill", tune_args.fill, "Out-of-bounds fill value (dgs)");
  tune->add_option("--threads", tune_args.threads, "Thread cap (0 = all cores)")
      ->envname("GPWARP_THREADS");
  tune->add_option("--out", tune_args.out, "Output JSON path (default stdout)");
  tune->callback([&] {
    action = [&] { write_text(tune_args.out, tune_json(tune_args)); };
  });

  InterpolateArgs interp_args;
  auto* interp =
      app.add_subcommand("interpolate", "Interpolate landmarks to a dense field");
  interp->add_option("--method", interp_args.method, "gp or bspline")->required();
  interp->add_option("--landmarks", interp_args.landmarks, "Landmark CSV")->required();
  interp_args.grid.add_to(interp);
  interp->add_option("--params", interp_args.params_file, "Kernel params JSON (gp)");
  interp->add_option("--sigma", interp_args.sigma, "Kernel sigma override (gp)");
  interp->add_option("--length-scale", interp_args.length_scale,
                     "Kernel length scale override (gp)");
  interp->add_option("--jitter", interp_args.jitter, "Relative diagonal jitter (gp)");
  interp->add_option("--control-spacing", interp_args.control_spacing,
                     "Control point spacing in mm (bspline; default extent/8)");
  interp->add_option("--lambda", interp_args.lambda, "Ridge weight (bspline)");
  interp->add_option("--warp-convention", interp_args.convention,
                     "pullback or pushforward (anchoring)");
  interp->add_option("--chunk", interp_args.chunk, "Query chunk size (gp)");
  interp->add_option("--threads", interp_args.threads, "Thread cap (0 = all cores)")
      ->envname("GPWARP_THREADS");
  interp->add_option("--out", interp_args.out, "Output field header path")->required();
  interp->callback([&] {
    action = [&] { run_interpolate(interp_args); };
  });

  WarpArgs warp_args;
  auto* warp = app.add_subcommand("warp", "Apply a dense field to a volume");
  warp->add_option("--field", warp_args.field, "Dense field header")->required();
  warp->add_option("--source", warp_args.source, "Volume to resample")->required();
  warp->add_option("--warp-convention", warp_args.convention,
                   "pullback or pushforward");
  warp->add_option("--fill", warp_args.fill, "Out-of-bounds fill value");
  warp->add_option("--threads", warp_args.threads, "Thread cap (0 = all cores)")
      ->envname("GPWARP_THREADS");
  warp->add_option("--out", warp_args.out, "Output volume header path")->required();
  warp->callback([&] {
    action = [&] { run_warp(warp_args); };
  });

  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "Compare volumes or point sets");
  eval->add_option("--metric", eval_args.metric, "rmse, mismatch, mad or mhd")
      ->required();
  eval->add_option("--a", eval_args.a, "First volume");
  eval->add_option("--b", eval_args.b, "Second volume");
  eval->add_option("--points-a", eval_args.points_a, "First point CSV (mhd)");
  eval->add_option("--points-b", eval_args.points_b, "Second point CSV (mhd)");
  eval->add_option("--tol", eval_args.tol, "Mismatch tolerance (default 0.5)");
  eval->add_option("--out", eval_args.out, "Output CSV path (default stdout)");
  eval->callback([&] {
    action = [&] { run_evaluate(eval_args); };
  });

  auto* synth = app.add_subcommand("synth", "Generate synthetic data");
  synth->require_subcommand(1);

  SynthPhantomArgs phantom_args;
  auto* phantom = synth->add_subcommand("phantom", "Seeded phantom volume");
  phantom_args.grid.add_to(phantom);
  phantom->add_option("--kind", phantom_args.kind, "binary_blob or gradient_ramp");
  phantom->add_option("--seed", phantom_args.seed, "RNG seed");
  phantom->add_option("--out", phantom_args.out, "Output volume header")->required();
  phantom->callback([&] {
    action = [&] { run_synth_phantom(phantom_args); };
  });

  SynthDeformationArgs deform_args;
  auto* deform = synth->add_subcommand("deformation", "Dense analytic bump field");
  deform_args.bump.grid.add_to(deform);
  deform->add_option("--center", deform_args.bump.center,
                     "Bump center in mm (default grid center)");
  deform->add_option("--amplitude", deform_args.bump.amplitude,
                     "Peak displacement in mm, e.g. 4,0,-2")->required();
  deform->add_option("--radius", deform_args.bump.radius, "Bump radius in mm")
      ->required();
  deform->add_option("--out", deform_args.out, "Output field header")->required();
  deform->callback([&] {
    action = [&] { run_synth_deformation(deform_args); };
  });

  SynthLandmarksArgs lm_args;
  auto* lm = synth->add_subcommand("landmarks", "Seeded landmarks on a bump field");
  lm_args.bump.grid.add_to(lm);
  lm->add_option("--center", lm_args.bump.center,
                 "Bump center in mm (default grid center)");
  lm->add_option("--amplitude", lm_args.bump.amplitude,
                 "Peak displacement in mm")->required();
  lm->add_option("--radius", lm_args.bump.radius, "Bump radius in mm")->required();
  lm->add_option("--n", lm_args.n, "Number of landmarks");
  lm->add_option("--seed", lm_args.seed, "RNG seed");
  lm->add_option("--fraction", lm_args.fraction, "Retained fraction (0,1]");
  lm->add_option("--subsample-seed", lm_args.subsample_seed, "Subsample RNG seed");
  lm->add_option("--out", lm_args.out, "Output landmark CSV")->required();
  lm->callback([&] {
    action = [&] { run_synth_landmarks(lm_args); };
  });

  BenchmarkArgs bench_args;
  auto* bench = app.add_subcommand(
      "benchmark", "Seeded end-to-end comparison of mean/nml/dgs/bspline");
  bench->add_option("--seed", bench_args.seed, "Case seed");
  bench_args.grid.add_to(bench);
  bench->add_option("--n-features", bench_args.n_features, "Sampled feature count");
  bench->add_option("--fraction", bench_args.fraction, "Used feature fraction");
  bench->add_option("--fill", bench_args.fill, "Out-of-bounds fill value");
  bench->add_option("--jitter", bench_args.jitter, "Relative diagonal jitter");
  bench->add_option("--control-spacing", bench_args.control_spacing,
                    "B-spline control spacing (default extent/8)");
  bench->add_option("--lambda", bench_args.lambda, "B-spline ridge weight");
  bench->add_flag("--length-scale-sqrt", bench_args.length_scale_sqrt,
                  "Use sqrt of the mean squared pairwise distance");
  bench->add_flag("--timing", bench_args.timing,
                  "Record wall-clock times (breaks byte determinism)");
  bench->add_option("--threads", bench_args.threads, "Thread cap (0 = all cores)")
      ->envname("GPWARP_THREADS");
  bench->add_option("--out", bench_args.out, "Output CSV path (default stdout)");
  bench->callback([&] {
    action = [&] { run_benchmark(bench_args); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (action) action();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
