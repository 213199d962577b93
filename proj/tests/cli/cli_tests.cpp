#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gpwarp/io.hpp"
#include "gpwarp/gp.hpp"
#include "gpwarp/hyperparams.hpp"

#include "support/test_support.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace gpwarp;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GPWARP_CLI_PATH;

struct Workspace {
  fs::path dir = test::make_temp_dir("cli");
  ~Workspace() { fs::remove_all(dir); }

  test::CliResult run(const std::string& args) const {
    return test::run_cli(kCli, args, dir);
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << content;
  }
};

nlohmann::json parse_json(const std::string& text) {
  return nlohmann::json::parse(text);
}

}  // namespace

TEST_CASE("help exists for every subcommand and unknown flags exit 2") {
  Workspace ws;
  CHECK(ws.run("--help").exit_code == 0);
  for (const std::string sub :
       {"tune", "interpolate", "warp", "evaluate", "synth", "benchmark"})
    CHECK(ws.run(sub + " --help").exit_code == 0);

  CHECK(ws.run("tune --no-such-flag").exit_code == 2);
  CHECK(ws.run("definitely-not-a-subcommand").exit_code == 2);
  CHECK(ws.run("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("tune --method mean reproduces the two-landmark moments") {
  Workspace ws;
  ws.write("lm.csv", "x,y,z,xt,yt,zt\n0,0,0,1,0,0\n2,0,0,1,0,0\n");
  const auto r = ws.run("tune --method mean --landmarks lm.csv");
  REQUIRE(r.exit_code == 0);
  const auto j = parse_json(r.out);
  CHECK(j.at("sigma").get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(j.at("length_scale").get<double>() == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(j.at("method").get<std::string>() == "mean");
  CHECK(j.at("converged").get<bool>());

  const auto sqrt_mode =
      ws.run("tune --method mean --landmarks lm.csv --length-scale-sqrt");
  REQUIRE(sqrt_mode.exit_code == 0);
  CHECK(parse_json(sqrt_mode.out).at("length_scale").get<double>() ==
        doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("tune exit codes: missing inputs 2, dgs needs volumes") {
  Workspace ws;
  CHECK(ws.run("tune --method mean --landmarks missing.csv").exit_code == 2);
  ws.write("lm.csv", "x,y,z,xt,yt,zt\n0,0,0,1,0,0\n2,0,0,1,0,0\n");
  CHECK(ws.run("tune --method dgs --landmarks lm.csv").exit_code == 2);
  CHECK(ws.run("tune --method nosuch --landmarks lm.csv").exit_code == 2);
}

TEST_CASE("tune --method dgs on identical volumes tie-breaks low") {
  Workspace ws;
  REQUIRE(ws.run("synth phantom --dims 12,12,12 --seed 3 --out vol.vjson").exit_code ==
          0);
  ws.write("lm.csv",
           "x,y,z,xt,yt,zt\n1,1,1,1,1,1\n5,2,3,5,2,3\n2,6,4,2,6,4\n8,8,8,8,8,8\n");
  const auto r = ws.run(
      "tune --method dgs --landmarks lm.csv --source vol.vjson --target vol.vjson");
  REQUIRE(r.exit_code == 0);
  const auto j = parse_json(r.out);
  CHECK(j.at("method").get<std::string>() == "dgs");
  CHECK(j.at("sigma").get<double>() == 1e-6);  // zero displacements, floored
  const auto table = j.at("rmse_table");
  CHECK(table.size() >= 1);
  for (const auto& cell : table) CHECK(cell.at("rmse").get<double>() == 0.0);
  // smallest length-scale candidate wins the tie
  double min_l = 1e300;
  for (const auto& cell : table)
    min_l = std::min(min_l, cell.at("length_scale").get<double>());
  CHECK(j.at("length_scale").get<double>() == min_l);
}

TEST_CASE("tune --method nml never ends above its mean init") {
  Workspace ws;
  REQUIRE(ws.run("synth landmarks --dims 14,14,14 --amplitude 1.5,0,-1 --radius 5 "
                 "--n 40 --seed 9 --out lm.csv")
              .exit_code == 0);
  const auto nml = ws.run("tune --method nml --landmarks lm.csv --out nml.json");
  REQUIRE(nml.exit_code == 0);

  const auto corr = read_landmarks(ws.dir / "lm.csv");
  const auto init = estimate_mean(corr).params;
  const auto j = parse_json(test::read_file(ws.dir / "nml.json"));
  KernelParams result;
  result.sigma = j.at("sigma").get<double>();
  result.length_scale = j.at("length_scale").get<double>();
  result.jitter = init.jitter;
  CHECK(-log_marginal_likelihood(corr, result).value <=
        -log_marginal_likelihood(corr, init).value + 1e-12);
}

TEST_CASE("interpolate gp: zero landmarks give a zero field with prior variance") {
  Workspace ws;
  ws.write("lm.csv", "x,y,z,xt,yt,zt\n2,2,2,2,2,2\n6,5,4,6,5,4\n3,7,5,3,7,5\n");
  REQUIRE(ws.run("interpolate --method gp --landmarks lm.csv --dims 8,8,8 "
                 "--sigma 1.5 --length-scale 3 --out field.vjson")
              .exit_code == 0);
  const auto field = read_field(ws.dir / "field.vjson");
  REQUIRE(field.has_uncertainty());
  for (const Vec3& v : field.field) CHECK(v.norm() == 0.0);
  for (const double u : field.uncertainty) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.5 * 1.5 + 1e-9);
  }
}

TEST_CASE("interpolate gp reproduces landmark displacements through files") {
  Workspace ws;
  REQUIRE(ws.run("synth landmarks --dims 10,10,10 --amplitude 0.8,-0.4,0.2 "
                 "--radius 4 --n 25 --seed 21 --out lm.csv")
              .exit_code == 0);
  REQUIRE(ws.run("interpolate --method gp --landmarks lm.csv --dims 10,10,10 "
                 "--sigma 1 --length-scale 3 "
                 "--warp-convention pushforward --out f.vjson")
              .exit_code == 0);
  const auto field = read_field(ws.dir / "f.vjson");
  const auto corr = read_landmarks(ws.dir / "lm.csv");
  // pushforward anchors at the source points = sampled voxel centers
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Index3 idx = nearest_voxel(field.grid, corr.source_points[i]);
    const Vec3 got = field.field[field.grid.linear_index(idx)];
    // f32 storage limits the comparison, well inside the 1e-4 contract
    CHECK((got - corr.displacements[i]).norm() <=
          1e-4 * std::max(1.0, corr.displacements[i].norm()));
  }
}

TEST_CASE("interpolate bspline: constant displacements give a constant field") {
  // The ridge pulls data-free margin controls toward zero, so the constant
  // is reproduced where the lattice is supported by landmarks: at least two
  // control spacings away from the boundary.
  Workspace ws;
  std::string csv = "x,y,z,xt,yt,zt\n";
  Rng rng(33);
  for (int i = 0; i < 300; ++i) {
    const double x = rng.uniform(0.0, 19.0), y = rng.uniform(0.0, 19.0),
                 z = rng.uniform(0.0, 19.0);
    csv += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(z) +
           "," + std::to_string(x + 0.5) + "," + std::to_string(y) + "," +
           std::to_string(z - 0.25) + "\n";
  }
  ws.write("lm.csv", csv);
  REQUIRE(ws.run("interpolate --method bspline --landmarks lm.csv --dims 20,20,20 "
                 "--control-spacing 4 --lambda 0.000001 --out f.vjson")
              .exit_code == 0);
  const auto field = read_field(ws.dir / "f.vjson");
  CHECK_FALSE(field.has_uncertainty());
  for (std::int64_t k = 8; k <= 11; ++k)
    for (std::int64_t j = 8; j <= 11; ++j)
      for (std::int64_t i = 8; i <= 11; ++i) {
        const Vec3 v = field.field[field.grid.linear_index({i, j, k})];
        CHECK((v - Vec3(0.5, 0.0, -0.25)).norm() <= 5e-3);
      }
}

TEST_CASE("warp and evaluate close the loop on a shifted ramp") {
  Workspace ws;
  REQUIRE(ws.run("synth phantom --dims 8,8,8 --kind gradient_ramp --out ramp.vjson")
              .exit_code == 0);
  REQUIRE(ws.run("synth deformation --dims 8,8,8 --center 3.5,3.5,3.5 "
                 "--amplitude 1,0,0 --radius 1000 --out f.vjson")
              .exit_code == 0);
  REQUIRE(ws.run("warp --field f.vjson --source ramp.vjson --out w.vjson").exit_code ==
          0);

  // inside the domain the pullback of the ramp drops values by exactly 1
  const auto warped = read_volume(ws.dir / "w.vjson");
  const auto ramp = read_volume(ws.dir / "ramp.vjson");
  CHECK(warped.at({4, 4, 4}) == doctest::Approx(ramp.at({4, 4, 4}) - 1.0).epsilon(1e-6));

  const auto r = ws.run("evaluate --metric rmse --a w.vjson --b w.vjson");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out == "rmse,0\n");

  const auto bad = ws.run("evaluate --metric rmse --a w.vjson --b missing.vjson");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("evaluate mhd on point files") {
  Workspace ws;
  ws.write("a.csv", "x,y,z\n0,0,0\n");
  ws.write("b.csv", "x,y,z\n3,4,0\n");
  const auto r = ws.run("evaluate --metric mhd --points-a a.csv --points-b b.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out == "mhd,5\n");
}

TEST_CASE("benchmark emits a deterministic 4x3 csv and obeys --threads") {
  Workspace ws;
  const std::string args =
      "benchmark --seed 42 --dims 16,16,16 --n-features 120 --fraction 0.5";
  const auto a = ws.run(args + " --threads 1 --out a.csv");
  REQUIRE(a.exit_code == 0);
  const auto b = ws.run(args + " --threads 8 --out b.csv");
  REQUIRE(b.exit_code == 0);
  const std::string csv_a = test::read_file(ws.dir / "a.csv");
  CHECK(csv_a == test::read_file(ws.dir / "b.csv"));

  // shape: header + one row per method per metric
  int rows = 0, mismatch_rows = 0;
  std::istringstream lines(csv_a);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "method,metric,value,wall_ms");
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find(",mismatch,") != std::string::npos) ++mismatch_rows;
    CHECK(line.substr(line.rfind(',') + 1) == "0");  // no --timing: wall is 0
  }
  CHECK(rows == 12);
  CHECK(mismatch_rows == 4);

  // rerun with the same seed is byte identical
  const auto c = ws.run(args + " --threads 1 --out c.csv");
  REQUIRE(c.exit_code == 0);
  CHECK(csv_a == test::read_file(ws.dir / "c.csv"));

  // the grid search can never do worse than the mean cell it contains
  auto value_of = [&](const std::string& method, const std::string& metric) {
    const std::string key = method + "," + metric + ",";
    const auto pos = csv_a.find(key);
    REQUIRE(pos != std::string::npos);
    return std::strtod(csv_a.c_str() + pos + key.size(), nullptr);
  };
  CHECK(value_of("dgs", "rmse") <= value_of("mean", "rmse"));
}

TEST_CASE("benchmark records failed methods as nan rows and still exits 0") {
  Workspace ws;
  // lambda 0 leaves the margin control points unconstrained: the B-spline
  // normal matrix is singular and only that method fails
  const auto r = ws.run(
      "benchmark --seed 42 --dims 12,12,12 --n-features 80 --fraction 0.5 "
      "--lambda 0 --out out.csv");
  REQUIRE(r.exit_code == 0);
  const std::string csv = test::read_file(ws.dir / "out.csv");
  CHECK(csv.find("bspline,rmse,nan,") != std::string::npos);
  CHECK(csv.find("bspline,mismatch,nan,") != std::string::npos);
  CHECK(csv.find("mean,rmse,nan") == std::string::npos);
}

TEST_CASE("environment variable caps threads like the flag") {
  Workspace ws;
  ws.write("lm.csv", "x,y,z,xt,yt,zt\n1,1,1,1.5,1,1\n5,5,5,5,5.5,5\n");
  const auto r = test::run_cli(
      kCli,
      "interpolate --method gp --landmarks lm.csv --dims 6,6,6 --sigma 1 "
      "--length-scale 2 --out f.vjson",
      ws.dir, "GPWARP_THREADS=2");
  CHECK(r.exit_code == 0);
}
