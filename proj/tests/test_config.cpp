#include <filesystem>
#include <string>

#include "doctest.h"
#include "ruinsim/cli.hpp"
#include "ruinsim/config.hpp"
#include "ruinsim/io.hpp"

using namespace ruinsim;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "model": {"alpha": 2.5, "atoms": [{"dir": [1, 0]}]},
  "target": {"directions": [[1, 0]], "offsets": [1]}
})";

std::string with(const std::string& extra) {
  return R"({"model": {"alpha": 2.5, "atoms": [{"dir": [1, 0]}]},
             "target": {"directions": [[1, 0]], "offsets": [1]})" +
         extra + "}";
}

std::string schema_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ruinsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("defaults are filled in") {
  const RunConfig cfg = parse_config(kMinimal);
  CHECK(cfg.model.xm == 1.0);
  CHECK(cfg.model.atoms[0].weight == 1.0);
  CHECK(cfg.target_input.delta == 0.05);
  CHECK(cfg.target_input.gamma == 20.0);
  CHECK(cfg.target.beta == doctest::Approx(10.0));
  CHECK(cfg.kernel.delta2 == doctest::Approx(0.1));
  CHECK(cfg.mollifier.epsilon == 0.2);
  CHECK(cfg.lyapunov.theta == doctest::Approx(1.0 / (1.2 * 1.2)));
  CHECK(cfg.sim.seed == 1);
  CHECK(cfg.sim.n_paths == 10000);
  CHECK(cfg.scales() == std::vector<double>{5.0});
  CHECK(!cfg.value_strategy.has_value());
  CHECK(cfg.limits.seed == cfg.sim.seed);
}

TEST_CASE("schema errors name the offending field") {
  CHECK(schema_message(R"({"model": {"atoms": [{"dir": [1, 0]}]}, "model": {}})")
            .find("duplicate") != std::string::npos);
  CHECK(schema_message(with(R"(, "sim": {"nn_paths": 5})")).find("sim.nn_paths") !=
        std::string::npos);
  CHECK(schema_message(with(R"(, "sim": {"n_paths": "many"})")).find("sim.n_paths") !=
        std::string::npos);
  CHECK(schema_message(with(R"(, "sim": {"n_paths": -3})")).find("sim.n_paths") !=
        std::string::npos);
  CHECK(schema_message(with(R"(, "bogus": 1)")).find("bogus") != std::string::npos);
  CHECK(schema_message(R"({"target": {"directions": [[1, 0]], "offsets": [1]}})").find("model") !=
        std::string::npos);
  CHECK(schema_message(R"({"model": {"atoms": [{"dir": [1, 0], "wieght": 1}]},
                           "target": {"directions": [[1, 0]], "offsets": [1]}})")
            .find("model.atoms[0].wieght") != std::string::npos);
  CHECK(schema_message("{not json").find("malformed") != std::string::npos);
  CHECK(schema_message(with(R"(, "kernel": {"value_strategy": "fast"})"))
            .find("kernel.value_strategy") != std::string::npos);
}

TEST_CASE("invariant violations are validation errors") {
  // Target direction with no drift component.
  CHECK_THROWS_AS(parse_config(R"({"model": {"atoms": [{"dir": [1, 0]}]},
      "target": {"directions": [[1, -1]], "offsets": [1]}})"),
                  DegenerateDirection);
  CHECK_THROWS_AS(parse_config(R"({"model": {"alpha": 0.5, "atoms": [{"dir": [1, 0]}]},
      "target": {"directions": [[1, 0]], "offsets": [1]}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(with(R"(, "kernel": {"theta": 1.5})")), ValidationError);
  CHECK_THROWS_AS(parse_config(with(R"(, "mollifier": {"epsilon": 0})")), ValidationError);
  CHECK_THROWS_AS(parse_config(with(R"(, "sim": {"b": -1})")), ValidationError);
  CHECK_THROWS_AS(parse_config(with(R"(, "lyapunov": {"states": [[1, 2, 3]]})")),
                  ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("effective config round-trips to an identical run") {
  const RunConfig cfg = parse_config(with(R"(, "sim": {"b": 4, "n_paths": 3000, "seed": 9})"));
  const nlohmann::json echo = effective_config(cfg);
  CHECK(!echo["sim"].contains("workers"));
  CHECK(!echo["sim"].contains("output_dir"));
  const RunConfig again = parse_config(echo.dump());
  CHECK(effective_config(again) == echo);

  const fs::path a = scratch_dir("echo_a"), b = scratch_dir("echo_b");
  CHECK(run("estimate", cfg, a.string()) == kExitPass);
  CHECK(run("estimate", again, b.string()) == kExitPass);
  nlohmann::json ra = io::read_json((a / "report.json").string());
  nlohmann::json rb = io::read_json((b / "report.json").string());
  ra.erase("runtime_s");
  rb.erase("runtime_s");
  CHECK(ra == rb);
  CHECK(io::read_json((a / "effective_config.json").string()) == echo);
}

TEST_CASE("CSV and JSON round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 5e-324, HUGE_VAL, -HUGE_VAL}) {
    const std::string s = io::format_double(x);
    CHECK(io::parse_double(s) == x);
  }
  CHECK(std::isnan(io::parse_double(io::format_double(NAN))));
  CHECK(io::format_double(-0.0) == "-0");

  io::CsvTable t{{"a", "b,c", "d"}, {{"1", "x\"y", "line\nbreak"}, {"", "2", "3"}}};
  const io::CsvTable back = io::parse_csv(io::to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b,c") == 1);
  CHECK_THROWS_AS(back.column("zz"), SchemaError);

  const fs::path dir = scratch_dir("io");
  io::write_csv((dir / "t.csv").string(), t);
  CHECK(io::read_csv((dir / "t.csv").string()).rows == t.rows);
  const nlohmann::json j = {{"x", 0.1}, {"v", {1, 2, 3}}, {"s", "text"}};
  io::write_json((dir / "j.json").string(), j);
  CHECK(io::read_json((dir / "j.json").string()) == j);
}

TEST_CASE("CLI exit statuses") {
  CHECK(subcommands().size() == 6);
  const fs::path dir = scratch_dir("cli");
  // Known pass: small estimate always passes.
  CHECK(run("estimate", parse_config(with(R"(, "sim": {"n_paths": 500})")), dir.string()) ==
        kExitPass);
  // Statistical failure: drift check at a theta far below the tuned value.
  const RunConfig bad = parse_config(
      with(R"(, "sim": {"b": 1000}, "lyapunov": {"theta": 0.001, "n_mc": 2000, "states": [[-500, -1000]]})"));
  CHECK(run("verify-lyapunov", bad, dir.string()) == kExitStatFail);
  CHECK(io::read_json((dir / "report.json").string())["exit_status"] == kExitStatFail);
  // A state outside the drift region is an error.
  const RunConfig outside =
      parse_config(with(R"(, "sim": {"b": 1000}, "lyapunov": {"states": [[5000, 0]]})"));
  CHECK_THROWS_AS(run("verify-lyapunov", outside, dir.string()), PreconditionViolation);
  CHECK_THROWS_AS(run("no-such-command", outside, dir.string()), ValidationError);
}

TEST_CASE("outputs do not depend on the worker count") {
  RunConfig cfg = parse_config(with(R"(, "sim": {"b": 6, "n_paths": 2000, "seed": 3})"));
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  cfg.sim.workers = 1;
  run("simulate-paths", cfg, a.string());
  cfg.sim.workers = 8;
  run("simulate-paths", cfg, b.string());
  CHECK(io::read_text((a / "paths.csv").string()) == io::read_text((b / "paths.csv").string()));
}
