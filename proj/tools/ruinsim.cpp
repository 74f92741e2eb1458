// Command-line front end: ruinsim <subcommand> --config cfg.json [--out dir]
// [--seed n] [--workers n] [--paths n].

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ruinsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Importance sampling for heavy-tailed random walks conditioned on ruin"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed, paths;
  std::optional<unsigned> workers;
  for (const auto& name : ruinsim::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (default: sim.output_dir)");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--workers", workers, "worker threads override")->check(CLI::PositiveNumber);
    sub->add_option("--paths", paths, "sim.n_paths override")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ruinsim::kExitError;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    ruinsim::RunConfig cfg = ruinsim::load_config(config_path);
    if (seed) cfg.sim.seed = cfg.limits.seed = *seed;
    if (workers) cfg.sim.workers = *workers;
    if (paths) cfg.sim.n_paths = *paths;
    const std::string out = out_dir.empty() ? cfg.sim.output_dir : out_dir;
    const int status = ruinsim::run(subcommand, cfg, out);
    std::printf("%s: %s (%s/report.json)\n", subcommand.c_str(),
                status == ruinsim::kExitPass ? "pass" : "statistical failure", out.c_str());
    return status;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ruinsim::kExitError;
  }
}
