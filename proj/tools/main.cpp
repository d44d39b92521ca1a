// polab: desk-scale lab for margin-based preference optimization.
//
// Exit codes: 0 ok, 2 bad config/usage, 3 numeric failure during a run,
// 4 I/O failure, 1 anything else.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "polab/errors.hpp"
#include "polab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lab for margin-based preference optimization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment config");
  std::string config_path, out_dir;
  uint64_t seed = 0;
  bool quiet = false;
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "output directory")->required();
  CLI::Option* seed_opt =
      run->add_option("--seed", seed, "override the config seed");
  run->add_flag("--quiet", quiet, "suppress the summary line");

  auto* list =
      app.add_subcommand("list-catalog", "list the supported algorithms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      std::fputs(polab::catalog_text().c_str(), stdout);
      return 0;
    }
    polab::RunOptions opts;
    opts.quiet = quiet;
    if (seed_opt->count() > 0) opts.seed_override = seed;
    nlohmann::json cfg = polab::load_config(config_path);
    polab::RunSummary sum = polab::run_experiment(cfg, out_dir, opts);
    if (!quiet) {
      std::printf("%s\n", sum.message.c_str());
      for (const std::string& a : sum.artifacts)
        std::printf("  wrote %s/%s\n", out_dir.c_str(), a.c_str());
      if (!sum.pass) std::printf("  (some claims FAILED; see report.json)\n");
    }
    return 0;
  } catch (const polab::numeric_error& e) {
    std::fprintf(stderr, "numeric error at step %d: %s\n", e.step, e.what());
    return 3;
  } catch (const polab::io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const polab::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
