// Command-line runner for paralab experiment configs.
#include "paralab/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

std::string table_for(const std::string& name) {
  if (name == "verify_assumptions") return "carre";
  if (name == "leibniz_sweep") return "leibniz";
  if (name == "proposition_norms") return "propositions";
  return name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paralab: paraproducts and Sobolev algebra checks on finite metric measure spaces"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path, out_dir;
  std::vector<std::string> replay_args;
  std::uint64_t seed_override = 0;
  unsigned threads = 1;
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* replay_opt =
      run->add_option("--replay", replay_args, "recompute one CSV row: <experiment|table> <row>")->expected(2);
  auto* seed_opt = run->add_option("--seed-override", seed_override, "replace the config seed");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = paralab::load_config(config_path);
    paralab::RunOptions opt;
    opt.threads = threads;
    if (*seed_opt) opt.seed_override = seed_override;
    if (*out_opt) opt.out_dir = out_dir;
    if (*replay_opt) {
      long long row = 0;
      try {
        row = std::stoll(replay_args[1]);
      } catch (const std::exception&) {
        throw paralab::Error(paralab::ErrorKind::parameter, "replay row must be an integer");
      }
      std::cout << paralab::replay(cfg, table_for(replay_args[0]), row, opt);
      return 0;
    }
    const int code = paralab::run(cfg, opt);
    std::cerr << (code == 0 ? "ok" : "assumption violations reported") << ": " << opt.out_dir.value_or(cfg.out_dir)
              << "\n";
    return code;
  } catch (const paralab::Error& e) {
    std::cerr << "error [" << paralab::to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
