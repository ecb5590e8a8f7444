#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mollhelm/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cauchy-Helmholtz reconstruction via mollifier regularization"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed_override = -1;
  int threads = 1;
  bool verbose = false;
  CLI::App* run = app.add_subcommand("run", "run the noise-sweep experiment from a config file");
  run->add_option("--config", config_path, "JSON config file (defaults used when omitted)");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--threads", threads, "worker threads for the alpha sweep")
      ->check(CLI::PositiveNumber);
  run->add_flag("--verbose", verbose, "emit solver diagnostics (solver.csv, progress lines)");

  // kernel
  std::vector<double> alphas;
  std::string kernel_out = ".";
  CLI::App* kernel = app.add_subcommand("kernel", "kernel-symbol diagnostics (kernel.csv)");
  kernel->add_option("--alphas", alphas, "mollifier widths in (0,1]")->required();
  kernel->add_option("--out", kernel_out, "output directory");

  // consistency
  std::string case_name = "example2";
  std::vector<int> coarse{31, 21};
  std::vector<int> fine{61, 41};
  CLI::App* cons = app.add_subcommand("consistency", "truncation-order probe on two grids");
  cons->add_option("--case", case_name, "example1 or example2");
  cons->add_option("--coarse", coarse, "coarse grid nx ny")->expected(2);
  cons->add_option("--fine", fine, "fine grid nx ny")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      mollhelm::RunConfig cfg =
          config_path.empty() ? mollhelm::RunConfig{} : mollhelm::load_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      return mollhelm::cmd_run(cfg, out_dir, threads, verbose);
    }
    if (*kernel) return mollhelm::cmd_kernel(alphas, kernel_out);
    if (*cons)
      return mollhelm::cmd_consistency(case_name, coarse[0], coarse[1], fine[0], fine[1],
                                       std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
