#include "pmc/config.hpp"
#include "pmc/run.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"prescribed mean curvature spheres: solver and verification "
               "harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "problem configuration (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* solve =
      app.add_subcommand("solve", "build the family of constant-curvature "
                                  "leaves over the radius grid");
  add_common(solve);

  CLI::App* verify =
      app.add_subcommand("verify", "run the verification checks");
  add_common(verify);
  verify->add_option("--jobs", jobs, "worker threads for the checks")
      ->check(CLI::PositiveNumber);

  CLI::App* index = app.add_subcommand(
      "index", "certify the Brouwer index of the critical point");
  add_common(index);

  CLI11_PARSE(app, argc, argv);

  try {
    const pmc::ProblemConfig cfg = pmc::load_config(config_path);
    if (solve->parsed()) return pmc::cmd_solve(cfg, out_dir, std::cout);
    if (verify->parsed()) return pmc::cmd_verify(cfg, out_dir, jobs, std::cout);
    return pmc::cmd_index(cfg, out_dir, std::cout);
  } catch (const pmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
