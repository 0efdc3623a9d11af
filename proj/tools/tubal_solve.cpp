// tubal-solve: command-line front end over the C library.
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "tubal/tubal.h"

int main(int argc, char** argv) {
  CLI::App app{"Tubal low-rank tensor recovery and completion experiments"};
  app.set_version_flag("--version", std::string(tubal_version()));
  app.require_subcommand(1, 1);

  std::string config;
  std::string out = ".";
  int workers = 1;
  bool aggregate = false;
  bool quiet = false;

  const char* commands[][2] = {
      {"synth", "Write ground truth, operator, noise and observations to disk"},
      {"recover", "Run factored gradient descent on a recovery grid"},
      {"complete", "Run masked tensor completion on a grid"},
      {"sweep", "Run the config's task over its grid and aggregate repeats"},
      {"trip-probe", "Estimate restricted isometry constants empirically"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Config file (key = value lines)")->required();
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--aggregate", aggregate, "Also write mean and median tables");
    sub->add_flag("-q,--quiet", quiet, "Suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return tubal_run_command(command.c_str(), config.c_str(), out.c_str(), workers, aggregate ? 1 : 0,
                           quiet ? 0 : 1);
}
