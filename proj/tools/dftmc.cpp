// dftmc: rare-event TOP probability of dynamic fault trees.
//
//   dftmc check  <file.dft>
//   dftmc run    <file.dft> [--cycles N] [--method auto|is|direct] ...
//   dftmc oracle <file.dft> [--family pand-overlap] ...

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "dftmc/cli.hpp"

int main(int argc, char** argv) {
  using namespace dftmc;

  CLI::App app{"Rare-event Monte Carlo estimation for dynamic fault trees"};
  app.require_subcommand(1);

  std::string path;

  auto* check = app.add_subcommand("check", "Parse and validate a tree file");
  check->add_option("file", path, "Input .dft file")->required();

  cli::RunOptions run_opt;
  std::string run_format = "text";
  double run_mission_time = 0.0;
  auto* run = app.add_subcommand("run", "Estimate P(TOP fails before mission time)");
  run->add_option("file", path, "Input .dft file")->required();
  auto* mt = run->add_option("--mission-time", run_mission_time, "Mission time T (overrides the file)")
                 ->check(CLI::PositiveNumber);
  run->add_option("--cycles", run_opt.cycles, "Main simulation cycles K")->capture_default_str();
  run->add_option("--prelim-cycles", run_opt.prelim_cycles, "Cycles per D-search iteration")
      ->capture_default_str();
  run->add_option("--ampos-low", run_opt.ampos_low, "Lower AmPos bound of the D-search band")
      ->capture_default_str();
  run->add_option("--ampos-high", run_opt.ampos_high, "Upper AmPos bound of the D-search band")
      ->capture_default_str();
  run->add_option("--confidence", run_opt.confidence, "Confidence level of the interval")
      ->capture_default_str();
  run->add_option("--seed", run_opt.seed, "Random seed")->capture_default_str();
  run->add_option("--max-search-iterations", run_opt.max_search_iterations,
                  "D-search iteration limit")
      ->capture_default_str();
  const std::map<std::string, Method> methods{
      {"auto", Method::Auto}, {"is", Method::Importance}, {"direct", Method::Direct}};
  run->add_option("--method", run_opt.method, "auto | is | direct")
      ->transform(CLI::CheckedTransformer(methods, CLI::ignore_case))
      ->default_str("auto");
  run->add_option("--threads", run_opt.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--format", run_format, "text | json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  cli::OracleOptions oracle_opt;
  std::string oracle_format = "text";
  double oracle_mission_time = 0.0;
  auto* oracle = app.add_subcommand("oracle", "Exact or closed-form reference probability");
  oracle->add_option("file", path, "Input .dft file")->required();
  auto* omt = oracle->add_option("--mission-time", oracle_mission_time, "Mission time T")
                  ->check(CLI::PositiveNumber);
  oracle->add_option("--family", oracle_opt.family, "Closed-form family (pand-overlap)")
      ->check(CLI::IsMember({"pand-overlap"}));
  oracle->add_option("--direct-cycles", oracle_opt.direct_cycles,
                     "Also run plain Monte Carlo with this many cycles");
  oracle->add_option("--seed", oracle_opt.seed, "Seed for --direct-cycles")->capture_default_str();
  oracle->add_option("--format", oracle_format, "text | json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kParseError;
  }

  if (*check) return cli::cmd_check(path, std::cout, std::cerr);
  if (*run) {
    if (*mt) run_opt.mission_time = run_mission_time;
    run_opt.json = run_format == "json";
    return cli::cmd_run(path, run_opt, std::cout, std::cerr);
  }
  if (*omt) oracle_opt.mission_time = oracle_mission_time;
  oracle_opt.json = oracle_format == "json";
  return cli::cmd_oracle(path, oracle_opt, std::cout, std::cerr);
}
