// Command line front end: solve, study and verify.

#include "stabocp/adaptive_driver.hpp"
#include "stabocp/verify.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>

namespace {

stabocp::StudyConfig load(const std::string& path, const std::string& out, int threads) {
  stabocp::StudyConfig c = stabocp::load_study_config(path);
  if (!out.empty()) c.output_dir = out;
  if (threads > 0) c.threads = threads;
  stabocp::set_num_threads(c.threads);
  return c;
}

void print_record(const stabocp::HistoryRecord& r) {
  std::printf("iter %3d  ndof %8ld  err %.4e  upsilon %.4e  eff %8.4f", r.iteration, r.ndof, r.errors.total,
              r.upsilon, r.effectivity);
  if (r.upsilon_r > 0) std::printf("  upsilon_r %.4e  eff_r %8.4f", r.upsilon_r, r.effectivity_r);
  std::printf("\n");
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilized finite elements for constrained optimal control with guaranteed error bounds"};
  app.require_subcommand(1);

  std::string config, out;
  int threads = 0, refinements = 0;
  std::uint64_t seed = 1;

  auto* solve = app.add_subcommand("solve", "Solve and estimate on one mesh, dump fields and indicators");
  solve->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", out, "Output directory (overrides the config)");
  solve->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  solve->add_option("--refinements", refinements, "Uniform refinements of the initial mesh")
      ->check(CLI::NonNegativeNumber);

  auto* study = app.add_subcommand("study", "Run the adaptive loop");
  study->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  study->add_option("--out", out, "Output directory (overrides the config)");
  study->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the built-in property suite");
  verify->add_option("--seed", seed, "Seed of the randomized instances");
  verify->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const auto c = load(config, out, threads);
      const auto r = solve_single(c, refinements);
      print_record(r);
      std::printf("output written to %s\n", c.output_dir.c_str());
      return 0;
    }
    if (*study) {
      const auto c = load(config, out, threads);
      const auto res = run_study(c, [](const stabocp::HistoryRecord& r, const stabocp::Mesh&) { print_record(r); });
      std::printf("tail slopes: error %.4f  upsilon %.4f", res.slope_error, res.slope_upsilon);
      if (c.mode != stabocp::EstimatorMode::Computable) std::printf("  upsilon_r %.4f", res.slope_upsilon_r);
      std::printf("\noutput written to %s\n", c.output_dir.c_str());
      return 0;
    }
    if (threads > 0) stabocp::set_num_threads(threads);
    const auto results = stabocp::run_property_suite(seed);
    return stabocp::print_property_report(std::cout, results) ? 0 : 1;
  } catch (const stabocp::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
