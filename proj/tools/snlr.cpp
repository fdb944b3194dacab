// Command-line front end: snlr {fit|bands|equiv|simulate} --config <path> [...]

#include <iostream>

#include <CLI11.hpp>

#include "snlr/commands.hpp"

int main(int argc, char** argv) {
  snlr::cli::Options opt;
  CLI::App app{"Censored S-N regression: ML fits, LR/Wald confidence bands, equivalence checks, coverage studies"};
  app.require_subcommand(1, 1);

  std::string data, out, method;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "analysis config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "dataset CSV (stress,cycles,status)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--alpha", alpha, "1 - confidence level (two-sided)");
    sub->add_option("--method", method, "lr, wald or both")->check(CLI::IsMember({"lr", "wald", "both"}));
    sub->add_option("--seed", seed, "simulation seed");
    sub->add_option("--threads", opt.threads, "worker threads (0: all cores)");
  };
  for (const char* name : {"fit", "bands", "equiv", "simulate"}) add_common(app.add_subcommand(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : snlr::cli::bad_input;
  }
  opt.command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--data")) opt.data = data;
  if (sub->count("--out")) opt.out = out;
  if (sub->count("--alpha")) opt.alpha = alpha;
  if (sub->count("--method")) opt.method = method;
  if (sub->count("--seed")) opt.seed = seed;
  return snlr::cli::run(opt, std::cout, std::cerr);
}
