#include <iostream>

#include <CLI11.hpp>

#include "kinlab/commands.hpp"
#include "kinlab/errors.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"kinlab: BGK hydrodynamic-limit and transient-growth checks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  kinlab::CommandOptions opts;
  std::uint64_t seed = 0;
  app.add_option("--config,-c", config_path, "INI configuration file");
  app.add_option("--out,-o", opts.out_dir, "output directory (overrides [global] output_dir)");
  app.add_option("--threads,-j", opts.threads, "worker threads for scans and sweeps")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides [global] seed)");

  for (const auto& name : kinlab::command_names()) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kinlab::kExitInvalid;
  }
  if (seed_opt->count()) opts.seed = seed;

  kinlab::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = kinlab::RunConfig::load(config_path);
  } catch (const kinlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kinlab::kExitInvalid;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return kinlab::run_command(name, cfg, opts, std::cout);
}
