// relayopt <experiment> [--config PATH] [--seed S] [--out DIR] [--verify]

#include <CLI11.hpp>

#include <iostream>

#include "relayopt/experiment.hpp"

namespace ex = relayopt::experiment;

int main(int argc, char **argv)
{
  CLI::App app{"Truthful relay selection and secure two-way relay beamforming experiments"};
  app.require_subcommand(1);

  std::string                  config_path;
  std::optional<std::uint64_t> seed;
  std::string                  out_dir;
  bool                         verify      = false;
  bool                         show_config = false;

  for (auto const &[kind, name] : ex::kKindNames)
  {
    auto *sub = app.add_subcommand(std::string(name), "run the " + std::string(name) + " experiment");
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "replace the configured seeds with this one");
    sub->add_option("--out", out_dir, "output directory (overrides output_path)");
    sub->add_flag("--verify", verify, "recompute 1% of the emitted rows and check their invariants");
    sub->add_flag("--print-config", show_config, "print the resolved configuration before running");
  }

  CLI11_PARSE(app, argc, argv);

  auto const *sub  = app.get_subcommands().front();
  auto const  kind = *ex::parse_kind(sub->get_name());
  try
  {
    auto cfg = config_path.empty() ? ex::parse_config_text("", kind) : ex::parse_config_file(config_path, kind);
    if (seed)
    {
      cfg.seeds = {*seed};
    }
    if (show_config)
    {
      std::cout << ex::serialize(cfg);
    }
    ex::RunOptions opt;
    opt.out_dir = out_dir;
    opt.verify  = verify;
    auto const rep = ex::run(cfg, opt);
    return rep.verify_failures.empty() ? 0 : 3;
  }
  catch (const relayopt::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
