#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "pwe/pipeline.hpp"

namespace {

struct StageArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--config", args.config, "run configuration file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "run output directory")->required();
  cmd->add_option("--seed", args.seed, "override the configured seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF-encoding pipeline: synthesize a corpus, encode its correlation "
               "structure into wavefront directions, route them through a "
               "metasurface-coated room, and score retrieval from the readings"};
  app.require_subcommand(1);

  StageArgs args;
  const char* stages[] = {"synth", "encode", "route", "read", "evaluate", "report"};
  const char* blurbs[] = {"produce the image corpus",
                          "fit the directional matrix to the corpus correlations",
                          "route a wavefront per image through the tile graph",
                          "assemble readings and composite images",
                          "score retrieval over the corpus",
                          "write the human-readable run report"};
  for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(stages[i], blurbs[i]), args);
  add_common(app.add_subcommand("run", "all stages, synth through report"), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    pwe::pipeline::RunConfig cfg = pwe::pipeline::load_config(args.config);
    if (args.seed_given) cfg.seed = args.seed;
    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "run")
      pwe::pipeline::run_all(cfg, args.out);
    else
      pwe::pipeline::run_stage(cfg, args.out, stage);
    return 0;
  } catch (const pwe::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
