#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "nof/config.hpp"
#include "nof/error.hpp"
#include "nof/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--out", o.out, "output directory (overrides 'out')");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&o](const std::uint64_t& s) {
        o.seed = s;
        o.seed_given = true;
      },
      "master seed (overrides 'seed')");
  cmd->add_option("--set", o.overrides, "override a config key, e.g. --set mine.beta_sup=0.2")->take_all();
}

nof::PipelineConfig resolve(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  if (!o.out.empty()) overrides.push_back("out=\"" + o.out + "\"");
  if (o.seed_given) overrides.push_back("seed=" + std::to_string(o.seed));
  return o.config_path.empty() ? nof::default_config(overrides) : nof::load_config(o.config_path, overrides);
}

void report(const nof::StageRecord& r) {
  std::printf("%-10s %3zu inputs  %3zu outputs  %9.1f ms\n", r.stage.c_str(), r.inputs.size(), r.outputs.size(),
              r.wall_ms);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor summaries, clustering, rule mining and ontology partitioning for ERP data"};
  app.require_subcommand(1, 1);
  Options opts;
  std::vector<std::pair<CLI::App*, nof::Stage>> stage_cmds;
  for (auto stage : nof::kStages) {
    auto* cmd = app.add_subcommand(std::string(nof::stage_name(stage)), "run the " +
                                                                            std::string(nof::stage_name(stage)) +
                                                                            " stage");
    add_common(cmd, opts);
    stage_cmds.emplace_back(cmd, stage);
  }
  auto* pipeline = app.add_subcommand("pipeline", "run every stage in order");
  add_common(pipeline, opts);
  bool print_config = false;
  pipeline->add_flag("--print-config", print_config, "print the effective config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    const nof::PipelineConfig config = resolve(opts);
    if (pipeline->parsed()) {
      if (print_config) {
        std::cout << nof::config_to_json(config);
        return 0;
      }
      for (const auto& r : nof::run_pipeline(config)) report(r);
      std::printf("manifest: %s/run.json\n", config.out.c_str());
      return 0;
    }
    for (const auto& [cmd, stage] : stage_cmds)
      if (cmd->parsed()) report(nof::run_stage(stage, config));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "nof: " << e.what() << "\n";
    return nof::exit_code_for(e);
  }
}
