// Command-line front end: one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <cstdio>
#include <map>

#include "kgalign/log.hpp"
#include "kgalign/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kgalign: scalable structure-only entity alignment"};
  app.require_subcommand(1);

  std::map<std::string, std::string> values;  // key -> flag value
  std::string config_file;
  bool quiet = false;
  for (const auto& stage : kgalign::stage_names()) {
    auto* sub = app.add_subcommand(stage, "run the " + stage + " stage");
    sub->add_option("--config", config_file, "key=value configuration file");
    sub->add_flag("--quiet", quiet, "only print warnings and errors");
    for (const auto& key : kgalign::PipelineConfig::keys()) {
      sub->add_option("--" + key, values[key]);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (quiet) kgalign::set_log_level(kgalign::LogLevel::Warning);

  try {
    kgalign::PipelineConfig cfg = config_file.empty() ? kgalign::PipelineConfig{} : kgalign::load_config(config_file);
    const auto* sub = app.get_subcommands().front();
    for (const auto& key : kgalign::PipelineConfig::keys()) {
      if (sub->count("--" + key) > 0) cfg.set(key, values[key]);
    }
    kgalign::run_stage(cfg, sub->get_name());
    if (sub->get_name() == "eval" || sub->get_name() == "pipeline") {
      std::FILE* f = std::fopen((cfg.out / "metrics.txt").string().c_str(), "r");
      if (f) {
        char line[512];
        while (std::fgets(line, sizeof line, f)) {
          if (std::string_view(line).rfind("config.", 0) != 0) std::fputs(line, stdout);
        }
        std::fclose(f);
      }
    }
  } catch (const kgalign::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
