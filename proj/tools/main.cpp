#include <iostream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "commands.hpp"

using namespace vlogvis;
using namespace vlogvis::cli;

namespace {

/// Value of `--config` anywhere on the command line, if present.
std::string config_path(const std::vector<std::string>& args)
{
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

} // namespace

int main(int argc, char** argv)
{
  const std::vector<std::string> args(argv + 1, argv + argc);
  bool json_errors = false;
  for (const auto& a : args) json_errors = json_errors || a == "--json-errors";

  CLI::App app{"Visible-action corpus construction and classification toolkit", "vlogvis"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config;
  app.add_option("--config", config, "Flat key = value file; command-line values win")->check(CLI::ExistingFile);
  app.add_flag("--json-errors", json_errors, "Report errors as JSON on stderr");

  std::vector<Command> commands;
  register_pipeline_commands(app, commands);
  register_learning_commands(app, commands);

  try {
    std::vector<std::string> full = args;
    if (const auto path = config_path(args); !path.empty() && std::filesystem::exists(path)) {
      const auto entries = read_config(path);
      for (const auto& c : commands) {
        const auto it = std::find(args.begin(), args.end(), c.app->get_name());
        if (it == args.end()) continue;
        const auto extra = config_arguments(entries, *c.app, args);
        full.insert(full.end(), extra.begin(), extra.end());
        break;
      }
    }
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(json_errors, "Config", e.what(), ConfigError);
    return ConfigError;
  } catch (const Error& e) {
    report_error(json_errors, to_string(e.code()), e.what(), exit_code_for(e.code()));
    return exit_code_for(e.code());
  }

  try {
    for (const auto& c : commands)
      if (c.app->parsed()) c.run();
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(json_errors, to_string(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(json_errors, "Runtime", e.what(), RuntimeFailure);
    return RuntimeFailure;
  }
  return Ok;
}
