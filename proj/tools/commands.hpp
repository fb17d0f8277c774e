#pragma once

#include <functional>
#include <vector>

#include <CLI11.hpp>

namespace vlogvis::cli {

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

// ingest, extract, segment, motion-filter, hits, serve, aggregate, kappa
void register_pipeline_commands(CLI::App& root, std::vector<Command>& out);
// features, train, evaluate, stats
void register_learning_commands(CLI::App& root, std::vector<Command>& out);

} // namespace vlogvis::cli
