#pragma once

#include "seedprompt/evaluation.hpp"
#include "seedprompt/run_config.hpp"

// Batch subcommands. Each validates its configuration before doing any work
// and throws ConfigError on a bad setup. Machine-readable output goes to
// files only; progress goes to standard error.
namespace seedprompt::commands {

// dataset -> filter -> split; writes train.jsonl and test.jsonl to output_dir.
void prepare(const RunConfig& config);

// dataset -> annotated dataset at `output`.
void annotate(const RunConfig& config);

// annotated training set -> graph file at `output`.
void build_graph(const RunConfig& config);

// annotated set + graph -> seeds sidecar at `output`.
void mine_seeds(const RunConfig& config);

// Writes records.jsonl, report.json, report.md and effective_config.json to
// output_dir.
EvalRun run(const RunConfig& config);

// records -> report.json and report.md in output_dir.
EvalReport report(const RunConfig& config);

// cache directory -> replay fixture at `output`.
void export_fixture(const RunConfig& config);

}  // namespace seedprompt::commands
