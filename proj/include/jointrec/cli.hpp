#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "jointrec/data.hpp"
#include "jointrec/metrics.hpp"
#include "jointrec/trainer.hpp"

namespace jointrec::cli {

/// Hyperparameters and model dimensions read from a flat key=value config
/// file. Every key must be present; unknown keys are rejected so typos in
/// hyperparameter names surface immediately.
struct RunConfig {
    TrainConfig train;
    Index hidden_dim = 25;
    Index static_latent = 15;
    Index rank = 5;
    int n_splits = 5;
    int top_n = 3;
};

RunConfig load_run_config(const std::string& path);

/// The cross-validation pipeline behind `eval`: per split, trains the
/// tensor and marginal models (seeded seed+split_id), fits the baselines,
/// and evaluates all four on the test instances.
struct EvalOutcome {
    MetricsReport report;
    std::string log;  // one line per split
};
EvalOutcome evaluate_corpus(const std::vector<PatientRecord>& corpus, const RunConfig& cfg,
                            int n_splits);

/// Dispatches one command (args exclude the program name) and returns the
/// process exit code: 0 success, 2 usage/config, 3 data, 4 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

}  // namespace jointrec::cli
