#pragma once

#include <string>
#include <vector>

#include "bat/data.hpp"
#include "bat/metrics.hpp"
#include "bat/model.hpp"
#include "bat/objectives.hpp"
#include "bat/schedule.hpp"

namespace bat {

struct ExperimentConfig {
    ModelConfig model;
    LossFamily loss_family = LossFamily::CE;
    double loss_gamma = 0.0;
    double loss_lambda = 1.0;
    WeightKind weight_scheme = WeightKind::none;
    LogBase log_base = LogBase::natural;
    ScheduleSpec schedule;
    SyntheticSpec data;
    int batch_size = 8;
    int epochs = 50;
    double eval_split = 0.2;
    unsigned long long seed = 1;
    std::string outdir = "out";

    void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0, eval_loss = 0.0;
    MetricsReport train, eval;
    double lrate = 0.0;
};

struct RunRecord {
    std::vector<EpochMetrics> epochs;
    double wall_seconds = 0.0;
    std::string checkpoint_path;
    std::string metrics_csv_path;
};

// Full training run: forward -> loss -> backward -> Adam per batch, schedule
// queried per optimizer step, both splits evaluated per epoch, metrics.csv and
// run.json written under config.outdir. Deterministic given the seed.
// Throws training_aborted (after diagnostics) on a non-finite loss.
RunRecord train(const ExperimentConfig& config);
RunRecord train(const ExperimentConfig& config, const Dataset& dataset);

struct EvalResult {
    double loss = 0.0;
    MetricsReport metrics;
};

EvalResult evaluate(const Model& model, const LossSpec& spec, const Dataset& split,
                    int batch_size);

LossSpec build_loss_spec(const ExperimentConfig& config, const DatasetStats& stats);

struct training_aborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string metrics_csv_header(int n_classes);
std::string metrics_csv_row(int epoch, const std::string& split, double loss,
                            const MetricsReport& rep, double lrate);

}  // namespace bat
