#pragma once

#include <map>
#include <string>

#include "driveperc/datasets.hpp"
#include "driveperc/lane.hpp"
#include "driveperc/nn.hpp"

namespace dp {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 64;
    double learning_rate = 0.001;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool augment = false;

    OptimizerConfig optimizer_config() const {
        return {optimizer, learning_rate, beta, beta1, beta2, epsilon};
    }
};

// Flat key = value sections ([pipeline], [train], [augment], [data]).
// Every key is validated against the published schema; unknown keys are
// rejected. Precedence is built-in defaults < config file < explicit set().
class Config {
public:
    Config();

    // Table-driven per-task training defaults (signs/clone/segment/vehicles).
    void apply_task_defaults(const std::string& task);

    void load_file(const std::string& path);
    void set(const std::string& dotted_key, const std::string& value);
    std::string get(const std::string& dotted_key) const;

    // Full schema as config-file text; re-ingesting it reproduces the run.
    std::string dump() const;

    PipelineConfig pipeline() const;
    TrainConfig train() const;
    AugmentConfig augment() const;
    DrivePreprocessOptions preprocess() const;
    double split_ratio() const;

private:
    std::map<std::string, std::string> values_;  // dotted key -> value
};

}  // namespace dp
