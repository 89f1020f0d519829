#pragma once

#include <functional>
#include <string>
#include <vector>

#include "driveperc/config.hpp"
#include "driveperc/metrics.hpp"
#include "driveperc/models.hpp"

// Coarse-grained operations behind the CLI and the C API.
namespace dp {

struct LaneDetectSummary {
    int processed = 0;
    int failed = 0;
    std::vector<std::string> errors;
};

// Runs the lane pipeline over one image file or every .ppm in a directory
// (sorted), writing <stem>.overlay.ppm and <stem>.lanes.txt per frame, plus
// the five intermediate stage images when `stages` is set. Frame failures are
// recorded and processing continues; outputs land in input order even with
// jobs > 1.
LaneDetectSummary api_lane_detect(const Config& config, const std::string& input_path,
                                  const std::string& output_dir, bool stages, int jobs);

using EpochCallback = std::function<void(int epoch, double loss)>;

// Trains the factory model for `task` (signs|clone|segment|vehicles) on
// data_dir and writes a checkpoint. Fully reproducible from `seed`.
void api_train(const Config& config, const std::string& task, const std::string& data_dir,
               const std::string& out_checkpoint, uint64_t seed, const EpochCallback& on_epoch);

// Loads a checkpoint, evaluates on data_dir and writes a metrics report.
void api_eval(const Config& config, const std::string& task, const std::string& data_dir,
              const std::string& checkpoint_path, const std::string& report_path, ReportFormat format);

// Full finite-difference suite; returns one (name, max relative error) entry
// per layer/loss case.
std::vector<GradCheckCase> api_gradcheck(uint64_t seed, int rounds);

// Materializes preprocessed clone tensors plus manifest.txt ("tensor-file
// steering" per line); returns the sample count.
int api_preprocess(const Config& config, const std::string& log_csv, const std::string& images_dir,
                   const std::string& out_dir);

void api_synth(const std::string& task, int n, uint64_t seed, const std::string& out_dir);

}  // namespace dp
