#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "driveperc.h"
#include "driveperc/api.hpp"
#include "driveperc/error.hpp"

namespace {

thread_local std::string g_last_error;

dp_status status_from(dp::ErrorKind kind) {
    switch (kind) {
        case dp::ErrorKind::Parameter: return DP_ERR_PARAMETER;
        case dp::ErrorKind::Dimension: return DP_ERR_DIMENSION;
        case dp::ErrorKind::Format: return DP_ERR_FORMAT;
        case dp::ErrorKind::Io: return DP_ERR_IO;
        case dp::ErrorKind::Data: return DP_ERR_DATA;
    }
    return DP_ERR_UNKNOWN;
}

template <typename Fn>
dp_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const dp::Error& e) {
        g_last_error = e.what();
        return status_from(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DP_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown error";
        return DP_ERR_UNKNOWN;
    }
}

dp_status require(bool ok, const char* message) {
    if (ok) return DP_OK;
    g_last_error = message;
    return DP_ERR_PARAMETER;
}

}  // namespace

struct dp_config {
    dp::Config impl;
};

struct dp_model {
    dp::ModelGraph impl;
};

extern "C" {

const char* dp_last_error(void) { return g_last_error.c_str(); }

uint32_t dp_abi_version(void) { return 1; }

dp_status dp_config_create(dp_config** out) {
    if (dp_status s = require(out != nullptr, "out must not be null")) return s;
    return guarded([&] {
        *out = new dp_config();
        return DP_OK;
    });
}

void dp_config_free(dp_config* config) { delete config; }

dp_status dp_config_apply_task_defaults(dp_config* config, const char* task) {
    if (dp_status s = require(config && task, "config and task must not be null")) return s;
    return guarded([&] {
        config->impl.apply_task_defaults(task);
        return DP_OK;
    });
}

dp_status dp_config_load_file(dp_config* config, const char* path) {
    if (dp_status s = require(config && path, "config and path must not be null")) return s;
    return guarded([&] {
        config->impl.load_file(path);
        return DP_OK;
    });
}

dp_status dp_config_set(dp_config* config, const char* key, const char* value) {
    if (dp_status s = require(config && key && value, "config, key and value must not be null")) return s;
    return guarded([&] {
        config->impl.set(key, value);
        return DP_OK;
    });
}

dp_status dp_config_get(const dp_config* config, const char* key, char* buffer, size_t size) {
    if (dp_status s = require(config && key && buffer, "config, key and buffer must not be null")) return s;
    return guarded([&] {
        const std::string v = config->impl.get(key);
        if (v.size() + 1 > size) {
            g_last_error = "buffer too small";
            return DP_ERR_PARAMETER;
        }
        std::memcpy(buffer, v.c_str(), v.size() + 1);
        return DP_OK;
    });
}

dp_status dp_config_dump(const dp_config* config, char* buffer, size_t size, size_t* required) {
    if (dp_status s = require(config != nullptr, "config must not be null")) return s;
    return guarded([&] {
        const std::string text = config->impl.dump();
        if (required) *required = text.size() + 1;
        if (!buffer) return DP_OK;
        if (text.size() + 1 > size) {
            g_last_error = "buffer too small";
            return DP_ERR_PARAMETER;
        }
        std::memcpy(buffer, text.c_str(), text.size() + 1);
        return DP_OK;
    });
}

dp_status dp_lane_detect(const dp_config* config, const char* input_path, const char* output_dir,
                         int write_stages, int jobs, dp_lane_summary* summary) {
    if (dp_status s = require(config && input_path && output_dir, "config, input and output must not be null"))
        return s;
    return guarded([&] {
        const dp::LaneDetectSummary res =
            dp::api_lane_detect(config->impl, input_path, output_dir, write_stages != 0, jobs);
        if (summary) {
            summary->processed = res.processed;
            summary->failed = res.failed;
        }
        for (const auto& e : res.errors) std::fprintf(stderr, "error: %s\n", e.c_str());
        if (res.failed > 0) {
            g_last_error = std::to_string(res.failed) + " frame(s) failed";
            return DP_ERR_PARTIAL;
        }
        return DP_OK;
    });
}

dp_status dp_train(const dp_config* config, const char* task, const char* data_dir,
                   const char* out_checkpoint, uint64_t seed, dp_epoch_callback on_epoch, void* user) {
    if (dp_status s = require(config && task && data_dir && out_checkpoint,
                              "config, task, data_dir and out_checkpoint must not be null"))
        return s;
    return guarded([&] {
        dp::EpochCallback cb;
        if (on_epoch)
            cb = [on_epoch, user](int epoch, double loss) { on_epoch(epoch, loss, user); };
        dp::api_train(config->impl, task, data_dir, out_checkpoint, seed, cb);
        return DP_OK;
    });
}

dp_status dp_eval(const dp_config* config, const char* task, const char* data_dir,
                  const char* checkpoint, const char* report_path, const char* format) {
    if (dp_status s = require(config && task && data_dir && checkpoint && report_path && format,
                              "all dp_eval arguments must not be null"))
        return s;
    return guarded([&] {
        dp::ReportFormat fmt;
        if (std::strcmp(format, "text") == 0)
            fmt = dp::ReportFormat::Text;
        else if (std::strcmp(format, "csv") == 0)
            fmt = dp::ReportFormat::Csv;
        else {
            g_last_error = "format must be 'text' or 'csv'";
            return DP_ERR_PARAMETER;
        }
        dp::api_eval(config->impl, task, data_dir, checkpoint, report_path, fmt);
        return DP_OK;
    });
}

dp_status dp_gradcheck(uint64_t seed, int32_t rounds, double* max_rel_error) {
    return guarded([&] {
        const auto results = dp::api_gradcheck(seed, rounds > 0 ? rounds : 20);
        double worst = 0.0;
        for (const auto& r : results) {
            std::fprintf(stderr, "gradcheck %s max_rel_err %.3e\n", r.name.c_str(), r.max_rel_error);
            worst = std::max(worst, r.max_rel_error);
        }
        if (max_rel_error) *max_rel_error = worst;
        return DP_OK;
    });
}

dp_status dp_preprocess(const dp_config* config, const char* log_csv, const char* images_dir,
                        const char* out_dir, int32_t* count) {
    if (dp_status s = require(config && log_csv && images_dir && out_dir,
                              "config, log_csv, images_dir and out_dir must not be null"))
        return s;
    return guarded([&] {
        const int n = dp::api_preprocess(config->impl, log_csv, images_dir, out_dir);
        if (count) *count = n;
        return DP_OK;
    });
}

dp_status dp_synth(const char* task, int32_t n, uint64_t seed, const char* out_dir) {
    if (dp_status s = require(task && out_dir, "task and out_dir must not be null")) return s;
    return guarded([&] {
        dp::api_synth(task, n, seed, out_dir);
        return DP_OK;
    });
}

dp_status dp_model_load(const char* path, dp_model** out) {
    if (dp_status s = require(path && out, "path and out must not be null")) return s;
    return guarded([&] {
        auto* m = new dp_model{dp::load_checkpoint(path)};
        m->impl.set_mode(dp::Mode::Infer);
        *out = m;
        return DP_OK;
    });
}

void dp_model_free(dp_model* model) { delete model; }

dp_status dp_model_input_size(const dp_model* model, size_t* out) {
    if (dp_status s = require(model && out, "model and out must not be null")) return s;
    *out = dp::shape_product(model->impl.input_shape());
    return DP_OK;
}

dp_status dp_model_output_size(const dp_model* model, size_t* out) {
    if (dp_status s = require(model && out, "model and out must not be null")) return s;
    *out = dp::shape_product(model->impl.output_shape());
    return DP_OK;
}

dp_status dp_model_predict(dp_model* model, const double* input, size_t input_len,
                           double* output, size_t output_len) {
    if (dp_status s = require(model && input && output, "model, input and output must not be null")) return s;
    return guarded([&] {
        const size_t in_need = dp::shape_product(model->impl.input_shape());
        const size_t out_need = dp::shape_product(model->impl.output_shape());
        if (input_len != in_need || output_len < out_need) {
            g_last_error = "input/output buffer size mismatch";
            return DP_ERR_DIMENSION;
        }
        std::vector<int> shape{1};
        for (int d : model->impl.input_shape()) shape.push_back(d);
        dp::Tensor x(shape, std::vector<double>(input, input + input_len));
        model->impl.set_mode(dp::Mode::Infer);
        const dp::Tensor y = model->impl.forward(x, nullptr);
        std::copy(y.data(), y.data() + out_need, output);
        return DP_OK;
    });
}

}  // extern "C"
