#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "driveperc/api.hpp"
#include "driveperc/datasets.hpp"
#include "driveperc/error.hpp"
#include "driveperc/lane.hpp"

namespace fs = std::filesystem;

namespace dp {

namespace {

std::string format2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void write_lanes_file(const LaneLines& lanes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_io("cannot write lanes file: " + path);
    auto line = [&](const char* side, const std::optional<LineSegment>& seg) {
        if (seg)
            out << side << " " << format2(seg->x1) << " " << format2(seg->y1) << " "
                << format2(seg->x2) << " " << format2(seg->y2) << "\n";
        else
            out << side << " absent\n";
    };
    line("left", lanes.left);
    line("right", lanes.right);
}

struct FrameOutput {
    bool ok = false;
    std::string error;
    LaneLines lanes;
    Image annotated;
    StageDumps dumps;
};

}  // namespace

LaneDetectSummary api_lane_detect(const Config& config, const std::string& input_path,
                                  const std::string& output_dir, bool stages, int jobs) {
    const PipelineConfig pipeline = config.pipeline();
    if (jobs < 1) throw_parameter("jobs must be >= 1");

    std::vector<fs::path> inputs;
    if (fs::is_directory(input_path)) {
        for (const auto& entry : fs::directory_iterator(input_path))
            if (entry.is_regular_file() && entry.path().extension() == ".ppm") inputs.push_back(entry.path());
        std::sort(inputs.begin(), inputs.end());
    } else if (fs::is_regular_file(input_path)) {
        inputs.emplace_back(input_path);
    } else {
        throw_io("input path does not exist: " + input_path);
    }

    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (!fs::is_directory(output_dir)) throw_io("cannot create output directory: " + output_dir);

    std::vector<FrameOutput> results(inputs.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            FrameOutput& r = results[i];
            try {
                const Image frame = read_image(inputs[i].string());
                PipelineResult pr = run_pipeline(frame, pipeline, stages ? &r.dumps : nullptr);
                r.lanes = pr.lanes;
                r.annotated = std::move(pr.annotated);
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = inputs[i].filename().string() + ": " + e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    LaneDetectSummary summary;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const FrameOutput& r = results[i];
        if (!r.ok) {
            ++summary.failed;
            summary.errors.push_back(r.error);
            continue;
        }
        const std::string stem = inputs[i].stem().string();
        const fs::path base = fs::path(output_dir) / stem;
        write_image(r.annotated, base.string() + ".overlay.ppm");
        write_lanes_file(r.lanes, base.string() + ".lanes.txt");
        if (stages) {
            write_image(r.dumps.gray, base.string() + ".gray.pgm");
            write_image(r.dumps.blur, base.string() + ".blur.pgm");
            write_image(r.dumps.canny, base.string() + ".canny.pgm");
            write_image(r.dumps.roi, base.string() + ".roi.pgm");
            write_image(r.dumps.hough, base.string() + ".hough.pgm");
        }
        ++summary.processed;
    }
    return summary;
}

namespace {

struct TaskData {
    Tensor inputs;   // (N, ...)
    Tensor targets;  // (N, ...)
    int class_count = 0;
};

TaskData load_classification(const std::string& data_dir, bool binary) {
    const ClassifiedImageSet set = load_class_dirs(data_dir);
    for (const auto& w : set.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (set.samples.empty()) throw_data("no samples under " + data_dir);
    if (binary && set.class_count != 2)
        throw_data("vehicles task expects 2 classes, found " + std::to_string(set.class_count));

    const Image first = read_image(set.samples[0].first);
    const int c = first.channels(), h = first.height, w = first.width;
    const int n = static_cast<int>(set.samples.size());

    TaskData d;
    d.class_count = set.class_count;
    d.inputs = Tensor({n, c, h, w});
    d.targets = binary ? Tensor({n, 1}) : Tensor({n, set.class_count});
    const size_t stride = static_cast<size_t>(c) * h * w;
    for (int i = 0; i < n; ++i) {
        const Image img = read_image(set.samples[static_cast<size_t>(i)].first);
        if (img.height != h || img.width != w || img.channels() != c)
            throw_data("inconsistent image size: " + set.samples[static_cast<size_t>(i)].first);
        const Tensor t = normalize(img);
        std::copy(t.data(), t.data() + stride, d.inputs.data() + i * stride);
        const int cls = set.samples[static_cast<size_t>(i)].second;
        if (binary)
            d.targets.at2(i, 0) = cls;
        else
            d.targets.at2(i, cls) = 1.0;
    }
    return d;
}

TaskData load_segmentation(const std::string& data_dir) {
    const SegmentationPairSet set = load_seg_pairs((fs::path(data_dir) / "images").string(),
                                                   (fs::path(data_dir) / "masks").string());
    if (set.pairs.empty()) throw_data("no segmentation pairs under " + data_dir);
    const Image first = read_image(set.pairs[0].first);
    const int h = first.height, w = first.width;
    const int n = static_cast<int>(set.pairs.size());

    TaskData d;
    d.inputs = Tensor({n, 3, h, w});
    d.targets = Tensor({n, 1, h, w});
    const size_t in_stride = 3 * static_cast<size_t>(h) * w;
    const size_t mask_stride = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        const Tensor img = normalize(read_image(set.pairs[static_cast<size_t>(i)].first));
        std::copy(img.data(), img.data() + in_stride, d.inputs.data() + i * in_stride);
        const Tensor mask = load_binary_mask(set.pairs[static_cast<size_t>(i)].second);
        std::copy(mask.data(), mask.data() + mask_stride, d.targets.data() + i * mask_stride);
    }
    return d;
}

TaskData load_clone(const Config& config, const std::string& data_dir, bool augment, uint64_t seed) {
    const std::string csv = (fs::path(data_dir) / "driving_log.csv").string();
    const auto records = parse_driving_log(csv);
    if (records.empty()) throw_data("empty driving log: " + csv);
    const DrivePreprocessOptions options = config.preprocess();

    Prng prng(seed);
    std::vector<Tensor> tensors;
    std::vector<double> steering;
    for (const auto& rec : records) {
        auto [t, s] = preprocess_driving(rec, Camera::Center, data_dir, prng, false, options);
        tensors.push_back(std::move(t));
        steering.push_back(s);
        if (augment) {
            // Flip-expansion: add the mirrored sample with negated steering.
            DrivePreprocessOptions forced = options;
            forced.flip_prob = 1.0;
            auto [tf, sf] = preprocess_driving(rec, Camera::Center, data_dir, prng, true, forced);
            tensors.push_back(std::move(tf));
            steering.push_back(sf);
        }
    }
    const int n = static_cast<int>(tensors.size());
    TaskData d;
    d.inputs = Tensor({n, 3, options.out_h, options.out_w});
    d.targets = Tensor({n, 1});
    const size_t stride = tensors[0].size();
    for (int i = 0; i < n; ++i) {
        std::copy(tensors[static_cast<size_t>(i)].data(), tensors[static_cast<size_t>(i)].data() + stride,
                  d.inputs.data() + i * stride);
        d.targets.at2(i, 0) = steering[static_cast<size_t>(i)];
    }
    return d;
}

struct TaskSetup {
    TaskData data;
    LossKind loss = LossKind::Mse;
};

TaskSetup load_task(const Config& config, const std::string& task, const std::string& data_dir,
                    bool augment, uint64_t seed) {
    TaskSetup s;
    if (task == "signs") {
        s.data = load_classification(data_dir, false);
        s.loss = LossKind::CategoricalCe;
    } else if (task == "vehicles") {
        s.data = load_classification(data_dir, true);
        s.loss = LossKind::BinaryCe;
    } else if (task == "segment") {
        s.data = load_segmentation(data_dir);
        s.loss = LossKind::BinaryCe;
    } else if (task == "clone") {
        s.data = load_clone(config, data_dir, augment, seed);
        s.loss = LossKind::Mse;
    } else {
        throw_parameter("unknown task: " + task + " (expected signs|clone|segment|vehicles)");
    }
    return s;
}

ModelGraph build_task_model(const std::string& task, int class_count) {
    if (task == "signs") return build_traffic_sign_cnn(class_count);
    if (task == "vehicles") return build_binary_vehicle_cnn();
    if (task == "segment") return build_mini_fcn_segmenter();
    return build_behavior_clone_cnn();
}

}  // namespace

void api_train(const Config& config, const std::string& task, const std::string& data_dir,
               const std::string& out_checkpoint, uint64_t seed, const EpochCallback& on_epoch) {
    const TrainConfig tc = config.train();
    Prng master(seed);
    Prng init_prng = master.split();
    Prng train_prng = master.split();

    TaskSetup s = load_task(config, task, data_dir, tc.augment, master.split().next_u64());
    ModelGraph model = build_task_model(task, s.data.class_count);
    model.init_params(init_prng);
    Optimizer optimizer(tc.optimizer_config());

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        const double epoch_loss = train_epoch(model, s.data.inputs, s.data.targets, s.loss,
                                              optimizer, train_prng, tc.batch_size);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    model.set_mode(Mode::Infer);
    save_checkpoint(model, out_checkpoint);
}

void api_eval(const Config& config, const std::string& task, const std::string& data_dir,
              const std::string& checkpoint_path, const std::string& report_path, ReportFormat format) {
    ModelGraph model = load_checkpoint(checkpoint_path);
    TaskSetup s = load_task(config, task, data_dir, false, 0);
    const EvalResult res = evaluate(model, s.data.inputs, s.data.targets, s.loss, {},
                                    config.train().batch_size);

    ReportRow row;
    row.model = task;
    const int n = s.data.inputs.dim(0);
    if (task == "signs") {
        std::vector<int> truth(static_cast<size_t>(n)), pred(static_cast<size_t>(n));
        const auto pred_rows = argmax_rows(res.predictions);
        const auto true_rows = argmax_rows(s.data.targets);
        for (int i = 0; i < n; ++i) {
            truth[static_cast<size_t>(i)] = true_rows[static_cast<size_t>(i)];
            pred[static_cast<size_t>(i)] = pred_rows[static_cast<size_t>(i)];
        }
        const ConfusionMatrix cm = ConfusionMatrix::from_pairs(truth, pred, s.data.class_count);
        // Macro-average of the one-vs-rest scores across classes.
        double precision = 0, recall = 0, f1 = 0;
        ClassificationScores any{};
        for (int c = 0; c < cm.classes; ++c) {
            const ClassificationScores cs = classification_scores(cm, c);
            precision += cs.precision;
            recall += cs.recall;
            f1 += cs.f1;
            any.precision_degenerate |= cs.precision_degenerate;
            any.recall_degenerate |= cs.recall_degenerate;
            any.f1_degenerate |= cs.f1_degenerate;
        }
        row.accuracy = classification_scores(cm, 0).accuracy;
        row.precision = precision / cm.classes;
        row.recall = recall / cm.classes;
        row.f1 = f1 / cm.classes;
        row.flags = any.flags();
    } else if (task == "vehicles") {
        std::vector<int> truth(static_cast<size_t>(n)), pred(static_cast<size_t>(n));
        std::vector<double> scores(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = res.predictions.at2(i, 0);
            truth[static_cast<size_t>(i)] = s.data.targets.at2(i, 0) >= 0.5 ? 1 : 0;
            pred[static_cast<size_t>(i)] = res.predictions.at2(i, 0) > 0.5 ? 1 : 0;
        }
        const ConfusionMatrix cm = ConfusionMatrix::from_pairs(truth, pred, 2);
        const ClassificationScores cs = classification_scores(cm, 1);
        row.accuracy = cs.accuracy;
        row.precision = cs.precision;
        row.recall = cs.recall;
        row.f1 = cs.f1;
        row.flags = cs.flags();
        const RocResult roc = roc_auc(scores, truth);
        row.auc = roc.auc;
        write_roc_points(roc.curve, report_path + ".roc.csv");
    } else if (task == "segment") {
        row.accuracy = mean_iou(res.predictions, s.data.targets, 0.5);
        row.flags = "accuracy=mean_iou";
    } else {  // clone
        std::vector<double> truth(static_cast<size_t>(n)), pred(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            truth[static_cast<size_t>(i)] = s.data.targets.at2(i, 0);
            pred[static_cast<size_t>(i)] = res.predictions.at2(i, 0);
        }
        row.accuracy = rmse(truth, pred);
        row.flags = "accuracy=rmse";
    }
    write_report({row}, report_path, format);
}

std::vector<GradCheckCase> api_gradcheck(uint64_t seed, int rounds) {
    return gradient_check_suite(seed, rounds);
}

int api_preprocess(const Config& config, const std::string& log_csv, const std::string& images_dir,
                   const std::string& out_dir) {
    const auto records = parse_driving_log(log_csv);
    const DrivePreprocessOptions options = config.preprocess();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw_io("cannot create output directory: " + out_dir);

    std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
    if (!manifest) throw_io("cannot write manifest under " + out_dir);

    Prng prng(0);  // unused: preprocessing without augmentation is deterministic
    int count = 0;
    for (const auto& rec : records) {
        auto [tensor, steering] = preprocess_driving(rec, Camera::Center, images_dir, prng, false, options);
        const std::string stem = fs::path(rec.center).stem().string();
        const std::string file = stem + ".tsr";
        save_tensor(tensor, (fs::path(out_dir) / file).string());
        char line[512];
        std::snprintf(line, sizeof(line), "%s %.6f\n", file.c_str(), steering);
        manifest << line;
        ++count;
    }
    return count;
}

void api_synth(const std::string& task, int n, uint64_t seed, const std::string& out_dir) {
    synth_generate(synth_task_from_name(task), n, seed, out_dir);
}

}  // namespace dp
