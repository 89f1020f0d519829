#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driveperc/tensor.hpp"

namespace dp {

// KxK integer counts; rows index the true class, columns the predicted one.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<int64_t> counts;

    explicit ConfusionMatrix(int k) : classes(k), counts(static_cast<size_t>(k) * k, 0) {}

    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * classes + pred]; }
    int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * classes + pred]; }
    int64_t total() const;

    static ConfusionMatrix from_pairs(const std::vector<int>& truth, const std::vector<int>& pred, int k);
};

struct ClassificationScores {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    // Degenerate denominators (e.g. TP+FP = 0) yield score 0 plus a flag,
    // never NaN.
    bool precision_degenerate = false, recall_degenerate = false, f1_degenerate = false;

    std::string flags() const;
};

// Accuracy is trace/total (multi-class); precision/recall/F1 are one-vs-rest
// with `positive_class` as the positive label. Integer arithmetic up to the
// final division.
ClassificationScores classification_scores(const ConfusionMatrix& cm, int positive_class);

double rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// Per-image |intersection| / |union| on binarized masks (prediction > threshold,
// truth >= 0.5), averaged over images. Two empty masks score 1.
// Masks are (N,H,W) or (N,1,H,W) tensors.
double mean_iou(const Tensor& pred_masks, const Tensor& true_masks, double threshold);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (false-positive rate, true-positive rate)
};

struct RocResult {
    RocCurve curve;
    double auc = 0;
};

// Threshold sweep over the distinct scores (ties grouped into one step),
// anchored at (0,0) and (1,1); AUC by the trapezoidal rule, equal to the
// Mann-Whitney pair statistic with ties counted 1/2.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ReportRow {
    std::string model;
    double accuracy = 0, recall = 0, precision = 0, f1 = 0;
    std::optional<double> auc;
    std::string flags;
};

enum class ReportFormat { Text, Csv };

// Fixed column order (model, accuracy, recall, precision, f1, auc, flags)
// with 6-decimal values; an empty row list still writes the header.
void write_report(const std::vector<ReportRow>& rows, const std::string& path, ReportFormat format);

void write_roc_points(const RocCurve& curve, const std::string& path);

}  // namespace dp
