#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "driveperc/error.hpp"
#include "driveperc/metrics.hpp"

namespace dp {

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
}

ConfusionMatrix ConfusionMatrix::from_pairs(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
    if (truth.size() != pred.size()) throw_dimension("confusion matrix: truth/pred length mismatch");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= k || pred[i] < 0 || pred[i] >= k)
            throw_parameter("confusion matrix: class index out of range");
        ++cm.at(truth[i], pred[i]);
    }
    return cm;
}

std::string ClassificationScores::flags() const {
    std::string f;
    if (precision_degenerate) f += f.empty() ? "precision0" : ";precision0";
    if (recall_degenerate) f += f.empty() ? "recall0" : ";recall0";
    if (f1_degenerate) f += f.empty() ? "f10" : ";f10";
    return f;
}

ClassificationScores classification_scores(const ConfusionMatrix& cm, int positive_class) {
    if (cm.classes <= 0 || cm.total() == 0) throw_parameter("classification_scores on an empty matrix");
    if (positive_class < 0 || positive_class >= cm.classes)
        throw_parameter("positive class out of range");

    int64_t trace = 0;
    for (int c = 0; c < cm.classes; ++c) trace += cm.at(c, c);

    int64_t tp = cm.at(positive_class, positive_class);
    int64_t fp = 0, fn = 0;
    for (int c = 0; c < cm.classes; ++c) {
        if (c == positive_class) continue;
        fp += cm.at(c, positive_class);
        fn += cm.at(positive_class, c);
    }

    ClassificationScores s;
    s.accuracy = static_cast<double>(trace) / static_cast<double>(cm.total());
    if (tp + fp == 0) {
        s.precision_degenerate = true;
    } else {
        s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        s.recall_degenerate = true;
    } else {
        s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (s.precision + s.recall == 0.0) {
        s.f1_degenerate = true;
    } else {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

double rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size()) throw_dimension("rmse: length mismatch");
    if (y_true.empty()) throw_parameter("rmse of empty vectors");
    double total = 0.0;
    for (size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_true[i] - y_pred[i];
        total += d * d;
    }
    return std::sqrt(total / static_cast<double>(y_true.size()));
}

double mean_iou(const Tensor& pred_masks, const Tensor& true_masks, double threshold) {
    if (!pred_masks.same_shape(true_masks)) throw_dimension("mean_iou: mask shape mismatch");
    if (threshold <= 0.0 || threshold >= 1.0) throw_parameter("mean_iou threshold must be in (0,1)");
    if (pred_masks.ndim() < 3) throw_dimension("mean_iou expects (N,H,W) or (N,1,H,W) masks");

    const int n = pred_masks.dim(0);
    const size_t per_image = pred_masks.size() / static_cast<size_t>(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* p = pred_masks.data() + static_cast<size_t>(i) * per_image;
        const double* t = true_masks.data() + static_cast<size_t>(i) * per_image;
        int64_t inter = 0, uni = 0;
        for (size_t j = 0; j < per_image; ++j) {
            const bool bp = p[j] > threshold;
            const bool bt = t[j] >= 0.5;
            inter += bp && bt;
            uni += bp || bt;
        }
        total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return total / static_cast<double>(n);
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw_dimension("roc_auc: scores/labels length mismatch");
    int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1)
            ++n_pos;
        else if (l == 0)
            ++n_neg;
        else
            throw_parameter("roc_auc labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0) throw_parameter("roc_auc needs at least one sample of each class");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocResult res;
    res.curve.points.emplace_back(0.0, 0.0);
    int64_t tp = 0, fp = 0;
    double auc = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        // Group equal scores into one sweep step.
        size_t j = i;
        int64_t dp_ = 0, dn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1)
                ++dp_;
            else
                ++dn;
            ++j;
        }
        const double x0 = static_cast<double>(fp) / static_cast<double>(n_neg);
        const double y0 = static_cast<double>(tp) / static_cast<double>(n_pos);
        tp += dp_;
        fp += dn;
        const double x1 = static_cast<double>(fp) / static_cast<double>(n_neg);
        const double y1 = static_cast<double>(tp) / static_cast<double>(n_pos);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        res.curve.points.emplace_back(x1, y1);
        i = j;
    }
    res.auc = auc;
    return res;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_report(const std::vector<ReportRow>& rows, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw_io("cannot open report for writing: " + path);

    const char* names[] = {"model", "accuracy", "recall", "precision", "f1", "auc", "flags"};
    if (format == ReportFormat::Csv) {
        for (int c = 0; c < 7; ++c) out << (c ? "," : "") << names[c];
        out << "\n";
        for (const ReportRow& r : rows) {
            out << r.model << "," << fixed6(r.accuracy) << "," << fixed6(r.recall) << ","
                << fixed6(r.precision) << "," << fixed6(r.f1) << ","
                << (r.auc ? fixed6(*r.auc) : "") << "," << r.flags << "\n";
        }
    } else {
        std::vector<std::vector<std::string>> cells;
        cells.push_back({names[0], names[1], names[2], names[3], names[4], names[5], names[6]});
        for (const ReportRow& r : rows)
            cells.push_back({r.model, fixed6(r.accuracy), fixed6(r.recall), fixed6(r.precision),
                             fixed6(r.f1), r.auc ? fixed6(*r.auc) : "-",
                             r.flags.empty() ? "-" : r.flags});
        std::vector<size_t> widths(7, 0);
        for (const auto& row : cells)
            for (int c = 0; c < 7; ++c) widths[static_cast<size_t>(c)] = std::max(widths[static_cast<size_t>(c)], row[static_cast<size_t>(c)].size());
        for (const auto& row : cells) {
            for (int c = 0; c < 7; ++c) {
                out << row[static_cast<size_t>(c)];
                if (c < 6) out << std::string(widths[static_cast<size_t>(c)] - row[static_cast<size_t>(c)].size() + 2, ' ');
            }
            out << "\n";
        }
    }
    if (!out) throw_io("failed writing report: " + path);
}

void write_roc_points(const RocCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_io("cannot open roc file for writing: " + path);
    out << "fpr,tpr\n";
    for (auto [x, y] : curve.points) out << fixed6(x) << "," << fixed6(y) << "\n";
}

}  // namespace dp
