#include "bat/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace bat {

long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_classes != n_classes)
        throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          const std::vector<bool>& mask, int n_classes) {
    if (labels.size() != preds.size() || labels.size() != mask.size())
        throw std::invalid_argument("confusion: input length mismatch");
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(static_cast<std::size_t>(n_classes) * n_classes, 0L);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!mask[i]) continue;
        const int t = labels[i], p = preds[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
            throw std::out_of_range("confusion: class id out of range at token " +
                                    std::to_string(i));
        ++cm.at(t, p);
    }
    return cm;
}

namespace {

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

double f_beta(double p, double r, double b) {
    const double b2 = b * b;
    return safe_div((1.0 + b2) * p * r, b2 * p + r);
}

}  // namespace

MetricsReport report(const ConfusionMatrix& cm) {
    const int C = cm.n_classes;
    MetricsReport rep;
    long pooled_tp = 0;
    for (int c = 0; c < C; ++c) {
        long tp = cm.at(c, c), fp = 0, fn = 0;
        for (int k = 0; k < C; ++k) {
            if (k == c) continue;
            fp += cm.at(k, c);
            fn += cm.at(c, k);
        }
        pooled_tp += tp;
        const double p = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        const double r = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        rep.precision.push_back(p);
        rep.recall.push_back(r);
        rep.f1.push_back(f_beta(p, r, 1.0));
        rep.f2.push_back(f_beta(p, r, 2.0));
        long pred = 0;
        for (int k = 0; k < C; ++k) pred += cm.at(k, c);
        rep.predicted_counts.push_back(pred);
    }
    // single-label per token: pooled fp == pooled fn, so micro-F1 == accuracy
    rep.micro_f1 = safe_div(static_cast<double>(pooled_tp), static_cast<double>(cm.total()));
    for (int c = 0; c < C; ++c) {
        rep.macro_f1 += rep.f1[static_cast<std::size_t>(c)];
        rep.macro_f2 += rep.f2[static_cast<std::size_t>(c)];
    }
    rep.macro_f1 /= C;
    rep.macro_f2 /= C;
    return rep;
}

}  // namespace bat
