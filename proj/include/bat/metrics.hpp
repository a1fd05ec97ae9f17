#pragma once

#include <vector>

#include "bat/schedule.hpp"

namespace bat {

// entry (t, p): tokens with true class t predicted as p
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<long> counts;  // C x C row-major

    long& at(int t, int p) { return counts[static_cast<std::size_t>(t) * n_classes + p]; }
    long at(int t, int p) const { return counts[static_cast<std::size_t>(t) * n_classes + p]; }
    long total() const;
    void merge(const ConfusionMatrix& other);
};

struct MetricsReport {
    std::vector<double> precision, recall, f1, f2;
    std::vector<long> predicted_counts;  // column sums
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double macro_f2 = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          const std::vector<bool>& mask, int n_classes);

// 0/0 -> 0 convention throughout; macro averages run over all C classes.
MetricsReport report(const ConfusionMatrix& cm);

}  // namespace bat
