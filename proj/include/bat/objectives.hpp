#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bat/tape.hpp"
#include "bat/tensor.hpp"

namespace bat {

// Per-class sample counts of the whole dataset; feeds every weight constructor.
struct DatasetStats {
    int n_classes = 0;
    std::vector<long> counts;  // N_1..N_C, all >= 1
    long total = 0;            // N = sum(counts)

    static DatasetStats from_counts(std::vector<long> counts);
};

enum class WeightKind { none, wce_optimal, standard, ee, array, custom };

struct WeightScheme {
    WeightKind kind = WeightKind::none;
    std::vector<double> alpha;  // positive-term weight per true class
    std::vector<double> beta;   // negative-term weight per negative class
    std::vector<double> array;  // C x C row-major, array kind only

    double pos_weight(int true_class) const;
    double neg_weight(int neg_class, int true_class) const;
    bool has_beta() const;
};

WeightScheme make_weights(WeightKind kind, const DatasetStats& stats);
// Explicit alpha/beta vectors, used by the reduction-lattice tests.
WeightScheme make_custom_weights(std::vector<double> alpha, std::vector<double> beta);

enum class LossFamily { CE, FCE, WCE, CECL, WCECL, CECLA, PBP, PBPA };
enum class LogBase { natural, base10 };

struct LossSpec {
    LossFamily family = LossFamily::CE;
    double gamma = 0.0;   // focal exponent, 0 or 1 supported
    double lambda = 1.0;  // multiplier on the positive-term weight, >= 1
    WeightScheme weights;
    LogBase log_base = LogBase::natural;
    double clamp_eps = 1e-7;

    void validate() const;  // family/weights compatibility
};

// One-hot labels and row-stochastic predictions over tokens, with a mask
// excluding padding positions.
struct LossBatch {
    int n_tokens = 0;
    int n_classes = 0;
    std::vector<double> labels;  // n_tokens x C, one-hot
    std::vector<double> probs;   // n_tokens x C
    std::vector<bool> mask;      // true = counted

    int true_class(int i) const;
    int argmax_class(int i) const;  // ties toward the lowest index
    long n_unmasked() const;
};

const char* family_name(LossFamily f);
LossFamily family_from_name(const std::string& s);
const char* weight_kind_name(WeightKind k);
WeightKind weight_kind_from_name(const std::string& s);

// Mean per-token loss over unmasked tokens.
double loss_value(const LossSpec& spec, const LossBatch& batch);

// d(mean loss)/d(probs), n_tokens x C row-major. Consistently differentiated
// in the selected log base so it matches finite differences of loss_value.
std::vector<double> loss_grad_analytic(const LossSpec& spec, const LossBatch& batch);

// Scalar dL/dp_j of the aggregated loss under the equal-prediction assumption.
// Evaluates the printed closed forms literally: log terms in the selected base,
// rational terms unscaled; with EE/standard weights and gamma=0 this is
// -lambda/p_plus + 1/(1-p_minus), sign boundary lambda/(1+lambda).
double aggregated_gradient(const LossSpec& spec, const DatasetStats& stats, double p_plus,
                           double p_minus, int class_j);

// Numerically minimizes the aggregated WCE loss over the probability simplex
// (projected gradient descent) and returns the argmin.
std::vector<double> wce_optimality_check(const DatasetStats& stats,
                                         const std::vector<double>& alpha);

// Tape node: forward = loss_value, backward = loss_grad_analytic. `probs` is
// the model's softmax output on the tape.
TensorPtr classification_loss(Tape& tape, const LossSpec& spec, const TensorPtr& probs,
                              const std::vector<int>& labels, const std::vector<bool>& mask);

// Error type for invalid family/weight pairings and degenerate stats.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace bat
