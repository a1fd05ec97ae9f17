#pragma once

#include <optional>
#include <string>

namespace bat {

// Exact fraction used by the continuity solve, so beta values like 1/22 and
// -1/30 come out as the printed rationals.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

// beta = alpha - 1/2, the unique solution of S^beta x^-alpha = S^-3/2 x at x=S.
Rational solve_beta(const Rational& alpha);
double solve_beta(double alpha);

struct ScheduleSpec {
    int d_model = 128;
    long warmup = 4000;   // S
    double alpha = 0.5;   // decay exponent, > 0
    double beta = 0.0;    // warmup exponent; derived from alpha unless overridden
    double lambda = 1.0;  // global multiplier
    std::optional<Rational> alpha_rational;  // kept when built from a named variant

    static ScheduleSpec with_alpha(const Rational& alpha, int d_model = 128, long warmup = 4000,
                                   double lambda = 1.0);
};

// d_model^-1/2 * min(x^-1/2, x * S^-3/2)
double base_lrate(long step, int d_model, long warmup);

// lambda * d_model^-1/2 * min(S^beta x^-alpha, S^-3/2 x)
double adjusted_lrate(const ScheduleSpec& spec, long step);

// v1..v5 and the paper's multiplier-suffixed forms ("v4*1.001", "v4x1.001").
// "v3-paper" builds the printed beta=-1/22, which breaks continuity at x=S.
ScheduleSpec named_variant(const std::string& name);

struct FscoreGeometry {
    double f_beta;            // (1+b^2) p r / (b^2 p + r)
    double f1_minus_f2;       // 3 p r (p-r) / ((p+r)(4p+r))
    double level_curve_slope; // dr/dp on the F1 level curve: (2r-F1)/(F1-2p)
};

FscoreGeometry fscore_geometry(double precision, double recall, double beta_f);

}  // namespace bat
