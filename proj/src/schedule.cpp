#include "bat/schedule.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bat {

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational solve_beta(const Rational& alpha) {
    if (alpha.value() <= 0.0) throw std::invalid_argument("solve_beta: alpha must be > 0");
    return {2 * alpha.num - alpha.den, 2 * alpha.den};
}

double solve_beta(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("solve_beta: alpha must be > 0");
    return alpha - 0.5;
}

ScheduleSpec ScheduleSpec::with_alpha(const Rational& alpha, int d_model, long warmup,
                                      double lambda) {
    ScheduleSpec s;
    s.d_model = d_model;
    s.warmup = warmup;
    s.alpha = alpha.value();
    s.beta = solve_beta(alpha).value();
    s.lambda = lambda;
    s.alpha_rational = alpha;
    return s;
}

double base_lrate(long step, int d_model, long warmup) {
    if (step < 1) throw std::domain_error("base_lrate: step must be >= 1");
    const double x = static_cast<double>(step);
    const double s = static_cast<double>(warmup);
    return std::pow(d_model, -0.5) * std::min(std::pow(x, -0.5), x * std::pow(s, -1.5));
}

double adjusted_lrate(const ScheduleSpec& spec, long step) {
    if (step < 1) throw std::domain_error("adjusted_lrate: step must be >= 1");
    const double x = static_cast<double>(step);
    const double s = static_cast<double>(spec.warmup);
    const double decay = std::pow(s, spec.beta) * std::pow(x, -spec.alpha);
    const double warm = std::pow(s, -1.5) * x;
    return spec.lambda * std::pow(spec.d_model, -0.5) * std::min(decay, warm);
}

ScheduleSpec named_variant(const std::string& name) {
    std::string base = name;
    double mult = 1.0;
    const auto sep = name.find_first_of("*x", 1);
    if (sep != std::string::npos && name != "v3-paper") {
        base = name.substr(0, sep);
        try {
            mult = std::stod(name.substr(sep + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("named_variant: bad multiplier in \"" + name + "\"");
        }
    }
    if (base == "v1") {
        ScheduleSpec s;
        s.lambda = mult;
        return s;
    }
    if (base == "v2") return ScheduleSpec::with_alpha({6, 11}, 128, 4000, mult);
    if (base == "v3") return ScheduleSpec::with_alpha({6, 13}, 128, 4000, mult);
    if (base == "v4") return ScheduleSpec::with_alpha({7, 15}, 128, 4000, mult);
    if (base == "v5") return ScheduleSpec::with_alpha({11, 20}, 128, 4000, mult);
    if (base == "v3-paper") {
        // printed beta -1/22 disagrees with the continuity solve (-1/26)
        auto s = ScheduleSpec::with_alpha({6, 13}, 128, 4000, mult);
        s.beta = -1.0 / 22.0;
        return s;
    }
    throw std::invalid_argument("named_variant: unknown variant \"" + name + "\"");
}

FscoreGeometry fscore_geometry(double p, double r, double beta_f) {
    if (p <= 0.0 || p > 1.0 || r <= 0.0 || r > 1.0)
        throw std::domain_error("fscore_geometry: precision/recall must lie in (0,1]");
    const double b2 = beta_f * beta_f;
    FscoreGeometry g{};
    g.f_beta = (1.0 + b2) * p * r / (b2 * p + r);
    g.f1_minus_f2 = 3.0 * p * r * (p - r) / ((p + r) * (4.0 * p + r));
    const double f1 = 2.0 * p * r / (p + r);
    g.level_curve_slope = (2.0 * r - f1) / (f1 - 2.0 * p);
    return g;
}

}  // namespace bat
