#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace sentifuse {

// Pearson r of two paired samples; nullopt when n < 2 or either side is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct WelchResult {
    double t = std::numeric_limits<double>::quiet_NaN();
    double degrees_of_freedom = std::numeric_limits<double>::quiet_NaN();
    double p_two_sided = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;  // fewer than 2 values or zero variance on a side
};

inline double mean_of(std::span<const double> xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double variance_of(std::span<const double> xs) {
    const double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    WelchResult r;
    if (a.size() < 2 || b.size() < 2) {
        r.degenerate = true;
        return r;
    }
    const double va = variance_of(a) / static_cast<double>(a.size());
    const double vb = variance_of(b) / static_cast<double>(b.size());
    if (va <= 0.0 || vb <= 0.0) {
        r.degenerate = true;
        return r;
    }
    const double se2 = va + vb;
    r.t = (mean_of(a) - mean_of(b)) / std::sqrt(se2);
    r.degrees_of_freedom = se2 * se2 / (va * va / static_cast<double>(a.size() - 1) +
                                        vb * vb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(r.degrees_of_freedom);
    r.p_two_sided = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
    return r;
}

}  // namespace sentifuse
