#include "perpsieve/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "perpsieve/error.hpp"
#include "perpsieve/rng.hpp"

namespace perpsieve {

double Rng::normal() {
    // Open interval keeps the quantile finite.
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return stats::normal_quantile(u);
}

namespace stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {
void central_moments(std::span<const double> xs, double& m2, double& m3, double& m4) {
    const double m = mean(xs);
    m2 = m3 = m4 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(xs.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
}
}  // namespace

double skewness(std::span<const double> xs) {
    if (xs.size() < 3) return 0.0;
    double m2, m3, m4;
    central_moments(xs, m2, m3, m4);
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

double kurtosis(std::span<const double> xs) {
    if (xs.size() < 4) return 3.0;
    double m2, m3, m4;
    central_moments(xs, m2, m3, m4);
    if (m2 <= 0.0) return 3.0;
    return m4 / (m2 * m2);
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) fail(ErrorKind::InvalidArgument, "quantile of empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    return quantile_sorted(xs, q);
}

double normal_cdf(double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::normal_distribution<double>{}, x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::Numerical, "normal quantile outside (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

}  // namespace stats
}  // namespace perpsieve
