#pragma once

// Hand-rolled generators for property tests.

#include "bsde/modulus.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace bsde::test {

/// Random nondecreasing concave piecewise-linear modulus with positive slopes.
inline Modulus random_concave_modulus(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> count(2, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count(rng);
    std::vector<double> u{0.0}, v{0.0};
    double slope = 0.2 + 3.0 * unit(rng);
    for (int i = 0; i < n; ++i) {
        const double gap = 0.02 + unit(rng);
        u.push_back(u.back() + gap);
        v.push_back(v.back() + gap * slope);
        slope *= 0.1 + 0.9 * unit(rng);
    }
    return Modulus::tabulated(u, v);
}

/// Random point cloud (u ascending from (0, 0), v >= 0).
inline void random_samples(std::mt19937_64& rng, std::vector<double>& u, std::vector<double>& v)
{
    std::uniform_int_distribution<int> count(2, 30);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count(rng);
    u.assign(1, 0.0);
    v.assign(1, 0.0);
    for (int i = 0; i < n; ++i) {
        u.push_back(u.back() + 0.01 + unit(rng));
        v.push_back(3.0 * unit(rng));
    }
}

/// E|X||Y| for a centered Gaussian pair with standard deviations sx, sy and correlation r.
inline double abs_product_moment(double sx, double sy, double r)
{
    return 2.0 * sx * sy / M_PI * (std::sqrt(1.0 - r * r) + r * std::asin(r));
}

}  // namespace bsde::test
