#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace skillforge {

namespace detail {

// Linear-interpolation percentile over a sorted sample, q in [0, 1]. Matches
// the usual statistics-package definition: rank h = q * (n - 1).
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
    size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double h = q * static_cast<double>(n - 1);
    double lo = std::floor(h);
    size_t i = static_cast<size_t>(lo);
    if (i + 1 >= n) return sorted[n - 1];
    return sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i]);
}

} // namespace detail

struct Interval {
    double point = 0.0; // percent
    double lo = 0.0;
    double hi = 0.0;
};

struct BootstrapResult {
    Interval a;
    Interval b;
    Interval diff; // a - b, in percentage points
    int iterations = 0;
    std::uint64_t seed = 0;
    double alpha = 0.0;
};

// Paired bootstrap over two aligned 0/1 outcome vectors: every replicate
// draws task indices with replacement and evaluates both systems on the same
// draw. Intervals are percentile intervals; points are the observed rates.
inline BootstrapResult paired_bootstrap(const std::vector<int>& a, const std::vector<int>& b,
                                        int iterations = 1000, std::uint64_t seed = 7,
                                        double alpha = 0.05) {
    if (a.size() != b.size()) fail(errc::length_mismatch, "outcome vectors");
    if (a.empty()) fail(errc::empty_input, "outcome vectors");
    if (iterations < 1) fail(errc::config_invalid, "iterations must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::config_invalid, "alpha must lie in (0, 1)");
    for (size_t i = 0; i < a.size(); ++i)
        if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1))
            fail(errc::invariant_violation, "outcomes must be 0 or 1");

    const std::uint32_t n = static_cast<std::uint32_t>(a.size());
    pcg32 rng(seed, 0);
    std::vector<double> ra, rb, rd;
    ra.reserve(iterations), rb.reserve(iterations), rd.reserve(iterations);
    for (int it = 0; it < iterations; ++it) {
        long long sa = 0, sb = 0;
        for (std::uint32_t k = 0; k < n; ++k) {
            std::uint32_t idx = rng.bounded(n);
            sa += a[idx];
            sb += b[idx];
        }
        double pa = 100.0 * static_cast<double>(sa) / n;
        double pb = 100.0 * static_cast<double>(sb) / n;
        ra.push_back(pa);
        rb.push_back(pb);
        rd.push_back(pa - pb);
    }
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    std::sort(rd.begin(), rd.end());

    auto observed = [n](const std::vector<int>& v) {
        long long s = 0;
        for (int x : v) s += x;
        return 100.0 * static_cast<double>(s) / n;
    };
    auto interval = [&](const std::vector<double>& sorted, double point) {
        Interval iv;
        iv.point = point;
        iv.lo = detail::percentile_sorted(sorted, alpha / 2.0);
        iv.hi = detail::percentile_sorted(sorted, 1.0 - alpha / 2.0);
        return iv;
    };
    BootstrapResult out;
    out.a = interval(ra, observed(a));
    out.b = interval(rb, observed(b));
    out.diff = interval(rd, observed(a) - observed(b));
    out.iterations = iterations;
    out.seed = seed;
    out.alpha = alpha;
    return out;
}

// Exact two-sided McNemar p-value on the discordant counts: doubled binomial
// tail P(X <= min(b, c)) with X ~ Bin(b + c, 1/2), clamped at 1. No
// discordant pairs means the systems are indistinguishable, p = 1.
inline double mcnemar_exact(long long b, long long c) {
    if (b < 0 || c < 0) fail(errc::negative_count, "discordant counts");
    long long m = b + c;
    if (m == 0) return 1.0;
    long long k = std::min(b, c);
    // cumulative C(m, 0..k) / 2^m with multiplicative binomial updates
    long double coeff = 1.0L;
    long double sum = 1.0L;
    for (long long i = 1; i <= k; ++i) {
        coeff = coeff * static_cast<long double>(m - i + 1) / static_cast<long double>(i);
        sum += coeff;
    }
    long double p = 2.0L * sum * std::pow(0.5L, static_cast<long double>(m));
    if (p > 1.0L) p = 1.0L;
    return static_cast<double>(p);
}

struct PairedComparison {
    BootstrapResult bootstrap;
    long long n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    double mcnemar_p = 1.0;
};

inline PairedComparison compare_outcomes(const std::vector<int>& a, const std::vector<int>& b,
                                         int iterations = 1000, std::uint64_t seed = 7,
                                         double alpha = 0.05) {
    PairedComparison out;
    out.bootstrap = paired_bootstrap(a, b, iterations, seed, alpha);
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 1 && b[i] == 1) ++out.n11;
        else if (a[i] == 1 && b[i] == 0) ++out.n10;
        else if (a[i] == 0 && b[i] == 1) ++out.n01;
        else ++out.n00;
    }
    out.mcnemar_p = mcnemar_exact(out.n10, out.n01);
    return out;
}

} // namespace skillforge
