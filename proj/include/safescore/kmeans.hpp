#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/rng.hpp"

namespace safescore {

struct KMeansResult {
    std::vector<std::vector<double>> centers;
    std::vector<int> assignment;
    std::vector<double> wcss_trace;  // within-cluster sum of squares after each update
    int iterations = 0;

    double wcss() const { return wcss_trace.empty() ? 0.0 : wcss_trace.back(); }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Lloyd iterations from a seeded k-means++ start.  Ties in assignment go to
// the lower cluster index; a cluster that loses all points keeps its center.
// The WCSS trace is non-increasing by construction.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                           std::uint64_t seed, int max_iterations = 300) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (points.size() < static_cast<std::size_t>(k))
        throw DataError("need at least k points to form k clusters");
    const std::size_t n = points.size();
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw DataError("points have mixed dimensionality");

    Rng rng(seed);
    KMeansResult res;
    res.centers.reserve(static_cast<std::size_t>(k));
    res.centers.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    while (res.centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : res.centers) best = std::min(best, detail::sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        res.centers.push_back(points[pick]);
    }

    res.assignment.assign(n, 0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = iter == 0;
        double wcss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = detail::sq_dist(points[i], res.centers[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (res.assignment[i] != best) {
                res.assignment[i] = best;
                changed = true;
            }
            wcss += best_d;
        }
        res.wcss_trace.push_back(wcss);
        res.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.assignment[i]);
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
        }
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d)
                res.centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    return res;
}

}  // namespace safescore
