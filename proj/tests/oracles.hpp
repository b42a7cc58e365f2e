#pragma once

// Independent reference implementations used to pin expected values. These
// deliberately avoid the library's code paths.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "flowdisco/embedding.hpp"

namespace oracle {

// Optimal k-means inertia by exhaustive enumeration of all k^N assignments.
// Only for tiny instances (k^N must stay small).
inline double exhaustive_best_inertia(const flowdisco::EmbeddingMatrix& m, int k,
                                      std::vector<int>* best_assignment = nullptr) {
    const std::size_t n = m.rows(), dim = m.dim();
    std::uint64_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= static_cast<std::uint64_t>(k);

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> assignment(n);
    for (std::uint64_t code = 0; code < combos; ++code) {
        std::uint64_t rest = code;
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = static_cast<int>(rest % k);
            rest /= k;
        }
        std::vector<double> mean(static_cast<std::size_t>(k) * dim, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[assignment[i]];
            for (std::size_t d = 0; d < dim; ++d)
                mean[assignment[i] * dim + d] += m.row(i)[d];
        }
        for (int c = 0; c < k; ++c)
            if (count[c] > 0)
                for (std::size_t d = 0; d < dim; ++d)
                    mean[c * dim + d] /= static_cast<double>(count[c]);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = m.row(i)[d] - mean[assignment[i] * dim + d];
                inertia += diff * diff;
            }
        if (inertia < best) {
            best = inertia;
            if (best_assignment) *best_assignment = assignment;
        }
    }
    return best;
}

// Plain full-pairwise silhouette, straight from the definition.
inline double silhouette_reference(const flowdisco::EmbeddingMatrix& m,
                                   const std::vector<int>& labels) {
    const std::size_t n = m.rows();
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[l];

    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) {
            ++counted; // singleton term is 0
            continue;
        }
        std::vector<double> sum(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < m.dim(); ++d) {
                const double diff = m.row(i)[d] - m.row(j)[d];
                d2 += diff * diff;
            }
            sum[labels[j]] += std::sqrt(d2);
        }
        const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != labels[i] && sizes[c] > 0)
                b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
        if (std::max(a, b) > 0.0) total += (b - a) / std::max(a, b);
        ++counted;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

} // namespace oracle
