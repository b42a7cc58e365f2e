#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/embedding.hpp"

namespace flowdisco {

// Result of one k-means fit. Immutable after fit; assignments are aligned
// with the rows of the training matrix and are empty on deserialized models.
struct ClusterModel {
    int k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids; // k x dim, row-major
    std::vector<int> assignments;
    double inertia = 0.0;
    Speaker speaker_scope = Speaker::User;
    std::uint64_t seed = 0;
    int iterations_run = 0;
    std::vector<double> inertia_history; // per assignment step, best restart

    std::span<const double> centroid(int c) const {
        return {centroids.data() + static_cast<std::size_t>(c) * dim, dim};
    }
};

struct SilhouetteReport {
    std::map<int, double> per_k;
    int best_k = 0;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline int nearest_centroid(const std::vector<double>& centroids, int k, std::size_t dim,
                            std::span<const double> point) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
        const double d =
            sq_dist({centroids.data() + static_cast<std::size_t>(c) * dim, dim}, point);
        if (d < best_d) { // ties keep the lowest index
            best_d = d;
            best = c;
        }
    }
    return best;
}

// D^2-weighted centroid seeding.
inline std::vector<double> kmeanspp_init(const EmbeddingMatrix& m, int k, std::mt19937_64& rng) {
    const std::size_t n = m.rows(), dim = m.dim();
    std::vector<double> centroids(static_cast<std::size_t>(k) * dim);
    auto set_centroid = [&](int c, std::size_t point) {
        auto row = m.row(point);
        std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::size_t>(c) * dim);
    };

    set_centroid(0, uniform_index(rng, n));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = sq_dist(m.row(i), {centroids.data(), dim});

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t chosen;
        if (total > 0.0) {
            const double r = uniform_real01(rng) * total;
            double cum = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = uniform_index(rng, n); // every point coincides with a centroid
        }
        set_centroid(c, chosen);
        const std::span<const double> nc{centroids.data() + static_cast<std::size_t>(c) * dim, dim};
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(m.row(i), nc));
    }
    return centroids;
}

struct LloydRun {
    std::vector<double> centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;
};

inline double assign_all(const EmbeddingMatrix& m, const std::vector<double>& centroids, int k,
                         std::vector<int>& assignments) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const int c = nearest_centroid(centroids, k, m.dim(), m.row(i));
        assignments[i] = c;
        inertia += sq_dist(m.row(i), {centroids.data() + static_cast<std::size_t>(c) * m.dim(),
                                       m.dim()});
    }
    return inertia;
}

inline void update_centroids(const EmbeddingMatrix& m, const std::vector<int>& assignments, int k,
                             std::vector<double>& centroids, std::vector<std::size_t>& sizes) {
    const std::size_t dim = m.dim();
    sizes.assign(k, 0);
    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const int c = assignments[i];
        ++sizes[c];
        auto row = m.row(i);
        double* dst = sums.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t j = 0; j < dim; ++j) dst[j] += row[j];
    }
    for (int c = 0; c < k; ++c) {
        if (sizes[c] == 0) continue; // repaired separately
        double* dst = centroids.data() + static_cast<std::size_t>(c) * dim;
        const double* src = sums.data() + static_cast<std::size_t>(c) * dim;
        const double inv = 1.0 / static_cast<double>(sizes[c]);
        for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j] * inv;
    }
}

// An emptied cluster is reseeded to the point farthest from its assigned
// centroid (ties to the lowest point index, empties repaired in index order).
inline void repair_empty_clusters(const EmbeddingMatrix& m, const std::vector<int>& assignments,
                                  int k, std::vector<double>& centroids,
                                  const std::vector<std::size_t>& sizes) {
    std::vector<int> empties;
    for (int c = 0; c < k; ++c)
        if (sizes[c] == 0) empties.push_back(c);
    if (empties.empty()) return;

    const std::size_t dim = m.dim();
    std::vector<double> dist(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        dist[i] = sq_dist(
            m.row(i),
            {centroids.data() + static_cast<std::size_t>(assignments[i]) * dim, dim});
    for (int c : empties) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < m.rows(); ++i)
            if (dist[i] > dist[far]) far = i;
        auto row = m.row(far);
        std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::size_t>(c) * dim);
        dist[far] = -1.0; // not available for further repairs this round
    }
}

inline LloydRun lloyd_once(const EmbeddingMatrix& m, int k, int max_iter, std::uint64_t seed) {
    LloydRun run;
    std::mt19937_64 rng(seed);
    run.centroids = kmeanspp_init(m, k, rng);
    run.assignments.assign(m.rows(), -1);

    std::vector<int> prev(m.rows(), -1);
    std::vector<std::size_t> sizes;
    bool aligned = false;
    for (int iter = 1; iter <= max_iter; ++iter) {
        run.inertia = assign_all(m, run.centroids, k, run.assignments);
        run.inertia_history.push_back(run.inertia);
        run.iterations = iter;
        if (run.assignments == prev) {
            aligned = true; // centroids are already the means of this assignment
            break;
        }
        prev = run.assignments;
        update_centroids(m, run.assignments, k, run.centroids, sizes);
        repair_empty_clusters(m, run.assignments, k, run.centroids, sizes);
    }

    if (!aligned) {
        // Stopped on max_iter: realign assignments with the final centroids so
        // that stored assignments equal nearest-centroid assignment.
        for (int round = 0; round <= k; ++round) {
            run.inertia = assign_all(m, run.centroids, k, run.assignments);
            run.inertia_history.push_back(run.inertia);
            sizes.assign(k, 0);
            for (int c : run.assignments) ++sizes[c];
            if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) == sizes.end()) return run;
            repair_empty_clusters(m, run.assignments, k, run.centroids, sizes);
        }
        throw Error("clustering: could not repair empty clusters (fewer distinct points than k?)");
    }
    return run;
}

} // namespace detail

// Lloyd's iterations from k-means++ initialization, n_init restarts with
// seeds derived from `seed`, lowest inertia kept.
inline ClusterModel kmeans(const EmbeddingMatrix& matrix, int k, int max_iter = 1000,
                           std::uint64_t seed = 0, Speaker speaker_scope = Speaker::User,
                           int n_init = 10) {
    if (matrix.rows() == 0) throw Error("clustering: kmeans on a matrix with zero rows");
    if (k < 1) throw Error("clustering: k must be positive");
    if (static_cast<std::size_t>(k) > matrix.rows())
        throw Error("clustering: k=" + std::to_string(k) + " exceeds point count " +
                    std::to_string(matrix.rows()));
    if (max_iter < 1) throw Error("clustering: max_iter must be positive");
    if (n_init < 1) throw Error("clustering: n_init must be positive");
    for (std::size_t i = 0; i < matrix.rows(); ++i)
        for (double x : matrix.row(i))
            if (!std::isfinite(x))
                throw Error("clustering: non-finite value in row " + std::to_string(i));

    std::optional<detail::LloydRun> best;
    for (int r = 0; r < n_init; ++r) {
        detail::LloydRun run = detail::lloyd_once(matrix, k, max_iter, derive_seed(seed, r));
        if (!best || run.inertia < best->inertia) best = std::move(run);
    }

    ClusterModel model;
    model.k = k;
    model.dim = matrix.dim();
    model.centroids = std::move(best->centroids);
    model.assignments = std::move(best->assignments);
    model.inertia = best->inertia;
    model.speaker_scope = speaker_scope;
    model.seed = seed;
    model.iterations_run = best->iterations;
    model.inertia_history = std::move(best->inertia_history);
    return model;
}

// Index of the Euclidean-nearest centroid; ties go to the lowest index.
inline int assign(const ClusterModel& model, std::span<const double> vector) {
    if (vector.size() != model.dim)
        throw Error("clustering: assign dimension mismatch (" + std::to_string(vector.size()) +
                    " vs model dim " + std::to_string(model.dim) + ")");
    return detail::nearest_centroid(model.centroids, model.k, model.dim, vector);
}

inline int assign(const ClusterModel& model, const Vector& vector) {
    return assign(model, std::span<const double>(vector));
}

// Mean silhouette over scored points, Euclidean metric. With sample_cap < N a
// seeded uniform sample of points is scored; distances still run against all
// points. Singleton clusters contribute 0.
inline double silhouette(const EmbeddingMatrix& matrix, const std::vector<int>& assignments,
                         std::optional<std::size_t> sample_cap = std::nullopt,
                         std::uint64_t seed = 0) {
    const std::size_t n = matrix.rows();
    if (assignments.size() != n)
        throw Error("clustering: silhouette assignments/rows mismatch");
    if (n == 0) throw Error("clustering: silhouette on an empty matrix");

    int k = 0;
    for (int a : assignments) {
        if (a < 0) throw Error("clustering: negative cluster index");
        k = std::max(k, a + 1);
    }
    std::vector<std::size_t> sizes(k, 0);
    for (int a : assignments) ++sizes[a];
    int distinct = 0;
    for (std::size_t s : sizes)
        if (s > 0) ++distinct;
    if (distinct < 2) throw Error("clustering: silhouette requires at least 2 clusters");

    std::vector<std::size_t> scored(n);
    for (std::size_t i = 0; i < n; ++i) scored[i] = i;
    if (sample_cap && *sample_cap < n) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < *sample_cap; ++i) {
            const std::size_t j = i + uniform_index(rng, n - i);
            std::swap(scored[i], scored[j]);
        }
        scored.resize(*sample_cap);
    }

    double total = 0.0;
    std::vector<double> cluster_dist(k);
    for (std::size_t idx : scored) {
        const int own = assignments[idx];
        if (sizes[own] == 1) continue; // singleton term is 0
        std::fill(cluster_dist.begin(), cluster_dist.end(), 0.0);
        const auto p = matrix.row(idx);
        for (std::size_t j = 0; j < n; ++j)
            cluster_dist[assignments[j]] += std::sqrt(detail::sq_dist(p, matrix.row(j)));
        const double a = cluster_dist[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own && sizes[c] > 0)
                b = std::min(b, cluster_dist[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return scored.empty() ? 0.0 : total / static_cast<double>(scored.size());
}

// Runs kmeans + silhouette for each k in [k_min, k_max]; best_k is the
// silhouette argmax, ties resolved toward the smaller k.
inline SilhouetteReport select_k(const EmbeddingMatrix& matrix, int k_min, int k_max,
                                 std::uint64_t seed,
                                 std::optional<std::size_t> sample_cap = std::nullopt,
                                 Speaker speaker_scope = Speaker::User, int max_iter = 1000,
                                 int n_init = 10) {
    if (k_min < 2) throw Error("clustering: select_k requires k_min >= 2");
    if (k_min > k_max) throw Error("clustering: select_k requires k_min <= k_max");
    if (static_cast<std::size_t>(k_max) > matrix.rows())
        throw Error("clustering: select_k k_max exceeds point count");

    SilhouetteReport report;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        ClusterModel model = kmeans(matrix, k, max_iter, seed, speaker_scope, n_init);
        const double score =
            silhouette(matrix, model.assignments, sample_cap, derive_seed(seed, k));
        report.per_k[k] = score;
        if (score > best_score) {
            best_score = score;
            report.best_k = k;
        }
    }
    return report;
}

// {k, dim, speaker_scope, seed, centroids}; assignments are recomputable and
// deliberately not serialized.
inline nlohmann::json model_to_json(const ClusterModel& model) {
    nlohmann::json centroids = nlohmann::json::array();
    for (int c = 0; c < model.k; ++c) {
        auto row = model.centroid(c);
        centroids.push_back(Vector(row.begin(), row.end()));
    }
    return {{"k", model.k},
            {"dim", model.dim},
            {"speaker_scope", speaker_name(model.speaker_scope)},
            {"seed", model.seed},
            {"centroids", std::move(centroids)}};
}

inline ClusterModel model_from_json(const nlohmann::json& j) {
    ClusterModel model;
    try {
        model.k = j.at("k").get<int>();
        model.dim = j.at("dim").get<std::size_t>();
        model.seed = j.at("seed").get<std::uint64_t>();
        const std::string scope = j.at("speaker_scope").get<std::string>();
        auto speaker = try_parse_speaker(scope);
        if (!speaker) throw Error("clustering: unknown speaker_scope '" + scope + "'");
        model.speaker_scope = *speaker;
        const auto& centroids = j.at("centroids");
        if (static_cast<int>(centroids.size()) != model.k)
            throw Error("clustering: model declares k=" + std::to_string(model.k) + " but has " +
                        std::to_string(centroids.size()) + " centroids");
        model.centroids.reserve(static_cast<std::size_t>(model.k) * model.dim);
        for (const auto& c : centroids) {
            const auto row = c.get<Vector>();
            if (row.size() != model.dim)
                throw Error("clustering: centroid dim mismatch in model JSON");
            model.centroids.insert(model.centroids.end(), row.begin(), row.end());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("clustering: bad model JSON: ") + e.what());
    }
    return model;
}

inline void save_model(const ClusterModel& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model).dump(2) + "\n");
}

inline ClusterModel load_model(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("clustering: malformed model JSON in " + path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace flowdisco
