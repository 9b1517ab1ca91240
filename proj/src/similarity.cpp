#include "studyrec/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "studyrec/ratings.hpp"

namespace studyrec {

namespace {

std::optional<double> pearson_kernel(std::span<const double> xs,
                                     std::span<const double> ys,
                                     std::size_t min_overlap) {
    const std::size_t n = xs.size();
    if (n < min_overlap) return std::nullopt;

    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double cov = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if (var_x == 0.0 || var_y == 0.0) return std::nullopt;

    // One sqrt over the product keeps constant vectors at exactly +-1.
    const double r = cov / std::sqrt(var_x * var_y);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace

std::string to_string(SimilarityMetric metric) {
    switch (metric) {
        case SimilarityMetric::Pearson: return "pearson";
        case SimilarityMetric::Euclidean: return "euclidean";
        case SimilarityMetric::Cosine: return "cosine";
    }
    throw Error("unknown similarity metric");
}

SimilarityMetric metric_from_string(const std::string& name) {
    if (name == "pearson") return SimilarityMetric::Pearson;
    if (name == "euclidean") return SimilarityMetric::Euclidean;
    if (name == "cosine") return SimilarityMetric::Cosine;
    throw Error("unknown similarity metric: " + name);
}

std::optional<double> pearson(std::span<const std::optional<double>> x,
                              std::span<const std::optional<double>> y,
                              std::size_t min_overlap) {
    if (x.size() != y.size()) throw Error("pearson: vector lengths differ");
    if (min_overlap < 2) throw Error("pearson: min_overlap must be at least 2");

    std::vector<double> xs;
    std::vector<double> ys;
    xs.reserve(x.size());
    ys.reserve(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] && y[i]) {
            xs.push_back(*x[i]);
            ys.push_back(*y[i]);
        }
    }
    return pearson_kernel(xs, ys, min_overlap);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::size_t min_overlap) {
    if (x.size() != y.size()) throw Error("pearson: vector lengths differ");
    if (min_overlap < 2) throw Error("pearson: min_overlap must be at least 2");
    return pearson_kernel(x, y, min_overlap);
}

double euclidean(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("euclidean: vector lengths differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::optional<double> cosine(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("cosine: vector lengths differ");
    double dot = 0.0;
    double norm_x = 0.0;
    double norm_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        norm_x += x[i] * x[i];
        norm_y += y[i] * y[i];
    }
    if (norm_x == 0.0 || norm_y == 0.0) return std::nullopt;
    // Same single-sqrt trick as pearson: parallel vectors land on exactly 0.
    const double similarity = dot / std::sqrt(norm_x * norm_y);
    return std::clamp(1.0 - similarity, 0.0, 2.0);
}

NeighborSet compute_similarities(const SimilarityFrame& frame, std::size_t query,
                                 SimilarityMetric metric, std::size_t n,
                                 std::size_t min_overlap) {
    if (frame.values.size() != frame.size() * frame.dim ||
        frame.ids.size() != frame.size()) {
        throw Error("compute_similarities: frame values do not match dimensions");
    }
    if (query >= frame.size()) {
        throw Error("compute_similarities: query entity not in frame");
    }
    if (n == 0) throw Error("compute_similarities: n must be at least 1");

    std::vector<Neighbor> scored;
    if (metric == SimilarityMetric::Pearson) {
        const auto query_row = frame.entity(query);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (i == query) continue;
            if (const auto r = pearson(frame.entity(i), query_row, min_overlap)) {
                scored.push_back({i, frame.ids[i], *r});
            }
        }
    } else {
        // Distance metrics need a total metric space, so every entity gets
        // its missing cells filled with its own mean first.
        bool frame_has_values = false;
        for (const auto& cell : frame.values) {
            if (cell) {
                frame_has_values = true;
                break;
            }
        }
        if (!frame_has_values) {
            throw NoRankableCandidates(
                "compute_similarities: frame has no present ratings");
        }
        const std::vector<double> dense =
            impute_rows<double>(frame.values, frame.size(), frame.dim);
        const std::span<const double> query_row(dense.data() + query * frame.dim,
                                                frame.dim);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (i == query) continue;
            const std::span<const double> entity(dense.data() + i * frame.dim,
                                                 frame.dim);
            if (metric == SimilarityMetric::Euclidean) {
                scored.push_back({i, frame.ids[i], euclidean(entity, query_row)});
            } else if (const auto d = cosine(entity, query_row)) {
                scored.push_back({i, frame.ids[i], *d});
            }
        }
    }

    if (scored.empty()) {
        throw NoRankableCandidates("compute_similarities: no candidate has a defined score");
    }

    const bool ascending = metric != SimilarityMetric::Pearson;
    std::sort(scored.begin(), scored.end(),
              [ascending](const Neighbor& a, const Neighbor& b) {
                  if (a.score != b.score) {
                      return ascending ? a.score < b.score : a.score > b.score;
                  }
                  return a.index < b.index;
              });
    if (scored.size() > n) scored.resize(n);
    return NeighborSet{metric, std::move(scored)};
}

}  // namespace studyrec
