#ifndef STUDYREC_SIMILARITY_HPP
#define STUDYREC_SIMILARITY_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "studyrec/error.hpp"

namespace studyrec {

enum class SimilarityMetric { Pearson, Euclidean, Cosine };

std::string to_string(SimilarityMetric metric);
SimilarityMetric metric_from_string(const std::string& name);

/// Correlation needs at least two co-rated positions to be defined.
inline constexpr std::size_t kDefaultMinOverlap = 2;

/// Pearson correlation over positions present in both vectors. Absent when
/// the overlap is below min_overlap or either side has zero variance on the
/// overlap. Result clamped to [-1, 1].
std::optional<double> pearson(std::span<const std::optional<double>> x,
                              std::span<const std::optional<double>> y,
                              std::size_t min_overlap = kDefaultMinOverlap);

/// Dense convenience overload; every position counts as present.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::size_t min_overlap = kDefaultMinOverlap);

/// Plain Euclidean distance between dense vectors of equal length.
double euclidean(std::span<const double> x, std::span<const double> y);

/// Cosine distance 1 - cos(x, y), clamped to [0, 2]. Absent when either
/// vector has zero norm.
std::optional<double> cosine(std::span<const double> x, std::span<const double> y);

/// Entity-major grid of rating vectors the similarity search runs over.
/// Entities are users when comparing users, items when comparing items.
struct SimilarityFrame {
    std::vector<std::string> ids;
    std::size_t dim = 0;
    std::vector<std::optional<double>> values;  // ids.size() x dim

    std::size_t size() const { return ids.size(); }
    std::span<const std::optional<double>> entity(std::size_t i) const {
        return {values.data() + i * dim, dim};
    }
    std::span<std::optional<double>> entity_mut(std::size_t i) {
        return {values.data() + i * dim, dim};
    }
};

struct Neighbor {
    std::size_t index = 0;  // position in the frame
    std::string id;
    double score = 0.0;  // correlation or distance, per the metric below
};

struct NeighborSet {
    SimilarityMetric metric = SimilarityMetric::Pearson;
    std::vector<Neighbor> entries;  // best first
};

/// Ranks the entities most similar to the query entity (itself excluded) and
/// returns up to n of them. Correlation ranks descending, distances
/// ascending; ties go to the lower entity index. Entities whose score
/// against the query is undefined (too little overlap, zero variance, zero
/// norm) are skipped. For the distance metrics the frame is first densified
/// with per-entity mean imputation (global frame mean for entities with no
/// ratings at all). Throws NoRankableCandidates when no entity gets a
/// defined score.
NeighborSet compute_similarities(const SimilarityFrame& frame, std::size_t query,
                                 SimilarityMetric metric, std::size_t n,
                                 std::size_t min_overlap = kDefaultMinOverlap);

}  // namespace studyrec

#endif
