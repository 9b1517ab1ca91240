#ifndef STUDYREC_SYNTH_HPP
#define STUDYREC_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "studyrec/ratings.hpp"

namespace studyrec {

/// Generator spec for a rating matrix with planted block structure: users
/// fall into clusters, items into groups, and a cluster rates a group around
/// affinity[cluster][group]; cells get gaussian noise, Likert rounding and
/// random missingness on top.
struct SynthSpec {
    std::size_t n_users = 100;
    std::size_t n_items = 20;
    std::size_t user_clusters = 2;
    std::size_t item_groups = 2;
    std::vector<double> affinity;  // row-major user_clusters x item_groups, in [0,5]
    double noise_sd = 0.5;
    double missing_rate = 0.2;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthResult {
    RatingsMatrix ratings;
    std::vector<double> ground_truth;  // noise-free affinity per cell, users x items
    std::vector<std::size_t> user_cluster;
    std::vector<std::size_t> item_group;
};

/// Deterministic generation: same spec and seed give the identical matrix.
/// Cluster/group membership is balanced (round-robin over a seeded shuffle);
/// each cell is clamp(round(affinity + noise), 0, 5), then masked missing
/// with probability missing_rate.
SynthResult generate(const SynthSpec& spec);

/// Catalog matching the generated item ids (alternating tool/strategy), so
/// generated CSVs can be re-ingested.
ItemCatalog synthetic_catalog(const std::vector<std::string>& item_ids);

/// Ground truth sidecar: same layout as the ratings CSV with dense real
/// values.
void save_truth_csv(const SynthResult& result, const std::string& path);

}  // namespace studyrec

#endif
