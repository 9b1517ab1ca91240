#ifndef STUDYREC_PREDICT_HPP
#define STUDYREC_PREDICT_HPP

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "studyrec/ratings.hpp"
#include "studyrec/similarity.hpp"

namespace studyrec {

/// One cell of the model grid: which similarity metric, how many neighbors,
/// and how the two predictors are blended (r = alpha * user + (1 - alpha) *
/// item; alpha = 1 is pure user-based, alpha = 0 pure item-based).
struct HybridConfig {
    SimilarityMetric metric = SimilarityMetric::Pearson;
    std::size_t n_neighbors = 3;
    double alpha = 0.25;

    void validate() const;
    bool operator==(const HybridConfig&) const = default;
};

enum class RecommendationSource { UserBased, ItemBased, Hybrid, Fallback };

std::string to_string(RecommendationSource source);

struct Recommendation {
    std::string item_id;
    std::size_t item_index = 0;  // column in the train matrix
    double predicted_rating = 0.0;
    RecommendationSource source = RecommendationSource::Fallback;
};

/// Sorted by predicted rating descending, ties by ascending item index.
using RecommendationList = std::vector<Recommendation>;

/// Applies the canonical list order above.
void sort_recommendations(RecommendationList& list);

/// A (possibly new) user's ratings indexed over the train matrix's items.
using UserVector = std::vector<Cell>;

/// Raw per-item output of both predictors for one test user. fallback flags
/// mark items where no neighbor contributed and the value is the cascade
/// stand-in (item train mean, else global train mean).
struct ComponentPredictions {
    std::vector<std::size_t> item_indices;
    std::vector<std::string> item_ids;
    std::vector<double> user_based;
    std::vector<double> item_based;
    std::vector<bool> user_fallback;
    std::vector<bool> item_fallback;
};

/// Runs both predictors once. The test user's cells on test_items are masked
/// before any similarity computation; users with no remaining ratings go
/// straight to the fallback cascade.
ComponentPredictions predict_components(const UserVector& test_user,
                                        const RatingsMatrix& train,
                                        std::span<const std::size_t> test_items,
                                        SimilarityMetric metric,
                                        std::size_t n_neighbors,
                                        std::size_t min_overlap = kDefaultMinOverlap);

/// Blends one item's component predictions. Both genuine: the weighted
/// average, tagged Hybrid. Exactly one genuine: that component alone, unless
/// its weight is zero (then the weighted side's cascade value), tagged
/// Fallback. Both fallback: the shared cascade value, tagged Fallback.
std::pair<double, RecommendationSource> blend_components(double user_pred,
                                                         bool user_fallback,
                                                         double item_pred,
                                                         bool item_fallback,
                                                         double alpha);

/// Predicts each test item as the unweighted mean of the most similar
/// users' present ratings on it.
RecommendationList predict_user_based(const UserVector& test_user,
                                      const RatingsMatrix& train,
                                      std::span<const std::size_t> test_items,
                                      SimilarityMetric metric,
                                      std::size_t n_neighbors,
                                      std::size_t min_overlap = kDefaultMinOverlap);

/// Predicts each test item as the unweighted mean of the test user's own
/// ratings on the most similar items, handled one test item at a time.
RecommendationList predict_item_based(const UserVector& test_user,
                                      const RatingsMatrix& train,
                                      std::span<const std::size_t> test_items,
                                      SimilarityMetric metric,
                                      std::size_t n_neighbors,
                                      std::size_t min_overlap = kDefaultMinOverlap);

/// Weighted blend of the two predictors under one metric and neighbor count.
RecommendationList predict_hybrid(const UserVector& test_user,
                                  const RatingsMatrix& train,
                                  std::span<const std::size_t> test_items,
                                  const HybridConfig& config,
                                  std::size_t min_overlap = kDefaultMinOverlap);

/// Builds a new user's rating vector from questionnaire answers keyed by
/// item id. Items without an answer (or answered with a sentinel) stay
/// missing. Throws on ids outside item_ids, duplicates, unknown answers.
UserVector cold_start_profile(
    const std::vector<std::pair<std::string, std::string>>& responses,
    const LabelMapping& mapping, std::span<const std::string> item_ids);

}  // namespace studyrec

#endif
