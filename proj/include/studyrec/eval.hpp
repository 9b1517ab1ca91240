#ifndef STUDYREC_EVAL_HPP
#define STUDYREC_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "studyrec/predict.hpp"
#include "studyrec/ratings.hpp"

namespace studyrec {

/// Experiment protocol knobs: how users are split, how target items are
/// held out per epoch, and how the training side is cross-validated.
struct SplitSpec {
    double train_fraction = 0.75;
    /// Exact train-side size override; wins over train_fraction when set.
    std::optional<std::size_t> train_count;
    double item_holdout_fraction = 0.20;
    std::size_t holdout_epochs = 5;
    std::size_t cv_folds = 10;
    std::uint64_t seed = 42;

    void validate() const;
};

/// The model grid the search sweeps.
struct GridSpec {
    std::vector<SimilarityMetric> metrics = {SimilarityMetric::Pearson,
                                             SimilarityMetric::Euclidean,
                                             SimilarityMetric::Cosine};
    std::vector<std::size_t> neighbor_counts = {3, 5, 7, 11};
    std::vector<double> alphas = {0.0,       1.0 / 8.0, 1.0 / 7.0, 1.0 / 6.0,
                                  1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0,
                                  2.0 / 3.0, 1.0};

    void validate() const;
    std::size_t size() const {
        return metrics.size() * neighbor_counts.size() * alphas.size();
    }
};

struct EvalOptions {
    std::size_t k = 5;               // ranking cutoff for precision/recall
    double relevance_threshold = 3.0;  // actual >= threshold counts as relevant
    std::size_t min_overlap = kDefaultMinOverlap;
};

struct RatingPair {
    double predicted = 0.0;
    double actual = 0.0;
};

/// Mean absolute error over the pairs; throws on an empty list.
double mae(std::span<const RatingPair> pairs);

struct RelativeError {
    double value = 0.0;
    std::size_t excluded = 0;  // pairs with actual == 0, left out of the mean
};

/// Mean of |predicted - actual| / actual over pairs with actual > 0. Pairs
/// with a zero actual cannot be scored this way and are excluded (count
/// reported). Throws when every pair is excluded.
RelativeError relative_error(std::span<const RatingPair> pairs);

struct PrecisionRecall {
    double precision = 0.0;
    std::optional<double> recall;  // absent when the user has no relevant item
};

/// Scores a sorted recommendation list against true ratings. precision =
/// relevant-in-top-k / min(k, list size); recall = relevant-in-top-k / all
/// relevant, absent when nothing is relevant. Every recommended item must
/// have an actual rating; the list must be non-empty.
PrecisionRecall precision_recall_at_k(
    const RecommendationList& recs,
    const std::unordered_map<std::string, double>& actuals, std::size_t k,
    double relevance_threshold);

/// Seeded user partition into (train, test). Sizes follow floor rounding of
/// train_fraction unless train_count overrides them. Within each side the
/// original row order is kept.
std::pair<RatingsMatrix, RatingsMatrix> split_users(const RatingsMatrix& m,
                                                    const SplitSpec& spec);

struct HoldoutSplit {
    std::vector<std::size_t> known_items;  // profile the predictors may see
    std::vector<std::size_t> test_items;   // hidden prediction targets
};

/// Seeded per-epoch item holdout: floor(item_holdout_fraction * n_items)
/// target items, the rest known. Same seed + epoch always draws the same
/// items, so every config is scored on identical tasks.
HoldoutSplit holdout_items(const RatingsMatrix& m, const SplitSpec& spec,
                           std::size_t epoch);

/// Partition of 0..n_users-1 into k seeded folds with sizes differing by at
/// most one; each fold sorted ascending.
std::vector<std::vector<std::size_t>> cv_fold_assignments(std::size_t n_users,
                                                          std::size_t k,
                                                          std::uint64_t seed);

/// One grid row: a config and its cross-validation scores.
struct ConfigScore {
    HybridConfig config;
    double mae = 0.0;
    double rel_err = 0.0;
    std::size_t rel_excluded = 0;
    std::optional<double> precision;
    std::optional<double> recall;
};

/// Scores of one config on a held-out user set, plus the constant
/// global-train-mean baseline on the same prediction tasks.
struct TestMetrics {
    double mae = 0.0;
    double rel_err = 0.0;
    std::size_t rel_excluded = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    double baseline_mae = 0.0;
    std::size_t n_pairs = 0;
};

struct EvaluationReport {
    std::vector<ConfigScore> rows;  // deterministic grid order
    std::size_t best_index = 0;     // argmin CV MAE, first on ties
    TestMetrics test;               // the best config re-run on the test users
    SplitSpec split;
    GridSpec grid;
    EvalOptions options;
    std::string dataset_fingerprint;
    std::size_t n_train_users = 0;
    std::size_t n_test_users = 0;
};

/// Runs one config against eval_users (typically the held-out test side):
/// for every epoch, target items are hidden, rated targets predicted, and
/// the pairs pooled per epoch; reported MAE / relative error are the
/// unweighted means over epochs, precision/recall the means over scoreable
/// (user, epoch) tasks.
TestMetrics evaluate_config(const RatingsMatrix& train,
                            const RatingsMatrix& eval_users,
                            const HybridConfig& config, const SplitSpec& split,
                            const EvalOptions& options = {});

/// The full experiment: split users, cross-validate every grid cell on the
/// training side (per-fold-epoch MAE, then unweighted mean), pick the
/// minimum-MAE config, and re-evaluate it on the test side. Any cell that
/// cannot be scored aborts the run naming the cell.
EvaluationReport grid_search(const RatingsMatrix& m, const SplitSpec& split,
                             const GridSpec& grid,
                             const EvalOptions& options = {});

/// One row per grid cell: metric,n,alpha,mae,rel_err,precision_at_k,recall_at_k.
void write_report_csv(const EvaluationReport& report, const std::string& path);

/// Full report (rows, best block, test metrics, run metadata) as JSON.
std::string report_json_string(const EvaluationReport& report);
void write_report_json(const EvaluationReport& report, const std::string& path);

}  // namespace studyrec

#endif
