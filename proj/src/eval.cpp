#include "studyrec/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "studyrec/rng.hpp"

namespace studyrec {

namespace {

// Salts separating the random streams derived from one run seed.
constexpr std::uint64_t kSplitSalt = 0;
constexpr std::uint64_t kFoldSalt = 1;
constexpr std::uint64_t kHoldoutSaltBase = 1000;

/// Floor of fraction * n with a nudge against the representation error of
/// decimal fractions (0.7 * 10 must give 7, not 6).
std::size_t floor_fraction(double fraction, std::size_t n) {
    return static_cast<std::size_t>(fraction * static_cast<double>(n) + 1e-9);
}

std::string format_double(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, result.ptr);
}

std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
}

std::string describe(const HybridConfig& c) {
    return "metric=" + to_string(c.metric) +
           " n=" + std::to_string(c.n_neighbors) +
           " alpha=" + format_double(c.alpha);
}

struct MeanAcc {
    double sum = 0.0;
    std::size_t count = 0;
    void add(double v) {
        sum += v;
        ++count;
    }
    std::optional<double> mean() const {
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    }
};

/// Relative error of a pool, tolerating pools where every actual is zero.
std::pair<std::optional<double>, std::size_t> pooled_relative_error(
    std::span<const RatingPair> pairs) {
    double sum = 0.0;
    std::size_t included = 0;
    std::size_t excluded = 0;
    for (const RatingPair& p : pairs) {
        if (p.actual > 0.0) {
            sum += std::abs(p.predicted - p.actual) / p.actual;
            ++included;
        } else {
            ++excluded;
        }
    }
    if (included == 0) return {std::nullopt, excluded};
    return {sum / static_cast<double>(included), excluded};
}

/// Pairs plus ranking scores for one (user, epoch) prediction task.
struct UserScore {
    std::vector<RatingPair> pairs;
    PrecisionRecall pr;
};

/// Blends the component predictions at one alpha and scores them against
/// the user's true ratings; only targets the user actually rated count.
/// Returns nothing when the user rated none of the target items.
std::optional<UserScore> score_user(const ComponentPredictions& parts,
                                    double alpha, const RatingsMatrix& users,
                                    std::size_t row, const EvalOptions& options) {
    RecommendationList rated;
    std::unordered_map<std::string, double> actuals;
    UserScore score;
    for (std::size_t i = 0; i < parts.item_indices.size(); ++i) {
        const Cell& actual = users.at(row, parts.item_indices[i]);
        if (!actual) continue;
        const auto [value, source] =
            blend_components(parts.user_based[i], parts.user_fallback[i],
                             parts.item_based[i], parts.item_fallback[i], alpha);
        rated.push_back({parts.item_ids[i], parts.item_indices[i], value, source});
        actuals.emplace(parts.item_ids[i], static_cast<double>(*actual));
        score.pairs.push_back({value, static_cast<double>(*actual)});
    }
    if (rated.empty()) return std::nullopt;
    sort_recommendations(rated);
    score.pr = precision_recall_at_k(rated, actuals, options.k,
                                     options.relevance_threshold);
    return score;
}

bool has_rated_target(const RatingsMatrix& users, std::size_t row,
                      std::span<const std::size_t> test_items) {
    for (const std::size_t t : test_items) {
        if (users.at(row, t)) return true;
    }
    return false;
}

UserVector row_vector(const RatingsMatrix& m, std::size_t row) {
    const auto r = m.row(row);
    return UserVector(r.begin(), r.end());
}

using nlohmann::json;

json split_to_json(const SplitSpec& s) {
    json j;
    j["train_fraction"] = s.train_fraction;
    j["train_count"] = s.train_count ? json(*s.train_count) : json(nullptr);
    j["item_holdout_fraction"] = s.item_holdout_fraction;
    j["holdout_epochs"] = s.holdout_epochs;
    j["cv_folds"] = s.cv_folds;
    j["seed"] = s.seed;
    return j;
}

json grid_to_json(const GridSpec& g) {
    json metrics = json::array();
    for (const auto metric : g.metrics) metrics.push_back(to_string(metric));
    json j;
    j["metrics"] = metrics;
    j["neighbor_counts"] = g.neighbor_counts;
    j["alphas"] = g.alphas;
    return j;
}

json options_to_json(const EvalOptions& o) {
    json j;
    j["k"] = o.k;
    j["relevance_threshold"] = o.relevance_threshold;
    j["min_overlap"] = o.min_overlap;
    return j;
}

json row_to_json(const ConfigScore& row) {
    json j;
    j["metric"] = to_string(row.config.metric);
    j["n_neighbors"] = row.config.n_neighbors;
    j["alpha"] = row.config.alpha;
    j["mae"] = row.mae;
    j["rel_err"] = row.rel_err;
    j["rel_excluded"] = row.rel_excluded;
    j["precision_at_k"] = row.precision ? json(*row.precision) : json(nullptr);
    j["recall_at_k"] = row.recall ? json(*row.recall) : json(nullptr);
    return j;
}

json test_to_json(const TestMetrics& t) {
    json j;
    j["mae"] = t.mae;
    j["rel_err"] = t.rel_err;
    j["rel_excluded"] = t.rel_excluded;
    j["precision_at_k"] = t.precision ? json(*t.precision) : json(nullptr);
    j["recall_at_k"] = t.recall ? json(*t.recall) : json(nullptr);
    j["baseline_mae"] = t.baseline_mae;
    j["n_pairs"] = t.n_pairs;
    return j;
}

}  // namespace

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error("split spec: train_fraction must be within (0, 1)");
    }
    if (!(item_holdout_fraction > 0.0 && item_holdout_fraction < 1.0)) {
        throw Error("split spec: item_holdout_fraction must be within (0, 1)");
    }
    if (cv_folds < 2) throw Error("split spec: cv_folds must be at least 2");
    if (holdout_epochs < 1) throw Error("split spec: holdout_epochs must be at least 1");
    if (train_count && *train_count == 0) {
        throw Error("split spec: train_count must be at least 1");
    }
}

void GridSpec::validate() const {
    if (metrics.empty() || neighbor_counts.empty() || alphas.empty()) {
        throw Error("grid spec: metrics, neighbor_counts and alphas must be non-empty");
    }
    for (const std::size_t n : neighbor_counts) {
        if (n == 0) throw Error("grid spec: neighbor counts must be at least 1");
    }
    for (const double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw Error("grid spec: alphas must be within [0, 1]");
        }
    }
}

double mae(std::span<const RatingPair> pairs) {
    if (pairs.empty()) throw Error("mae: empty pair list");
    double sum = 0.0;
    for (const RatingPair& p : pairs) sum += std::abs(p.predicted - p.actual);
    return sum / static_cast<double>(pairs.size());
}

RelativeError relative_error(std::span<const RatingPair> pairs) {
    const auto [value, excluded] = pooled_relative_error(pairs);
    if (!value) {
        throw Error("relative error: no pair has a positive actual rating");
    }
    return RelativeError{*value, excluded};
}

PrecisionRecall precision_recall_at_k(
    const RecommendationList& recs,
    const std::unordered_map<std::string, double>& actuals, std::size_t k,
    double relevance_threshold) {
    if (k == 0) throw Error("precision: k must be at least 1");
    if (recs.empty()) throw Error("precision: empty recommendation list");

    const std::size_t top = std::min(k, recs.size());
    std::size_t relevant_top = 0;
    std::size_t relevant_total = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto it = actuals.find(recs[i].item_id);
        if (it == actuals.end()) {
            throw Error("precision: no actual rating for item " + recs[i].item_id);
        }
        if (it->second >= relevance_threshold) {
            ++relevant_total;
            if (i < top) ++relevant_top;
        }
    }
    PrecisionRecall pr;
    pr.precision = static_cast<double>(relevant_top) / static_cast<double>(top);
    if (relevant_total > 0) {
        pr.recall = static_cast<double>(relevant_top) /
                    static_cast<double>(relevant_total);
    }
    return pr;
}

std::pair<RatingsMatrix, RatingsMatrix> split_users(const RatingsMatrix& m,
                                                    const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = m.n_users();
    if (n < 2) throw Error("split: need at least two users");
    const std::size_t train_count =
        spec.train_count ? *spec.train_count
                         : floor_fraction(spec.train_fraction, n);
    if (train_count < 1 || train_count >= n) {
        throw Error("split: both sides must be non-empty (train count " +
                    std::to_string(train_count) + " of " + std::to_string(n) + ")");
    }
    const auto perm = shuffled_indices(n, mix_seed(spec.seed, kSplitSalt));
    std::vector<std::size_t> train_rows(perm.begin(), perm.begin() + train_count);
    std::vector<std::size_t> test_rows(perm.begin() + train_count, perm.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {m.select_users(train_rows), m.select_users(test_rows)};
}

HoldoutSplit holdout_items(const RatingsMatrix& m, const SplitSpec& spec,
                           std::size_t epoch) {
    spec.validate();
    if (epoch >= spec.holdout_epochs) {
        throw Error("holdout: epoch out of range");
    }
    const std::size_t n = m.n_items();
    const std::size_t count = floor_fraction(spec.item_holdout_fraction, n);
    if (count == 0) {
        throw Error("holdout: fraction selects zero test items");
    }
    const auto perm =
        shuffled_indices(n, mix_seed(spec.seed, kHoldoutSaltBase + epoch));
    HoldoutSplit split;
    split.test_items.assign(perm.begin(), perm.begin() + count);
    split.known_items.assign(perm.begin() + count, perm.end());
    std::sort(split.test_items.begin(), split.test_items.end());
    std::sort(split.known_items.begin(), split.known_items.end());
    return split;
}

std::vector<std::vector<std::size_t>> cv_fold_assignments(std::size_t n_users,
                                                          std::size_t k,
                                                          std::uint64_t seed) {
    if (k < 2) throw Error("cv: need at least two folds");
    if (k > n_users) throw Error("cv: more folds than users");
    const auto perm = shuffled_indices(n_users, seed);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t begin = f * n_users / k;
        const std::size_t end = (f + 1) * n_users / k;
        folds[f].assign(perm.begin() + begin, perm.begin() + end);
        std::sort(folds[f].begin(), folds[f].end());
    }
    return folds;
}

TestMetrics evaluate_config(const RatingsMatrix& train,
                            const RatingsMatrix& eval_users,
                            const HybridConfig& config, const SplitSpec& split,
                            const EvalOptions& options) {
    split.validate();
    config.validate();
    if (options.k == 0) throw Error("options: k must be at least 1");
    if (train.item_ids() != eval_users.item_ids()) {
        throw Error("evaluate: train and eval matrices must share the same items");
    }

    const double baseline = train.global_mean();
    MeanAcc mae_acc;
    MeanAcc rel_acc;
    MeanAcc baseline_acc;
    MeanAcc precision_acc;
    MeanAcc recall_acc;
    std::size_t rel_excluded = 0;
    std::size_t n_pairs = 0;

    for (std::size_t epoch = 0; epoch < split.holdout_epochs; ++epoch) {
        const HoldoutSplit holdout = holdout_items(train, split, epoch);
        std::vector<RatingPair> pool;
        std::vector<RatingPair> baseline_pool;
        for (std::size_t u = 0; u < eval_users.n_users(); ++u) {
            if (!has_rated_target(eval_users, u, holdout.test_items)) continue;
            const ComponentPredictions parts = predict_components(
                row_vector(eval_users, u), train, holdout.test_items,
                config.metric, config.n_neighbors, options.min_overlap);
            const auto scored =
                score_user(parts, config.alpha, eval_users, u, options);
            if (!scored) continue;
            for (const RatingPair& pair : scored->pairs) {
                pool.push_back(pair);
                baseline_pool.push_back({baseline, pair.actual});
            }
            precision_acc.add(scored->pr.precision);
            if (scored->pr.recall) recall_acc.add(*scored->pr.recall);
        }
        if (pool.empty()) continue;
        mae_acc.add(mae(pool));
        baseline_acc.add(mae(baseline_pool));
        const auto [rel, excluded] = pooled_relative_error(pool);
        if (rel) rel_acc.add(*rel);
        rel_excluded += excluded;
        n_pairs += pool.size();
    }

    const auto mean_mae = mae_acc.mean();
    if (!mean_mae) throw Error("evaluation produced no rating pairs");
    const auto mean_rel = rel_acc.mean();
    if (!mean_rel) {
        throw Error("evaluation: relative error undefined (all actuals zero)");
    }
    TestMetrics metrics;
    metrics.mae = *mean_mae;
    metrics.rel_err = *mean_rel;
    metrics.rel_excluded = rel_excluded;
    metrics.precision = precision_acc.mean();
    metrics.recall = recall_acc.mean();
    metrics.baseline_mae = *baseline_acc.mean();
    metrics.n_pairs = n_pairs;
    return metrics;
}

EvaluationReport grid_search(const RatingsMatrix& m, const SplitSpec& split,
                             const GridSpec& grid, const EvalOptions& options) {
    split.validate();
    grid.validate();
    if (options.k == 0) throw Error("options: k must be at least 1");

    auto [train, test] = split_users(m, split);

    // One holdout draw per epoch, shared by every fold and every config, so
    // all grid cells are scored on identical prediction tasks.
    std::vector<HoldoutSplit> holdouts;
    holdouts.reserve(split.holdout_epochs);
    for (std::size_t epoch = 0; epoch < split.holdout_epochs; ++epoch) {
        holdouts.push_back(holdout_items(train, split, epoch));
    }

    const auto folds = cv_fold_assignments(train.n_users(), split.cv_folds,
                                           mix_seed(split.seed, kFoldSalt));
    std::vector<RatingsMatrix> fold_train;
    fold_train.reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<bool> held(train.n_users(), false);
        for (const std::size_t u : folds[f]) held[u] = true;
        std::vector<std::size_t> rows;
        rows.reserve(train.n_users() - folds[f].size());
        for (std::size_t u = 0; u < train.n_users(); ++u) {
            if (!held[u]) rows.push_back(u);
        }
        fold_train.push_back(train.select_users(rows));
    }

    struct CellAcc {
        MeanAcc mae;
        MeanAcc rel;
        std::size_t rel_excluded = 0;
        MeanAcc precision;
        MeanAcc recall;
    };
    const std::size_t n_alphas = grid.alphas.size();
    std::vector<CellAcc> cells(grid.size());

    for (std::size_t mi = 0; mi < grid.metrics.size(); ++mi) {
        for (std::size_t ni = 0; ni < grid.neighbor_counts.size(); ++ni) {
            const std::size_t cell_base =
                (mi * grid.neighbor_counts.size() + ni) * n_alphas;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                for (std::size_t epoch = 0; epoch < holdouts.size(); ++epoch) {
                    std::vector<std::vector<RatingPair>> pools(n_alphas);
                    for (const std::size_t u : folds[f]) {
                        if (!has_rated_target(train, u, holdouts[epoch].test_items)) {
                            continue;
                        }
                        ComponentPredictions parts;
                        try {
                            parts = predict_components(
                                row_vector(train, u), fold_train[f],
                                holdouts[epoch].test_items, grid.metrics[mi],
                                grid.neighbor_counts[ni], options.min_overlap);
                        } catch (const std::exception& e) {
                            throw Error(
                                "grid cell metric=" + to_string(grid.metrics[mi]) +
                                " n=" + std::to_string(grid.neighbor_counts[ni]) +
                                " (fold " + std::to_string(f) + ", epoch " +
                                std::to_string(epoch) + ", user " +
                                train.user_ids()[u] + "): " + e.what());
                        }
                        for (std::size_t ai = 0; ai < n_alphas; ++ai) {
                            const auto scored = score_user(parts, grid.alphas[ai],
                                                           train, u, options);
                            if (!scored) continue;
                            auto& pool = pools[ai];
                            pool.insert(pool.end(), scored->pairs.begin(),
                                        scored->pairs.end());
                            cells[cell_base + ai].precision.add(scored->pr.precision);
                            if (scored->pr.recall) {
                                cells[cell_base + ai].recall.add(*scored->pr.recall);
                            }
                        }
                    }
                    for (std::size_t ai = 0; ai < n_alphas; ++ai) {
                        if (pools[ai].empty()) continue;
                        CellAcc& acc = cells[cell_base + ai];
                        acc.mae.add(mae(pools[ai]));
                        const auto [rel, excluded] =
                            pooled_relative_error(pools[ai]);
                        if (rel) acc.rel.add(*rel);
                        acc.rel_excluded += excluded;
                    }
                }
            }
        }
    }

    EvaluationReport report;
    report.rows.reserve(grid.size());
    std::size_t idx = 0;
    for (std::size_t mi = 0; mi < grid.metrics.size(); ++mi) {
        for (std::size_t ni = 0; ni < grid.neighbor_counts.size(); ++ni) {
            for (std::size_t ai = 0; ai < n_alphas; ++ai, ++idx) {
                ConfigScore row;
                row.config = HybridConfig{grid.metrics[mi],
                                          grid.neighbor_counts[ni],
                                          grid.alphas[ai]};
                const CellAcc& acc = cells[idx];
                const auto cell_mae = acc.mae.mean();
                if (!cell_mae) {
                    throw Error("grid cell " + describe(row.config) +
                                ": no evaluable rating pairs");
                }
                const auto cell_rel = acc.rel.mean();
                if (!cell_rel) {
                    throw Error("grid cell " + describe(row.config) +
                                ": relative error undefined (all actuals zero)");
                }
                row.mae = *cell_mae;
                row.rel_err = *cell_rel;
                row.rel_excluded = acc.rel_excluded;
                row.precision = acc.precision.mean();
                row.recall = acc.recall.mean();
                report.rows.push_back(row);
            }
        }
    }

    report.best_index = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (report.rows[i].mae < report.rows[report.best_index].mae) {
            report.best_index = i;
        }
    }
    report.test = evaluate_config(train, test, report.rows[report.best_index].config,
                                  split, options);
    report.split = split;
    report.grid = grid;
    report.options = options;
    report.dataset_fingerprint = m.fingerprint();
    report.n_train_users = train.n_users();
    report.n_test_users = test.n_users();
    return report;
}

void write_report_csv(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    out << "metric,n,alpha,mae,rel_err,precision_at_k,recall_at_k\n";
    for (const ConfigScore& row : report.rows) {
        out << to_string(row.config.metric) << ',' << row.config.n_neighbors
            << ',' << format_double(row.config.alpha) << ','
            << format_fixed(row.mae) << ',' << format_fixed(row.rel_err) << ',';
        if (row.precision) out << format_fixed(*row.precision);
        out << ',';
        if (row.recall) out << format_fixed(*row.recall);
        out << '\n';
    }
}

std::string report_json_string(const EvaluationReport& report) {
    const ConfigScore& best = report.rows[report.best_index];
    json j;
    j["dataset"] = {{"fingerprint", report.dataset_fingerprint},
                    {"n_train_users", report.n_train_users},
                    {"n_test_users", report.n_test_users}};
    j["split"] = split_to_json(report.split);
    j["grid"] = grid_to_json(report.grid);
    j["options"] = options_to_json(report.options);
    json rows = json::array();
    for (const ConfigScore& row : report.rows) rows.push_back(row_to_json(row));
    j["rows"] = rows;
    j["best"] = row_to_json(best);
    j["best"]["test"] = test_to_json(report.test);
    return j.dump(2) + "\n";
}

void write_report_json(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    out << report_json_string(report);
}

}  // namespace studyrec
