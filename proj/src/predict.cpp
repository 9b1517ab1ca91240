#include "studyrec/predict.hpp"

#include <algorithm>
#include <cmath>

namespace studyrec {

namespace {

double clamp_rating(double v) {
    return std::clamp(v, static_cast<double>(kMinRating),
                      static_cast<double>(kMaxRating));
}

/// Inputs every prediction run needs: the test user with target cells
/// hidden, the columns similarity may look at, and the cascade stand-in
/// (item train mean, else global train mean) per target item.
struct PredictSetup {
    UserVector masked;
    std::vector<std::size_t> known_cols;
    std::vector<double> fallback;
    bool cold = false;  // masked user has no ratings left at all
};

PredictSetup prepare(const UserVector& test_user, const RatingsMatrix& train,
                     std::span<const std::size_t> test_items) {
    if (train.n_users() == 0 || train.n_items() == 0) {
        throw Error("predict: train matrix is empty");
    }
    if (test_user.size() != train.n_items()) {
        throw Error("predict: test user length does not match train items");
    }
    std::vector<bool> is_test(train.n_items(), false);
    for (const std::size_t t : test_items) {
        if (t >= train.n_items()) {
            throw Error("predict: test item index out of range");
        }
        if (is_test[t]) throw Error("predict: duplicate test item");
        is_test[t] = true;
    }

    PredictSetup setup;
    setup.masked = test_user;
    for (const std::size_t t : test_items) setup.masked[t] = std::nullopt;
    for (std::size_t c = 0; c < train.n_items(); ++c) {
        if (!is_test[c]) setup.known_cols.push_back(c);
    }
    const double global = train.global_mean();
    setup.fallback.reserve(test_items.size());
    for (const std::size_t t : test_items) {
        const auto mean = train.column_mean(t);
        setup.fallback.push_back(mean ? *mean : global);
    }
    setup.cold = std::none_of(setup.masked.begin(), setup.masked.end(),
                              [](const Cell& c) { return c.has_value(); });
    return setup;
}

struct SideValues {
    std::vector<double> values;
    std::vector<bool> fallback;
};

SideValues cascade_only(const PredictSetup& setup) {
    return SideValues{setup.fallback,
                      std::vector<bool>(setup.fallback.size(), true)};
}

/// Neighbors of the test user among train users, compared over the known
/// columns; each target item predicted as the mean of the neighbors'
/// present ratings on it.
SideValues user_side(const RatingsMatrix& train, const PredictSetup& setup,
                     std::span<const std::size_t> test_items,
                     SimilarityMetric metric, std::size_t n_neighbors,
                     std::size_t min_overlap) {
    SideValues side = cascade_only(setup);
    if (setup.cold) return side;

    const std::size_t n_train = train.n_users();
    const std::size_t dim = setup.known_cols.size();
    SimilarityFrame frame;
    frame.dim = dim;
    frame.ids = train.user_ids();
    frame.ids.emplace_back("(test user)");
    frame.values.resize((n_train + 1) * dim);
    for (std::size_t u = 0; u < n_train; ++u) {
        auto row = frame.entity_mut(u);
        for (std::size_t j = 0; j < dim; ++j) {
            if (const Cell& cell = train.at(u, setup.known_cols[j])) {
                row[j] = static_cast<double>(*cell);
            }
        }
    }
    auto query = frame.entity_mut(n_train);
    for (std::size_t j = 0; j < dim; ++j) {
        if (const Cell& cell = setup.masked[setup.known_cols[j]]) {
            query[j] = static_cast<double>(*cell);
        }
    }

    NeighborSet neighbors;
    try {
        neighbors = compute_similarities(frame, n_train, metric, n_neighbors,
                                         min_overlap);
    } catch (const NoRankableCandidates&) {
        return side;  // every target item keeps its cascade value
    }
    for (std::size_t k = 0; k < test_items.size(); ++k) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const Neighbor& nb : neighbors.entries) {
            if (const Cell& cell = train.at(nb.index, test_items[k])) {
                sum += static_cast<double>(*cell);
                ++count;
            }
        }
        if (count > 0) {
            side.values[k] = clamp_rating(sum / static_cast<double>(count));
            side.fallback[k] = false;
        }
    }
    return side;
}

/// One target item at a time: neighbors of the item's column among the known
/// columns (each column carries the train users plus the test user's own
/// rating, with the target cell hidden), predicted as the mean of the test
/// user's ratings on the neighbor items.
SideValues item_side(const RatingsMatrix& train, const PredictSetup& setup,
                     std::span<const std::size_t> test_items,
                     SimilarityMetric metric, std::size_t n_neighbors,
                     std::size_t min_overlap) {
    SideValues side = cascade_only(setup);
    if (setup.cold) return side;

    const std::size_t n_train = train.n_users();
    const std::size_t n_known = setup.known_cols.size();
    if (n_known == 0) return side;

    SimilarityFrame frame;
    frame.dim = n_train + 1;
    frame.values.resize((n_known + 1) * frame.dim);
    frame.ids.reserve(n_known + 1);
    for (std::size_t j = 0; j < n_known; ++j) {
        frame.ids.push_back(train.item_ids()[setup.known_cols[j]]);
        auto col = frame.entity_mut(j);
        for (std::size_t u = 0; u < n_train; ++u) {
            if (const Cell& cell = train.at(u, setup.known_cols[j])) {
                col[u] = static_cast<double>(*cell);
            }
        }
        if (const Cell& cell = setup.masked[setup.known_cols[j]]) {
            col[n_train] = static_cast<double>(*cell);
        }
    }
    frame.ids.emplace_back();  // slot for the current target item

    for (std::size_t k = 0; k < test_items.size(); ++k) {
        const std::size_t t = test_items[k];
        frame.ids[n_known] = train.item_ids()[t];
        auto slot = frame.entity_mut(n_known);
        for (std::size_t u = 0; u < n_train; ++u) {
            const Cell& cell = train.at(u, t);
            slot[u] = cell ? std::optional<double>(static_cast<double>(*cell))
                           : std::nullopt;
        }
        slot[n_train] = std::nullopt;  // the target cell stays hidden

        NeighborSet neighbors;
        try {
            neighbors = compute_similarities(frame, n_known, metric, n_neighbors,
                                             min_overlap);
        } catch (const NoRankableCandidates&) {
            continue;
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (const Neighbor& nb : neighbors.entries) {
            if (const Cell& cell = setup.masked[setup.known_cols[nb.index]]) {
                sum += static_cast<double>(*cell);
                ++count;
            }
        }
        if (count > 0) {
            side.values[k] = clamp_rating(sum / static_cast<double>(count));
            side.fallback[k] = false;
        }
    }
    return side;
}

RecommendationList to_list(const RatingsMatrix& train,
                           std::span<const std::size_t> test_items,
                           const SideValues& side,
                           RecommendationSource genuine_source) {
    RecommendationList list;
    list.reserve(test_items.size());
    for (std::size_t k = 0; k < test_items.size(); ++k) {
        const std::size_t t = test_items[k];
        list.push_back({train.item_ids()[t], t, side.values[k],
                        side.fallback[k] ? RecommendationSource::Fallback
                                         : genuine_source});
    }
    sort_recommendations(list);
    return list;
}

}  // namespace

void sort_recommendations(RecommendationList& list) {
    std::sort(list.begin(), list.end(),
              [](const Recommendation& a, const Recommendation& b) {
                  if (a.predicted_rating != b.predicted_rating) {
                      return a.predicted_rating > b.predicted_rating;
                  }
                  return a.item_index < b.item_index;
              });
}

void HybridConfig::validate() const {
    if (n_neighbors == 0) throw Error("config: n_neighbors must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error("config: alpha must be within [0, 1]");
    }
}

std::string to_string(RecommendationSource source) {
    switch (source) {
        case RecommendationSource::UserBased: return "user-based";
        case RecommendationSource::ItemBased: return "item-based";
        case RecommendationSource::Hybrid: return "hybrid";
        case RecommendationSource::Fallback: return "fallback";
    }
    throw Error("unknown recommendation source");
}

ComponentPredictions predict_components(const UserVector& test_user,
                                        const RatingsMatrix& train,
                                        std::span<const std::size_t> test_items,
                                        SimilarityMetric metric,
                                        std::size_t n_neighbors,
                                        std::size_t min_overlap) {
    if (n_neighbors == 0) throw Error("predict: n_neighbors must be at least 1");
    const PredictSetup setup = prepare(test_user, train, test_items);
    SideValues user =
        user_side(train, setup, test_items, metric, n_neighbors, min_overlap);
    SideValues item =
        item_side(train, setup, test_items, metric, n_neighbors, min_overlap);

    ComponentPredictions out;
    out.item_indices.assign(test_items.begin(), test_items.end());
    out.item_ids.reserve(test_items.size());
    for (const std::size_t t : test_items) out.item_ids.push_back(train.item_ids()[t]);
    out.user_based = std::move(user.values);
    out.user_fallback = std::move(user.fallback);
    out.item_based = std::move(item.values);
    out.item_fallback = std::move(item.fallback);
    return out;
}

std::pair<double, RecommendationSource> blend_components(double user_pred,
                                                         bool user_fallback,
                                                         double item_pred,
                                                         bool item_fallback,
                                                         double alpha) {
    if (!user_fallback && !item_fallback) {
        const double blended = alpha * user_pred + (1.0 - alpha) * item_pred;
        return {clamp_rating(blended), RecommendationSource::Hybrid};
    }
    if (user_fallback && item_fallback) {
        // Both cascades produce the same stand-in value.
        return {user_pred, RecommendationSource::Fallback};
    }
    // Exactly one side is genuine: use it alone, except when its weight is
    // zero, where the pure endpoint semantics must win.
    if (user_fallback) {
        const bool item_weighted = 1.0 - alpha > 0.0;
        return {item_weighted ? item_pred : user_pred,
                RecommendationSource::Fallback};
    }
    const bool user_weighted = alpha > 0.0;
    return {user_weighted ? user_pred : item_pred, RecommendationSource::Fallback};
}

RecommendationList predict_user_based(const UserVector& test_user,
                                      const RatingsMatrix& train,
                                      std::span<const std::size_t> test_items,
                                      SimilarityMetric metric,
                                      std::size_t n_neighbors,
                                      std::size_t min_overlap) {
    if (n_neighbors == 0) throw Error("predict: n_neighbors must be at least 1");
    const PredictSetup setup = prepare(test_user, train, test_items);
    const SideValues side =
        user_side(train, setup, test_items, metric, n_neighbors, min_overlap);
    return to_list(train, test_items, side, RecommendationSource::UserBased);
}

RecommendationList predict_item_based(const UserVector& test_user,
                                      const RatingsMatrix& train,
                                      std::span<const std::size_t> test_items,
                                      SimilarityMetric metric,
                                      std::size_t n_neighbors,
                                      std::size_t min_overlap) {
    if (n_neighbors == 0) throw Error("predict: n_neighbors must be at least 1");
    const PredictSetup setup = prepare(test_user, train, test_items);
    const SideValues side =
        item_side(train, setup, test_items, metric, n_neighbors, min_overlap);
    return to_list(train, test_items, side, RecommendationSource::ItemBased);
}

RecommendationList predict_hybrid(const UserVector& test_user,
                                  const RatingsMatrix& train,
                                  std::span<const std::size_t> test_items,
                                  const HybridConfig& config,
                                  std::size_t min_overlap) {
    config.validate();
    const ComponentPredictions parts =
        predict_components(test_user, train, test_items, config.metric,
                           config.n_neighbors, min_overlap);
    RecommendationList list;
    list.reserve(test_items.size());
    for (std::size_t k = 0; k < parts.item_indices.size(); ++k) {
        const auto [value, source] = blend_components(
            parts.user_based[k], parts.user_fallback[k], parts.item_based[k],
            parts.item_fallback[k], config.alpha);
        list.push_back({parts.item_ids[k], parts.item_indices[k], value, source});
    }
    sort_recommendations(list);
    return list;
}

UserVector cold_start_profile(
    const std::vector<std::pair<std::string, std::string>>& responses,
    const LabelMapping& mapping, std::span<const std::string> item_ids) {
    UserVector profile(item_ids.size());
    std::vector<bool> answered(item_ids.size(), false);
    for (const auto& [item_id, answer] : responses) {
        const auto it = std::find(item_ids.begin(), item_ids.end(), item_id);
        if (it == item_ids.end()) {
            throw Error("profile answers an unknown item: " + item_id);
        }
        const std::size_t index =
            static_cast<std::size_t>(it - item_ids.begin());
        if (answered[index]) {
            throw Error("profile answers item " + item_id + " twice");
        }
        answered[index] = true;
        const auto mapped = mapping.map_cell(answer);
        if (!mapped) {
            throw Error("unrecognized answer \"" + answer + "\" for item " +
                        item_id);
        }
        profile[index] = *mapped;
    }
    return profile;
}

}  // namespace studyrec
