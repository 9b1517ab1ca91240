#ifndef STUDYREC_RATINGS_HPP
#define STUDYREC_RATINGS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "studyrec/error.hpp"

namespace studyrec {

/// Likert scale bounds shared by the whole pipeline.
inline constexpr int kMinRating = 0;
inline constexpr int kMaxRating = 5;

inline bool is_valid_rating(int value) {
    return value >= kMinRating && value <= kMaxRating;
}

/// One matrix cell. Absent = the respondent skipped the item or answered
/// with one of the "don't know" sentinels.
using Cell = std::optional<int>;

enum class ItemKind { Tool, Strategy };

std::string to_string(ItemKind kind);

struct CatalogEntry {
    std::string item_id;
    ItemKind kind;
    std::string label;
};

/// The recommendable tools/strategies, plus the ids of difficulty questions
/// that are recognized on ingestion but never recommended.
class ItemCatalog {
public:
    ItemCatalog(std::vector<CatalogEntry> entries,
                std::vector<std::string> difficulty_ids = {});

    /// Reads a catalog CSV with header `item_id,kind,label` where kind is one
    /// of tool / strategy / difficulty.
    static ItemCatalog load_csv(const std::string& path);
    void save_csv(const std::string& path) const;

    const std::vector<CatalogEntry>& entries() const { return entries_; }
    const std::vector<std::string>& difficulty_ids() const { return difficulty_ids_; }

    bool has_item(const std::string& item_id) const;
    bool is_difficulty(const std::string& id) const;
    const CatalogEntry* find(const std::string& item_id) const;

    /// Catalog restricted to the given items (e.g. the columns that survived
    /// filtering), in the given order.
    ItemCatalog subset(std::span<const std::string> item_ids) const;

private:
    std::vector<CatalogEntry> entries_;
    std::vector<std::string> difficulty_ids_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Maps questionnaire answer labels to scores. The six usefulness labels map
/// bijectively onto 0..5; sentinel labels mark a missing rating.
class LabelMapping {
public:
    LabelMapping(std::vector<std::pair<std::string, int>> scores,
                 std::vector<std::string> sentinels);

    /// The standard questionnaire mapping: "not at all"=0 ... "very much"=5,
    /// with "never tried" / "I don't know" as missing.
    static LabelMapping standard();

    /// Maps a raw cell to a rating. Accepted forms: a known label, an integer
    /// 0..5, a sentinel or the empty string (both -> missing rating).
    /// Returns nullopt (outer) when the text is not recognized at all.
    std::optional<Cell> map_cell(std::string_view raw) const;

    /// Score for a usefulness label; throws on sentinels and unknown labels.
    int score_for(const std::string& label) const;

    /// Label for a score (inverse of score_for).
    const std::string& label_for(int score) const;

    const std::vector<std::pair<std::string, int>>& scores() const { return scores_; }
    const std::vector<std::string>& sentinels() const { return sentinels_; }

private:
    std::vector<std::pair<std::string, int>> scores_;
    std::vector<std::string> sentinels_;
    std::unordered_map<std::string, int> score_index_;
};

/// users x items grid of optional ratings. Immutable after construction;
/// safe to share read-only across concurrent workers.
class RatingsMatrix {
public:
    RatingsMatrix(std::vector<std::string> user_ids,
                  std::vector<std::string> item_ids,
                  std::vector<Cell> cells);  // row-major, users x items

    std::size_t n_users() const { return user_ids_.size(); }
    std::size_t n_items() const { return item_ids_.size(); }

    const std::vector<std::string>& user_ids() const { return user_ids_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }

    const Cell& at(std::size_t user, std::size_t item) const {
        return cells_[user * n_items() + item];
    }
    std::span<const Cell> row(std::size_t user) const {
        return {cells_.data() + user * n_items(), n_items()};
    }
    std::vector<Cell> column(std::size_t item) const;

    std::optional<std::size_t> user_index(const std::string& user_id) const;
    std::optional<std::size_t> item_index(const std::string& item_id) const;

    std::size_t present_count() const;
    std::size_t missing_in_column(std::size_t item) const;
    bool user_has_ratings(std::size_t user) const;

    /// Mean of all present ratings; throws when the matrix has none.
    double global_mean() const;
    /// Mean of the present ratings in one column; absent when the column is
    /// entirely missing.
    std::optional<double> column_mean(std::size_t item) const;

    RatingsMatrix select_users(std::span<const std::size_t> user_rows) const;
    RatingsMatrix select_items(std::span<const std::size_t> item_cols) const;

    /// Writes the same CSV format ingest_csv reads: header `user_id,<items>`,
    /// numeric cells, empty cell for missing.
    void save_csv(const std::string& path) const;

    /// FNV-1a hash over dimensions, ids and cells; stable across runs.
    std::string fingerprint() const;

    bool operator==(const RatingsMatrix& other) const = default;

private:
    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::vector<Cell> cells_;
    std::unordered_map<std::string, std::size_t> user_index_;
    std::unordered_map<std::string, std::size_t> item_index_;
};

struct IngestResult {
    RatingsMatrix ratings;                    // tool/strategy columns, file order
    std::optional<RatingsMatrix> difficulties;  // difficulty columns, kept aside
    std::vector<std::size_t> unrated_users;   // row indices with zero present ratings
};

/// Reads a questionnaire CSV (header `user_id,<item ids>`) into a ratings
/// matrix. Cells may be labels, integers 0..5, sentinels or empty. Difficulty
/// columns are parsed but stored outside the recommendation matrix.
IngestResult ingest_csv(const std::string& path, const LabelMapping& mapping,
                        const ItemCatalog& catalog);

struct FilterResult {
    RatingsMatrix matrix;
    std::vector<std::string> removed_items;
};

/// Drops every item whose missing-cell fraction strictly exceeds the
/// threshold. The user set is unchanged.
FilterResult filter_items(const RatingsMatrix& m, double max_missing_fraction);

enum class ImputeAxis { ByUser, ByItem };

/// Dense user x item grid with each missing cell replaced by the mean of the
/// present ratings along the chosen axis (global mean when the whole
/// row/column is missing). Present cells pass through unchanged.
std::vector<double> impute(const RatingsMatrix& m, ImputeAxis axis);

/// Row-wise fill over a raw grid: missing -> row mean, fully-missing row ->
/// global mean. Shared by impute() and the distance-metric similarity path.
template <class T>
std::vector<double> impute_rows(std::span<const std::optional<T>> grid,
                                std::size_t n_rows, std::size_t n_cols) {
    double global_sum = 0.0;
    std::size_t global_count = 0;
    for (const auto& cell : grid) {
        if (cell) {
            global_sum += static_cast<double>(*cell);
            ++global_count;
        }
    }
    if (global_count == 0) throw Error("impute: no present ratings to fill from");
    const double global_mean = global_sum / static_cast<double>(global_count);

    std::vector<double> dense(n_rows * n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (const auto& cell = grid[r * n_cols + c]) {
                sum += static_cast<double>(*cell);
                ++count;
            }
        }
        const double fill = count > 0 ? sum / static_cast<double>(count) : global_mean;
        for (std::size_t c = 0; c < n_cols; ++c) {
            const auto& cell = grid[r * n_cols + c];
            dense[r * n_cols + c] = cell ? static_cast<double>(*cell) : fill;
        }
    }
    return dense;
}

}  // namespace studyrec

#endif
