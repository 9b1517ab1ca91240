#include "studyrec/ratings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "studyrec/csv.hpp"

namespace studyrec {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

}  // namespace

std::string to_string(ItemKind kind) {
    return kind == ItemKind::Tool ? "tool" : "strategy";
}

ItemCatalog::ItemCatalog(std::vector<CatalogEntry> entries,
                         std::vector<std::string> difficulty_ids)
    : entries_(std::move(entries)), difficulty_ids_(std::move(difficulty_ids)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].item_id.empty()) throw Error("catalog: empty item id");
        if (!index_.emplace(entries_[i].item_id, i).second) {
            throw Error("catalog: duplicate item id " + entries_[i].item_id);
        }
    }
    for (const auto& id : difficulty_ids_) {
        if (index_.count(id)) {
            throw Error("catalog: id " + id + " is both an item and a difficulty");
        }
    }
}

ItemCatalog ItemCatalog::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("catalog not found: " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error("catalog is empty: " + path);

    std::vector<CatalogEntry> entries;
    std::vector<std::string> difficulties;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 2) throw Error("catalog row needs item_id,kind: " + line);
        const std::string id = trim(fields[0]);
        const std::string kind = lowercase(trim(fields[1]));
        const std::string label = fields.size() > 2 ? trim(fields[2]) : "";
        if (kind == "tool") {
            entries.push_back({id, ItemKind::Tool, label});
        } else if (kind == "strategy") {
            entries.push_back({id, ItemKind::Strategy, label});
        } else if (kind == "difficulty") {
            difficulties.push_back(id);
        } else {
            throw Error("catalog: unknown kind \"" + kind + "\" for " + id);
        }
    }
    return ItemCatalog(std::move(entries), std::move(difficulties));
}

void ItemCatalog::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write catalog: " + path);
    out << "item_id,kind,label\n";
    for (const auto& e : entries_) {
        out << csv_escape(e.item_id) << ',' << to_string(e.kind) << ','
            << csv_escape(e.label) << '\n';
    }
    for (const auto& id : difficulty_ids_) {
        out << csv_escape(id) << ",difficulty,\n";
    }
}

bool ItemCatalog::has_item(const std::string& item_id) const {
    return index_.count(item_id) > 0;
}

bool ItemCatalog::is_difficulty(const std::string& id) const {
    return std::find(difficulty_ids_.begin(), difficulty_ids_.end(), id) !=
           difficulty_ids_.end();
}

const CatalogEntry* ItemCatalog::find(const std::string& item_id) const {
    auto it = index_.find(item_id);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

ItemCatalog ItemCatalog::subset(std::span<const std::string> item_ids) const {
    std::vector<CatalogEntry> kept;
    kept.reserve(item_ids.size());
    for (const auto& id : item_ids) {
        const CatalogEntry* e = find(id);
        if (!e) throw Error("catalog subset: unknown item " + id);
        kept.push_back(*e);
    }
    return ItemCatalog(std::move(kept), difficulty_ids_);
}

LabelMapping::LabelMapping(std::vector<std::pair<std::string, int>> scores,
                           std::vector<std::string> sentinels)
    : scores_(std::move(scores)), sentinels_(std::move(sentinels)) {
    for (const auto& [label, score] : scores_) {
        if (!is_valid_rating(score)) {
            throw Error("label mapping: score out of range for \"" + label + "\"");
        }
        if (!score_index_.emplace(lowercase(label), score).second) {
            throw Error("label mapping: duplicate label \"" + label + "\"");
        }
    }
}

LabelMapping LabelMapping::standard() {
    return LabelMapping(
        {{"not at all", 0},
         {"very little", 1},
         {"little", 2},
         {"medium", 3},
         {"much", 4},
         {"very much", 5}},
        // The second apostrophe variant is U+2019, as exported by some
        // spreadsheet tools.
        {"never tried", "I don't know", "I don’t know"});
}

std::optional<Cell> LabelMapping::map_cell(std::string_view raw) const {
    const std::string text = trim(raw);
    if (text.empty()) return Cell{};

    const std::string key = lowercase(text);
    for (const auto& sentinel : sentinels_) {
        if (key == lowercase(sentinel)) return Cell{};
    }
    if (auto it = score_index_.find(key); it != score_index_.end()) {
        return Cell{it->second};
    }
    if (auto value = parse_int(text)) {
        if (is_valid_rating(*value)) return Cell{*value};
    }
    return std::nullopt;
}

int LabelMapping::score_for(const std::string& label) const {
    auto it = score_index_.find(lowercase(label));
    if (it == score_index_.end()) throw Error("unknown usefulness label: " + label);
    return it->second;
}

const std::string& LabelMapping::label_for(int score) const {
    for (const auto& [label, s] : scores_) {
        if (s == score) return label;
    }
    throw Error("no label for score " + std::to_string(score));
}

RatingsMatrix::RatingsMatrix(std::vector<std::string> user_ids,
                             std::vector<std::string> item_ids,
                             std::vector<Cell> cells)
    : user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)),
      cells_(std::move(cells)) {
    if (cells_.size() != user_ids_.size() * item_ids_.size()) {
        throw Error("ratings matrix: cell count does not match dimensions");
    }
    for (const Cell& cell : cells_) {
        if (cell && !is_valid_rating(*cell)) {
            throw Error("ratings matrix: rating out of range: " + std::to_string(*cell));
        }
    }
    for (std::size_t i = 0; i < user_ids_.size(); ++i) {
        if (!user_index_.emplace(user_ids_[i], i).second) {
            throw Error("ratings matrix: duplicate user_id " + user_ids_[i]);
        }
    }
    for (std::size_t i = 0; i < item_ids_.size(); ++i) {
        if (!item_index_.emplace(item_ids_[i], i).second) {
            throw Error("ratings matrix: duplicate item id " + item_ids_[i]);
        }
    }
}

std::vector<Cell> RatingsMatrix::column(std::size_t item) const {
    std::vector<Cell> col(n_users());
    for (std::size_t u = 0; u < n_users(); ++u) col[u] = at(u, item);
    return col;
}

std::optional<std::size_t> RatingsMatrix::user_index(const std::string& user_id) const {
    auto it = user_index_.find(user_id);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> RatingsMatrix::item_index(const std::string& item_id) const {
    auto it = item_index_.find(item_id);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
}

std::size_t RatingsMatrix::present_count() const {
    std::size_t count = 0;
    for (const Cell& cell : cells_) {
        if (cell) ++count;
    }
    return count;
}

std::size_t RatingsMatrix::missing_in_column(std::size_t item) const {
    std::size_t missing = 0;
    for (std::size_t u = 0; u < n_users(); ++u) {
        if (!at(u, item)) ++missing;
    }
    return missing;
}

bool RatingsMatrix::user_has_ratings(std::size_t user) const {
    for (const Cell& cell : row(user)) {
        if (cell) return true;
    }
    return false;
}

double RatingsMatrix::global_mean() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const Cell& cell : cells_) {
        if (cell) {
            sum += *cell;
            ++count;
        }
    }
    if (count == 0) throw Error("ratings matrix has no present ratings");
    return sum / static_cast<double>(count);
}

std::optional<double> RatingsMatrix::column_mean(std::size_t item) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < n_users(); ++u) {
        if (const Cell& cell = at(u, item)) {
            sum += *cell;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

RatingsMatrix RatingsMatrix::select_users(std::span<const std::size_t> user_rows) const {
    std::vector<std::string> ids;
    std::vector<Cell> cells;
    ids.reserve(user_rows.size());
    cells.reserve(user_rows.size() * n_items());
    for (const std::size_t u : user_rows) {
        if (u >= n_users()) throw Error("select_users: row index out of range");
        ids.push_back(user_ids_[u]);
        const auto r = row(u);
        cells.insert(cells.end(), r.begin(), r.end());
    }
    return RatingsMatrix(std::move(ids), item_ids_, std::move(cells));
}

RatingsMatrix RatingsMatrix::select_items(std::span<const std::size_t> item_cols) const {
    std::vector<std::string> ids;
    ids.reserve(item_cols.size());
    for (const std::size_t i : item_cols) {
        if (i >= n_items()) throw Error("select_items: column index out of range");
        ids.push_back(item_ids_[i]);
    }
    std::vector<Cell> cells;
    cells.reserve(n_users() * item_cols.size());
    for (std::size_t u = 0; u < n_users(); ++u) {
        for (const std::size_t i : item_cols) cells.push_back(at(u, i));
    }
    return RatingsMatrix(user_ids_, std::move(ids), std::move(cells));
}

void RatingsMatrix::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write ratings: " + path);
    out << "user_id";
    for (const auto& id : item_ids_) out << ',' << csv_escape(id);
    out << '\n';
    for (std::size_t u = 0; u < n_users(); ++u) {
        out << csv_escape(user_ids_[u]);
        for (std::size_t i = 0; i < n_items(); ++i) {
            out << ',';
            if (const Cell& cell = at(u, i)) out << *cell;
        }
        out << '\n';
    }
}

std::string RatingsMatrix::fingerprint() const {
    std::uint64_t hash = 14695981039346656037ULL;
    auto mix_byte = [&hash](unsigned char b) {
        hash ^= b;
        hash *= 1099511628211ULL;
    };
    auto mix_string = [&](const std::string& s) {
        for (const char c : s) mix_byte(static_cast<unsigned char>(c));
        mix_byte(0);
    };
    auto mix_size = [&](std::size_t v) {
        for (int shift = 0; shift < 64; shift += 8) {
            mix_byte(static_cast<unsigned char>((v >> shift) & 0xff));
        }
    };
    mix_size(n_users());
    mix_size(n_items());
    for (const auto& id : user_ids_) mix_string(id);
    for (const auto& id : item_ids_) mix_string(id);
    for (const Cell& cell : cells_) {
        mix_byte(cell ? 1 : 0);
        mix_byte(cell ? static_cast<unsigned char>(*cell) : 0);
    }
    std::ostringstream out;
    out << std::hex;
    for (int shift = 60; shift >= 0; shift -= 4) {
        out << ((hash >> shift) & 0xf);
    }
    return out.str();
}

IngestResult ingest_csv(const std::string& path, const LabelMapping& mapping,
                        const ItemCatalog& catalog) {
    std::ifstream in(path);
    if (!in) throw Error("dataset not found: " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error("dataset is empty: " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || trim(header[0]) != "user_id") {
        throw Error("dataset header must start with user_id");
    }

    // Column layout: which header columns are ratings, which are difficulty
    // questions. Anything else is a hard error so typos surface early.
    std::vector<std::string> item_ids;
    std::vector<std::string> difficulty_ids;
    std::vector<int> column_role(header.size(), -1);  // -1 skip, 0 rating, 1 difficulty
    std::vector<std::size_t> column_slot(header.size(), 0);
    std::unordered_set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string id = trim(header[c]);
        if (id.empty()) throw Error("dataset header has an empty column name");
        if (!seen.insert(id).second) throw Error("duplicate item column: " + id);
        if (catalog.has_item(id)) {
            column_role[c] = 0;
            column_slot[c] = item_ids.size();
            item_ids.push_back(id);
        } else if (catalog.is_difficulty(id)) {
            column_role[c] = 1;
            column_slot[c] = difficulty_ids.size();
            difficulty_ids.push_back(id);
        } else {
            throw Error("unknown item column: " + id);
        }
    }
    if (item_ids.empty()) throw Error("dataset has no recommendable item columns");

    std::vector<std::string> user_ids;
    std::vector<Cell> cells;
    std::vector<Cell> difficulty_cells;
    std::unordered_set<std::string> seen_users;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string user_id = trim(fields[0]);
        if (user_id.empty()) throw Error("dataset row without user_id");
        if (!seen_users.insert(user_id).second) {
            throw Error("duplicate user_id: " + user_id);
        }
        user_ids.push_back(user_id);
        const std::size_t row_base = cells.size();
        cells.resize(cells.size() + item_ids.size());
        const std::size_t diff_base = difficulty_cells.size();
        difficulty_cells.resize(difficulty_cells.size() + difficulty_ids.size());
        for (std::size_t c = 1; c < header.size(); ++c) {
            if (column_role[c] < 0) continue;
            // Rows may legitimately end early; everything absent is missing.
            const std::string_view raw = c < fields.size() ? fields[c] : std::string_view{};
            const auto mapped = mapping.map_cell(raw);
            if (!mapped) {
                throw Error("unrecognized answer \"" + std::string(trim(raw)) +
                            "\" for user " + user_id + ", column " + trim(header[c]));
            }
            if (column_role[c] == 0) {
                cells[row_base + column_slot[c]] = *mapped;
            } else {
                difficulty_cells[diff_base + column_slot[c]] = *mapped;
            }
        }
    }
    if (user_ids.empty()) throw Error("dataset has no respondent rows");

    RatingsMatrix ratings(user_ids, item_ids, std::move(cells));
    std::optional<RatingsMatrix> difficulties;
    if (!difficulty_ids.empty()) {
        difficulties.emplace(user_ids, difficulty_ids, std::move(difficulty_cells));
    }
    std::vector<std::size_t> unrated;
    for (std::size_t u = 0; u < ratings.n_users(); ++u) {
        if (!ratings.user_has_ratings(u)) unrated.push_back(u);
    }
    return IngestResult{std::move(ratings), std::move(difficulties), std::move(unrated)};
}

FilterResult filter_items(const RatingsMatrix& m, double max_missing_fraction) {
    std::vector<std::size_t> kept;
    std::vector<std::string> removed;
    for (std::size_t i = 0; i < m.n_items(); ++i) {
        const double fraction = static_cast<double>(m.missing_in_column(i)) /
                                static_cast<double>(m.n_users());
        if (fraction > max_missing_fraction) {
            removed.push_back(m.item_ids()[i]);
        } else {
            kept.push_back(i);
        }
    }
    if (kept.empty()) throw Error("item filter removed every item");
    return FilterResult{m.select_items(kept), std::move(removed)};
}

std::vector<double> impute(const RatingsMatrix& m, ImputeAxis axis) {
    const std::size_t n_users = m.n_users();
    const std::size_t n_items = m.n_items();
    if (axis == ImputeAxis::ByUser) {
        std::vector<Cell> grid;
        grid.reserve(n_users * n_items);
        for (std::size_t u = 0; u < n_users; ++u) {
            const auto r = m.row(u);
            grid.insert(grid.end(), r.begin(), r.end());
        }
        return impute_rows<int>(grid, n_users, n_items);
    }
    // Item means: impute the transposed grid, then flip back to user x item.
    std::vector<Cell> transposed(n_users * n_items);
    for (std::size_t u = 0; u < n_users; ++u) {
        for (std::size_t i = 0; i < n_items; ++i) {
            transposed[i * n_users + u] = m.at(u, i);
        }
    }
    const std::vector<double> dense_t = impute_rows<int>(transposed, n_items, n_users);
    std::vector<double> dense(n_users * n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        for (std::size_t u = 0; u < n_users; ++u) {
            dense[u * n_items + i] = dense_t[i * n_users + u];
        }
    }
    return dense;
}

}  // namespace studyrec
