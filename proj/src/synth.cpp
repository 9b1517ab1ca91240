#include "studyrec/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "studyrec/csv.hpp"
#include "studyrec/rng.hpp"

namespace studyrec {

namespace {

constexpr std::uint64_t kClusterSalt = 10;
constexpr std::uint64_t kGroupSalt = 11;
constexpr std::uint64_t kCellSalt = 12;

std::string padded_id(char prefix, std::size_t index, std::size_t total) {
    std::size_t width = std::to_string(total).size();
    std::string digits = std::to_string(index + 1);
    std::string id(1, prefix);
    id.append(width > digits.size() ? width - digits.size() : 0, '0');
    id += digits;
    return id;
}

double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Box-Muller standard normal, hand-rolled so the draw sequence does not
/// depend on the standard library's distribution internals.
double gaussian(std::mt19937_64& gen) {
    const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01(gen);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Balanced membership: position p of a seeded shuffle lands in bucket
/// p mod n_buckets.
std::vector<std::size_t> balanced_assignment(std::size_t n, std::size_t n_buckets,
                                             std::uint64_t seed) {
    const auto perm = shuffled_indices(n, seed);
    std::vector<std::size_t> assignment(n);
    for (std::size_t p = 0; p < n; ++p) assignment[perm[p]] = p % n_buckets;
    return assignment;
}

std::string format_double(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, result.ptr);
}

}  // namespace

void SynthSpec::validate() const {
    if (n_users == 0 || n_items == 0) {
        throw Error("synth: need at least one user and one item");
    }
    if (user_clusters == 0 || item_groups == 0) {
        throw Error("synth: need at least one cluster and one group");
    }
    if (affinity.size() != user_clusters * item_groups) {
        throw Error("synth: affinity table must be user_clusters x item_groups");
    }
    for (const double a : affinity) {
        if (!(a >= kMinRating && a <= kMaxRating)) {
            throw Error("synth: affinity entries must be within [0, 5]");
        }
    }
    if (!(noise_sd >= 0.0)) throw Error("synth: noise_sd must be non-negative");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
        throw Error("synth: missing_rate must be within [0, 1)");
    }
}

SynthResult generate(const SynthSpec& spec) {
    spec.validate();

    const auto user_cluster = balanced_assignment(
        spec.n_users, spec.user_clusters, mix_seed(spec.seed, kClusterSalt));
    const auto item_group = balanced_assignment(
        spec.n_items, spec.item_groups, mix_seed(spec.seed, kGroupSalt));

    std::vector<std::string> user_ids(spec.n_users);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        user_ids[u] = padded_id('u', u, spec.n_users);
    }
    std::vector<std::string> item_ids(spec.n_items);
    for (std::size_t i = 0; i < spec.n_items; ++i) {
        item_ids[i] = padded_id('i', i, spec.n_items);
    }

    std::vector<double> truth(spec.n_users * spec.n_items);
    std::vector<Cell> cells(spec.n_users * spec.n_items);
    std::mt19937_64 gen(mix_seed(spec.seed, kCellSalt));
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        for (std::size_t i = 0; i < spec.n_items; ++i) {
            const double base =
                spec.affinity[user_cluster[u] * spec.item_groups + item_group[i]];
            // Fixed draw order per cell (noise, then missingness) keeps the
            // stream aligned whatever the outcomes.
            const double noise = gaussian(gen);
            const double miss = uniform01(gen);
            truth[u * spec.n_items + i] = base;
            if (miss < spec.missing_rate) continue;
            const long rounded = std::lround(base + spec.noise_sd * noise);
            const int value = static_cast<int>(
                std::clamp<long>(rounded, kMinRating, kMaxRating));
            cells[u * spec.n_items + i] = value;
        }
    }

    return SynthResult{
        RatingsMatrix(std::move(user_ids), std::move(item_ids), std::move(cells)),
        std::move(truth), user_cluster, item_group};
}

ItemCatalog synthetic_catalog(const std::vector<std::string>& item_ids) {
    std::vector<CatalogEntry> entries;
    entries.reserve(item_ids.size());
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        const ItemKind kind = i % 2 == 0 ? ItemKind::Tool : ItemKind::Strategy;
        entries.push_back(
            {item_ids[i], kind, "synthetic " + to_string(kind) + " " + item_ids[i]});
    }
    return ItemCatalog(std::move(entries));
}

void save_truth_csv(const SynthResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write ground truth: " + path);
    const auto& m = result.ratings;
    out << "user_id";
    for (const auto& id : m.item_ids()) out << ',' << csv_escape(id);
    out << '\n';
    for (std::size_t u = 0; u < m.n_users(); ++u) {
        out << csv_escape(m.user_ids()[u]);
        for (std::size_t i = 0; i < m.n_items(); ++i) {
            out << ',' << format_double(result.ground_truth[u * m.n_items() + i]);
        }
        out << '\n';
    }
}

}  // namespace studyrec
