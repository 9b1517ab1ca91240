#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "studyrec/similarity.hpp"

using namespace studyrec;
using oracle::OptVec;

namespace {

OptVec dense_opt(const std::vector<double>& v) {
    OptVec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

SimilarityFrame random_frame(oracle::TestRng& rng, std::size_t n_entities,
                             std::size_t dim, double missing_rate) {
    SimilarityFrame frame;
    frame.dim = dim;
    frame.values.resize(n_entities * dim);
    for (std::size_t e = 0; e < n_entities; ++e) {
        frame.ids.push_back("e" + std::to_string(e));
        for (std::size_t d = 0; d < dim; ++d) {
            if (!rng.chance(missing_rate)) {
                frame.values[e * dim + d] = double(rng.rating());
            }
        }
    }
    return frame;
}

}  // namespace

TEST_CASE("metric names round-trip") {
    for (const auto metric : {SimilarityMetric::Pearson, SimilarityMetric::Euclidean,
                              SimilarityMetric::Cosine}) {
        CHECK(metric_from_string(to_string(metric)) == metric);
    }
    CHECK(to_string(SimilarityMetric::Pearson) == "pearson");
    CHECK_THROWS_AS((void)metric_from_string("manhattan"), Error);
}

TEST_CASE("pearson exact values on small vectors") {
    const std::vector<double> up = {1, 2, 3};
    const std::vector<double> down = {3, 2, 1};
    CHECK(*pearson(std::span<const double>(up), std::span<const double>(up)) == 1.0);
    CHECK(*pearson(std::span<const double>(up), std::span<const double>(down)) == -1.0);

    // Shifting or scaling one side cannot change a perfect correlation.
    const std::vector<double> up_scaled = {10, 30, 50};
    CHECK(*pearson(std::span<const double>(up), std::span<const double>(up_scaled)) ==
          1.0);
}

TEST_CASE("pearson on sparse vectors uses co-present positions only") {
    // Co-present positions: first four. Means 2.5/2.5, cov 9, vars 17 and 5.
    OptVec x = dense_opt({0, 5, 1, 4});
    OptVec y = dense_opt({1, 4, 2, 3});
    x.push_back(std::nullopt);
    y.push_back(7.0);

    const auto r = pearson(std::span<const std::optional<double>>(x),
                           std::span<const std::optional<double>>(y));
    REQUIRE(r.has_value());
    CHECK(*r == 9.0 / std::sqrt(85.0));

    SUBCASE("padding both sides with non-overlapping values changes nothing") {
        OptVec x2 = x;
        OptVec y2 = y;
        x2.push_back(5.0);
        y2.push_back(std::nullopt);
        const auto r2 = pearson(std::span<const std::optional<double>>(x2),
                                std::span<const std::optional<double>>(y2));
        REQUIRE(r2.has_value());
        CHECK(*r2 == *r);
    }
}

TEST_CASE("pearson is absent below min overlap or at zero variance") {
    OptVec x = {1.0, std::nullopt, 2.0};
    OptVec y = {1.0, 2.0, std::nullopt};
    CHECK_FALSE(pearson(std::span<const std::optional<double>>(x),
                        std::span<const std::optional<double>>(y))
                    .has_value());

    const std::vector<double> flat = {4, 4, 4};
    const std::vector<double> varying = {1, 2, 3};
    CHECK_FALSE(pearson(std::span<const double>(flat), std::span<const double>(varying))
                    .has_value());
    CHECK_FALSE(pearson(std::span<const double>(varying), std::span<const double>(flat))
                    .has_value());

    SUBCASE("a larger min_overlap suppresses small overlaps") {
        const std::vector<double> a = {1, 2, 3};
        const std::vector<double> b = {2, 4, 5};
        CHECK(pearson(std::span<const double>(a), std::span<const double>(b), 3)
                  .has_value());
        CHECK_FALSE(pearson(std::span<const double>(a), std::span<const double>(b), 4)
                        .has_value());
    }
    SUBCASE("min_overlap below two is rejected") {
        const std::vector<double> a = {1, 2};
        CHECK_THROWS_AS((void)pearson(std::span<const double>(a),
                                      std::span<const double>(a), 1),
                        Error);
    }
    SUBCASE("length mismatch is rejected") {
        const std::vector<double> a = {1, 2};
        const std::vector<double> b = {1, 2, 3};
        CHECK_THROWS_AS((void)pearson(std::span<const double>(a),
                                      std::span<const double>(b)),
                        Error);
    }
}

TEST_CASE("euclidean exact values") {
    const std::vector<double> origin = {0, 0};
    const std::vector<double> p34 = {3, 4};
    CHECK(euclidean(std::span<const double>(origin), std::span<const double>(p34)) ==
          5.0);

    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {2, 4, 6};
    CHECK(euclidean(std::span<const double>(a), std::span<const double>(b)) ==
          std::sqrt(14.0));
    CHECK(euclidean(std::span<const double>(a), std::span<const double>(a)) == 0.0);

    const std::vector<double> shorter = {1, 2};
    CHECK_THROWS_AS((void)euclidean(std::span<const double>(a),
                                    std::span<const double>(shorter)),
                    Error);
}

TEST_CASE("cosine distance exact values and clamps") {
    const std::vector<double> e1 = {1, 0};
    const std::vector<double> e2 = {0, 1};
    CHECK(*cosine(std::span<const double>(e1), std::span<const double>(e2)) == 1.0);

    const std::vector<double> d22 = {2, 2};
    const std::vector<double> d44 = {4, 4};
    CHECK(*cosine(std::span<const double>(d22), std::span<const double>(d44)) == 0.0);

    const std::vector<double> ones = {1, 1};
    CHECK(*cosine(std::span<const double>(ones), std::span<const double>(e1)) ==
          1.0 - 1.0 / std::sqrt(2.0));

    const std::vector<double> neg = {-1, -1};
    CHECK(*cosine(std::span<const double>(ones), std::span<const double>(neg)) == 2.0);

    const std::vector<double> zero = {0, 0};
    CHECK_FALSE(cosine(std::span<const double>(zero), std::span<const double>(e1))
                    .has_value());
    CHECK_FALSE(cosine(std::span<const double>(e1), std::span<const double>(zero))
                    .has_value());
}

TEST_CASE("metric properties hold on random vectors") {
    oracle::TestRng rng(1234);
    int pearson_defined = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t dim = 2 + rng.index(12);
        std::vector<double> x(dim);
        std::vector<double> y(dim);
        std::vector<double> z(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = double(rng.rating());
            y[i] = double(rng.rating());
            z[i] = double(rng.rating());
        }
        const std::span<const double> sx(x);
        const std::span<const double> sy(y);
        const std::span<const double> sz(z);

        // Symmetry is exact: both orders run the same arithmetic.
        CHECK(euclidean(sx, sy) == euclidean(sy, sx));
        CHECK(euclidean(sx, sx) == 0.0);

        // Triangle inequality with a hair of slack for accumulated rounding.
        CHECK(euclidean(sx, sz) <= euclidean(sx, sy) + euclidean(sy, sz) + 1e-9);

        if (const auto r = pearson(sx, sy)) {
            ++pearson_defined;
            CHECK(*r >= -1.0);
            CHECK(*r <= 1.0);
            CHECK(*pearson(sy, sx) == *r);

            // Positive affine maps of one side preserve the correlation.
            const double a = rng.range(0.25, 4.0);
            const double b = rng.range(-3.0, 3.0);
            std::vector<double> xt(dim);
            for (std::size_t i = 0; i < dim; ++i) xt[i] = a * x[i] + b;
            const auto rt = pearson(std::span<const double>(xt), sy);
            REQUIRE(rt.has_value());
            CHECK(std::fabs(*rt - *r) <= 1e-9);

            // A negative scale flips the sign.
            std::vector<double> xn(dim);
            for (std::size_t i = 0; i < dim; ++i) xn[i] = -x[i];
            const auto rn = pearson(std::span<const double>(xn), sy);
            REQUIRE(rn.has_value());
            CHECK(std::fabs(*rn + *r) <= 1e-9);
        }

        if (const auto d = cosine(sx, sy)) {
            CHECK(*d >= 0.0);
            CHECK(*d <= 2.0);
            CHECK(*cosine(sy, sx) == *d);
        }
        if (const auto self = cosine(sx, sx)) {
            // Integer coordinates keep the self-distance exactly zero.
            CHECK(*self == 0.0);
            std::vector<double> doubled(dim);
            for (std::size_t i = 0; i < dim; ++i) doubled[i] = 2.0 * x[i];
            CHECK(*cosine(sx, std::span<const double>(doubled)) == 0.0);
        }
    }
    // The property loop must actually exercise the defined branch.
    CHECK(pearson_defined > 800);
}

TEST_CASE("neighbor search ranks an identical entity first") {
    SimilarityFrame frame;
    frame.ids = {"twin", "far", "off", "query"};
    frame.dim = 3;
    const std::vector<double> flat = {5, 4, 3, 1, 1, 5, 0, 2, 1, 5, 4, 3};
    frame.values.assign(flat.begin(), flat.end());

    const NeighborSet by_dist =
        compute_similarities(frame, 3, SimilarityMetric::Euclidean, 2);
    REQUIRE(by_dist.entries.size() == 2);
    CHECK(by_dist.entries[0].id == "twin");
    CHECK(by_dist.entries[0].score == 0.0);
    CHECK(by_dist.entries[1].score >= by_dist.entries[0].score);

    const NeighborSet by_corr =
        compute_similarities(frame, 3, SimilarityMetric::Pearson, 1);
    REQUIRE(by_corr.entries.size() == 1);
    CHECK(by_corr.entries[0].id == "twin");
    CHECK(by_corr.entries[0].score == 1.0);
}

TEST_CASE("neighbor search orders by score then index") {
    SimilarityFrame frame;
    frame.ids = {"left", "right", "query"};
    frame.dim = 2;
    const std::vector<double> flat = {0, 0, 2, 0, 1, 0};
    frame.values.assign(flat.begin(), flat.end());

    // Both candidates sit at distance 1 from the query; the tie goes to the
    // lower frame index.
    const NeighborSet set =
        compute_similarities(frame, 2, SimilarityMetric::Euclidean, 2);
    REQUIRE(set.entries.size() == 2);
    CHECK(set.entries[0].index == 0);
    CHECK(set.entries[1].index == 1);
    CHECK(set.entries[0].score == set.entries[1].score);
}

TEST_CASE("neighbor search skips undefined candidates") {
    SUBCASE("constant rows have no correlation") {
        SimilarityFrame frame;
        frame.ids = {"flat", "vary", "query"};
        frame.dim = 3;
        const std::vector<double> flat = {4, 4, 4, 1, 3, 2, 1, 2, 3};
        frame.values.assign(flat.begin(), flat.end());
        const NeighborSet set =
            compute_similarities(frame, 2, SimilarityMetric::Pearson, 5);
        REQUIRE(set.entries.size() == 1);
        CHECK(set.entries[0].id == "vary");
    }
    SUBCASE("no rankable candidate throws") {
        SimilarityFrame frame;
        frame.ids = {"flat", "query"};
        frame.dim = 2;
        const std::vector<double> flat = {4, 4, 1, 2};
        frame.values.assign(flat.begin(), flat.end());
        CHECK_THROWS_AS(
            (void)compute_similarities(frame, 1, SimilarityMetric::Pearson, 3),
            NoRankableCandidates);
    }
    SUBCASE("a frame with no ratings at all cannot rank by distance") {
        SimilarityFrame frame;
        frame.ids = {"a", "b"};
        frame.dim = 2;
        frame.values.resize(4);
        CHECK_THROWS_AS(
            (void)compute_similarities(frame, 0, SimilarityMetric::Euclidean, 1),
            NoRankableCandidates);
    }
}

TEST_CASE("neighbor search imputes sparse entities with their own mean") {
    SimilarityFrame frame;
    frame.ids = {"sparse", "query"};
    frame.dim = 2;
    frame.values = {4.0, std::nullopt, 2.0, 2.0};

    // The sparse row becomes [4, 4]; distance to [2, 2] is sqrt(8).
    const NeighborSet set =
        compute_similarities(frame, 1, SimilarityMetric::Euclidean, 1);
    REQUIRE(set.entries.size() == 1);
    CHECK(set.entries[0].score == std::sqrt(8.0));
}

TEST_CASE("neighbor search validates its inputs") {
    SimilarityFrame frame;
    frame.ids = {"a", "b"};
    frame.dim = 2;
    frame.values = {1.0, 2.0, 3.0, 4.0};

    CHECK_THROWS_AS(
        (void)compute_similarities(frame, 2, SimilarityMetric::Euclidean, 1), Error);
    CHECK_THROWS_AS(
        (void)compute_similarities(frame, 0, SimilarityMetric::Euclidean, 0), Error);

    SimilarityFrame bad = frame;
    bad.values.pop_back();
    CHECK_THROWS_AS((void)compute_similarities(bad, 0, SimilarityMetric::Euclidean, 1),
                    Error);
}

TEST_CASE("neighbor search matches the reference implementation exactly") {
    oracle::TestRng rng(555);
    const SimilarityMetric metrics[] = {SimilarityMetric::Pearson,
                                        SimilarityMetric::Euclidean,
                                        SimilarityMetric::Cosine};
    int ranked_cases = 0;
    int empty_cases = 0;
    for (int rep = 0; rep < 150; ++rep) {
        const std::size_t n_entities = 2 + rng.index(13);
        const std::size_t dim = 2 + rng.index(9);
        const double missing = rng.range(0.0, 0.5);
        const SimilarityFrame frame = random_frame(rng, n_entities, dim, missing);
        const std::size_t query = rng.index(n_entities);
        const std::size_t n = 1 + rng.index(n_entities);
        const SimilarityMetric metric = metrics[rng.index(3)];

        const OptVec grid(frame.values.begin(), frame.values.end());
        const auto expected =
            oracle::neighbors(grid, n_entities, dim, query, metric, n, 2);

        if (!expected.has_value()) {
            ++empty_cases;
            CHECK_THROWS_AS((void)compute_similarities(frame, query, metric, n),
                            NoRankableCandidates);
            continue;
        }
        ++ranked_cases;
        const NeighborSet actual = compute_similarities(frame, query, metric, n);
        CHECK(actual.metric == metric);
        REQUIRE(actual.entries.size() == expected->size());
        for (std::size_t i = 0; i < expected->size(); ++i) {
            CHECK(actual.entries[i].index == (*expected)[i].index);
            CHECK(actual.entries[i].score == (*expected)[i].score);
            CHECK(actual.entries[i].id == frame.ids[(*expected)[i].index]);
        }
        for (const Neighbor& nb : actual.entries) {
            CHECK(nb.index != query);
        }
    }
    CHECK(ranked_cases > 100);
    CHECK(empty_cases > 0);
}
