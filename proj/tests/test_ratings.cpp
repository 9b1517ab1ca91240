#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "studyrec/csv.hpp"
#include "studyrec/ratings.hpp"

using namespace studyrec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("studyrec_ratings_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

ItemCatalog tiny_catalog() {
    return ItemCatalog({{"T1", ItemKind::Tool, "highlighting"},
                        {"T2", ItemKind::Tool, "flashcards"},
                        {"S1", ItemKind::Strategy, "weekly review"}},
                       {"P1"});
}

}  // namespace

TEST_CASE("csv line splitting handles quotes and escapes") {
    CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_line("a,,c") == std::vector<std::string>{"a", "", "c"});
    CHECK(split_csv_line("\"a,b\",c") == std::vector<std::string>{"a,b", "c"});
    CHECK(split_csv_line("\"he said \"\"hi\"\"\",x") ==
          std::vector<std::string>{"he said \"hi\"", "x"});
    CHECK(split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
    CHECK(split_csv_line("") == std::vector<std::string>{""});
}

TEST_CASE("csv escaping round-trips through the splitter") {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"",
                                             "", "trailing space "};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        line += csv_escape(fields[i]);
    }
    CHECK(split_csv_line(line) == fields);
}

TEST_CASE("standard label mapping is a bijection over the six labels") {
    const LabelMapping mapping = LabelMapping::standard();
    REQUIRE(mapping.scores().size() == 6);

    CHECK(mapping.score_for("not at all") == 0);
    CHECK(mapping.score_for("very little") == 1);
    CHECK(mapping.score_for("little") == 2);
    CHECK(mapping.score_for("medium") == 3);
    CHECK(mapping.score_for("much") == 4);
    CHECK(mapping.score_for("very much") == 5);

    for (const auto& [label, score] : mapping.scores()) {
        CHECK(mapping.label_for(score) == label);
        CHECK(mapping.score_for(mapping.label_for(score)) == score);
    }
    CHECK_THROWS_AS((void)mapping.label_for(6), Error);
    CHECK_THROWS_AS((void)mapping.score_for("never tried"), Error);
    CHECK_THROWS_AS((void)mapping.score_for("sideways"), Error);
}

TEST_CASE("map_cell distinguishes missing from unrecognized") {
    const LabelMapping mapping = LabelMapping::standard();

    auto mapped = mapping.map_cell("medium");
    REQUIRE(mapped.has_value());
    REQUIRE(mapped->has_value());
    CHECK(**mapped == 3);

    SUBCASE("sentinels and empty cells are missing ratings") {
        for (const char* raw : {"never tried", "I don't know", "", "  "}) {
            auto cell = mapping.map_cell(raw);
            REQUIRE(cell.has_value());
            CHECK_FALSE(cell->has_value());
        }
        // Typographic apostrophe variant shows up in exported sheets.
        auto curly = mapping.map_cell("I don’t know");
        REQUIRE(curly.has_value());
        CHECK_FALSE(curly->has_value());
    }
    SUBCASE("integer cells within the scale are accepted") {
        for (int v = 0; v <= 5; ++v) {
            auto cell = mapping.map_cell(std::to_string(v));
            REQUIRE(cell.has_value());
            CHECK(**cell == v);
        }
    }
    SUBCASE("case and surrounding whitespace do not matter") {
        CHECK(**mapping.map_cell("Very Much") == 5);
        CHECK(**mapping.map_cell("  MEDIUM ") == 3);
        auto cell = mapping.map_cell(" Never Tried ");
        REQUIRE(cell.has_value());
        CHECK_FALSE(cell->has_value());
    }
    SUBCASE("out-of-scale and unknown text are rejected") {
        CHECK_FALSE(mapping.map_cell("6").has_value());
        CHECK_FALSE(mapping.map_cell("-1").has_value());
        CHECK_FALSE(mapping.map_cell("kind of").has_value());
        CHECK_FALSE(mapping.map_cell("3.5").has_value());
    }
}

TEST_CASE("ingest maps labels, sentinels and difficulty columns") {
    TempDir dir;
    const std::string path = dir.file("answers.csv");
    write_file(path,
               "user_id,T1,T2,S1,P1\n"
               "alice,very much,never tried,medium,much\n"
               "bob,not at all,little,I don't know,never tried\n"
               "carol,never tried,I don't know,never tried,\n");

    const IngestResult result = ingest_csv(path, LabelMapping::standard(), tiny_catalog());
    const RatingsMatrix& m = result.ratings;

    REQUIRE(m.n_users() == 3);
    REQUIRE(m.n_items() == 3);
    CHECK(m.item_ids() == std::vector<std::string>{"T1", "T2", "S1"});
    CHECK(m.at(0, 0) == Cell{5});
    CHECK(m.at(0, 1) == Cell{});
    CHECK(m.at(0, 2) == Cell{3});
    CHECK(m.at(1, 0) == Cell{0});
    CHECK(m.at(1, 1) == Cell{2});
    CHECK(m.at(1, 2) == Cell{});

    // carol answered nothing scoreable anywhere.
    CHECK(result.unrated_users == std::vector<std::size_t>{2});

    REQUIRE(result.difficulties.has_value());
    CHECK(result.difficulties->n_items() == 1);
    CHECK(result.difficulties->item_ids() == std::vector<std::string>{"P1"});
    CHECK(result.difficulties->at(0, 0) == Cell{4});
    CHECK(result.difficulties->at(1, 0) == Cell{});
}

TEST_CASE("ingest rejects malformed sheets with located errors") {
    TempDir dir;
    const LabelMapping mapping = LabelMapping::standard();
    const ItemCatalog catalog = tiny_catalog();

    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(ingest_csv(dir.file("nope.csv"), mapping, catalog),
                             doctest::Contains("dataset not found"), Error);
    }
    SUBCASE("unknown column") {
        const std::string path = dir.file("badcol.csv");
        write_file(path, "user_id,T1,T9\nalice,medium,much\n");
        CHECK_THROWS_WITH_AS(ingest_csv(path, mapping, catalog),
                             doctest::Contains("T9"), Error);
    }
    SUBCASE("duplicate user id") {
        const std::string path = dir.file("dup.csv");
        write_file(path, "user_id,T1\nalice,medium\nalice,much\n");
        CHECK_THROWS_WITH_AS(ingest_csv(path, mapping, catalog),
                             doctest::Contains("alice"), Error);
    }
    SUBCASE("unrecognized answer names user and column") {
        const std::string path = dir.file("badcell.csv");
        write_file(path, "user_id,T1,T2\nalice,medium,much\nbob,sideways,much\n");
        CHECK_THROWS_WITH_AS(ingest_csv(path, mapping, catalog),
                             doctest::Contains("sideways"), Error);
        try {
            ingest_csv(path, mapping, catalog);
        } catch (const Error& e) {
            const std::string what = e.what();
            CHECK(what.find("bob") != std::string::npos);
            CHECK(what.find("T1") != std::string::npos);
        }
    }
}

TEST_CASE("matrix round-trips through save_csv and ingest") {
    oracle::TestRng rng(20240811);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n_users = 1 + rng.index(12);
        const std::size_t n_items = 1 + rng.index(9);
        const RatingsMatrix m = oracle::random_matrix(rng, n_users, n_items, 0.3);

        std::vector<CatalogEntry> entries;
        for (const std::string& id : m.item_ids()) {
            entries.push_back({id, ItemKind::Tool, "item " + id});
        }
        TempDir dir;
        const std::string path = dir.file("roundtrip.csv");
        m.save_csv(path);
        const IngestResult back =
            ingest_csv(path, LabelMapping::standard(), ItemCatalog(entries));
        CHECK(back.ratings == m);
        CHECK(back.ratings.fingerprint() == m.fingerprint());
    }
}

TEST_CASE("matrix accessors and means") {
    // rows: alice {5,_,3}, bob {0,2,_}, cast as column fixtures too
    const RatingsMatrix m({"alice", "bob"}, {"T1", "T2", "S1"},
                          {Cell{5}, Cell{}, Cell{3}, Cell{0}, Cell{2}, Cell{}});

    CHECK(m.present_count() == 4);
    CHECK(m.missing_in_column(0) == 0);
    CHECK(m.missing_in_column(1) == 1);
    CHECK(m.user_has_ratings(0));
    CHECK(m.global_mean() == doctest::Approx(10.0 / 4.0).epsilon(1e-15));
    CHECK(*m.column_mean(0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(*m.column_mean(1) == 2.0);
    CHECK(*m.column_mean(2) == 3.0);
    CHECK(m.user_index("bob") == std::size_t{1});
    CHECK_FALSE(m.user_index("mallory").has_value());
    CHECK(m.item_index("S1") == std::size_t{2});
    CHECK(m.column(1) == std::vector<Cell>{Cell{}, Cell{2}});

    const RatingsMatrix empty({"alice"}, {"T1"}, {Cell{}});
    CHECK_FALSE(empty.column_mean(0).has_value());
    CHECK_THROWS_AS((void)empty.global_mean(), Error);
    CHECK_FALSE(empty.user_has_ratings(0));
}

TEST_CASE("select_users and select_items keep ids aligned with cells") {
    oracle::TestRng rng(99);
    const RatingsMatrix m = oracle::random_matrix(rng, 6, 5, 0.2);
    const std::vector<std::size_t> rows = {4, 1};
    const std::vector<std::size_t> cols = {0, 3, 2};

    const RatingsMatrix mu = m.select_users(rows);
    REQUIRE(mu.n_users() == 2);
    CHECK(mu.user_ids()[0] == m.user_ids()[4]);
    CHECK(mu.user_ids()[1] == m.user_ids()[1]);
    for (std::size_t i = 0; i < m.n_items(); ++i) {
        CHECK(mu.at(0, i) == m.at(4, i));
        CHECK(mu.at(1, i) == m.at(1, i));
    }

    const RatingsMatrix mi = m.select_items(cols);
    REQUIRE(mi.n_items() == 3);
    CHECK(mi.item_ids() == std::vector<std::string>{m.item_ids()[0], m.item_ids()[3],
                                                    m.item_ids()[2]});
    for (std::size_t u = 0; u < m.n_users(); ++u) {
        CHECK(mi.at(u, 0) == m.at(u, 0));
        CHECK(mi.at(u, 1) == m.at(u, 3));
        CHECK(mi.at(u, 2) == m.at(u, 2));
    }
}

TEST_CASE("item filter drops only columns that exceed the threshold") {
    // Missing fractions per column: 0.0, 0.5, 0.9 over 10 users.
    std::vector<std::string> users;
    std::vector<Cell> cells;
    for (int u = 0; u < 10; ++u) {
        users.push_back("u" + std::to_string(u));
        cells.push_back(Cell{3});                       // col a: never missing
        cells.push_back(u < 5 ? Cell{2} : Cell{});      // col b: half missing
        cells.push_back(u == 0 ? Cell{1} : Cell{});     // col c: 90% missing
    }
    const RatingsMatrix m(users, {"a", "b", "c"}, cells);

    const FilterResult strict = filter_items(m, 0.5);
    CHECK(strict.matrix.item_ids() == std::vector<std::string>{"a", "b"});
    CHECK(strict.removed_items == std::vector<std::string>{"c"});
    CHECK(strict.matrix.n_users() == 10);

    const FilterResult lax = filter_items(m, 0.9);
    CHECK(lax.matrix.item_ids() == std::vector<std::string>{"a", "b", "c"});
    CHECK(lax.removed_items.empty());

    const FilterResult harsh = filter_items(m, 0.4);
    CHECK(harsh.matrix.item_ids() == std::vector<std::string>{"a"});
    CHECK(harsh.removed_items == std::vector<std::string>{"b", "c"});

    const RatingsMatrix sparse({"u1", "u2"}, {"x", "y"},
                               {Cell{1}, Cell{}, Cell{}, Cell{2}});
    CHECK_THROWS_AS((void)filter_items(sparse, 0.4), Error);
}

TEST_CASE("item filter is idempotent") {
    oracle::TestRng rng(424242);
    for (int rep = 0; rep < 15; ++rep) {
        const RatingsMatrix m = oracle::random_matrix(rng, 8, 6, 0.45);
        if (m.present_count() == 0) continue;
        const double threshold = rng.range(0.2, 0.95);
        try {
            const FilterResult once = filter_items(m, threshold);
            const FilterResult twice = filter_items(once.matrix, threshold);
            CHECK(twice.matrix == once.matrix);
            CHECK(twice.removed_items.empty());
        } catch (const Error&) {
            // filter removed everything; nothing to re-apply
        }
    }
}

TEST_CASE("imputation fills along the requested axis") {
    // alice {4,_,2}; bob {_, 5, _}; carol {1, 1, 1}
    const RatingsMatrix m({"alice", "bob", "carol"}, {"a", "b", "c"},
                          {Cell{4}, Cell{}, Cell{2}, Cell{}, Cell{5}, Cell{},
                           Cell{1}, Cell{1}, Cell{1}});

    const std::vector<double> by_user = impute(m, ImputeAxis::ByUser);
    CHECK(by_user[0 * 3 + 1] == doctest::Approx(3.0).epsilon(1e-15));  // alice mean
    CHECK(by_user[1 * 3 + 0] == doctest::Approx(5.0).epsilon(1e-15));  // bob mean
    CHECK(by_user[1 * 3 + 2] == doctest::Approx(5.0).epsilon(1e-15));

    const std::vector<double> by_item = impute(m, ImputeAxis::ByItem);
    CHECK(by_item[0 * 3 + 1] == doctest::Approx(3.0).epsilon(1e-15));  // col b mean
    CHECK(by_item[1 * 3 + 0] == doctest::Approx(2.5).epsilon(1e-15));  // col a mean
    CHECK(by_item[1 * 3 + 2] == doctest::Approx(1.5).epsilon(1e-15));  // col c mean
}

TEST_CASE("imputation falls back to the global mean for empty scopes") {
    // bob has no ratings at all; column b has none either.
    const RatingsMatrix m({"alice", "bob"}, {"a", "b"},
                          {Cell{4}, Cell{}, Cell{}, Cell{}});
    const double global = 4.0;

    const std::vector<double> by_user = impute(m, ImputeAxis::ByUser);
    CHECK(by_user[2] == global);
    CHECK(by_user[3] == global);

    const std::vector<double> by_item = impute(m, ImputeAxis::ByItem);
    CHECK(by_item[1] == global);  // column b falls back
    CHECK(by_item[3] == global);

    const RatingsMatrix nothing({"a"}, {"x"}, {Cell{}});
    CHECK_THROWS_AS((void)impute(nothing, ImputeAxis::ByUser), Error);
}

TEST_CASE("imputation preserves present cells and respects scope bounds") {
    oracle::TestRng rng(777);
    for (int rep = 0; rep < 25; ++rep) {
        const RatingsMatrix m = oracle::random_matrix(rng, 7, 5, 0.4);
        if (m.present_count() == 0) continue;

        int global_min = kMaxRating;
        int global_max = kMinRating;
        for (std::size_t u = 0; u < m.n_users(); ++u) {
            for (std::size_t i = 0; i < m.n_items(); ++i) {
                if (m.at(u, i)) {
                    global_min = std::min(global_min, *m.at(u, i));
                    global_max = std::max(global_max, *m.at(u, i));
                }
            }
        }

        for (const ImputeAxis axis : {ImputeAxis::ByUser, ImputeAxis::ByItem}) {
            const std::vector<double> dense = impute(m, axis);
            REQUIRE(dense.size() == m.n_users() * m.n_items());
            for (std::size_t u = 0; u < m.n_users(); ++u) {
                for (std::size_t i = 0; i < m.n_items(); ++i) {
                    const double v = dense[u * m.n_items() + i];
                    if (m.at(u, i)) {
                        CHECK(v == double(*m.at(u, i)));
                    } else {
                        CHECK(v >= double(global_min));
                        CHECK(v <= double(global_max));
                    }
                }
            }
        }
    }
}

TEST_CASE("fingerprint reacts to any cell or id change") {
    const RatingsMatrix a({"u1", "u2"}, {"i1", "i2"},
                          {Cell{1}, Cell{2}, Cell{3}, Cell{}});
    const RatingsMatrix same({"u1", "u2"}, {"i1", "i2"},
                             {Cell{1}, Cell{2}, Cell{3}, Cell{}});
    const RatingsMatrix cell_diff({"u1", "u2"}, {"i1", "i2"},
                                  {Cell{1}, Cell{2}, Cell{3}, Cell{0}});
    const RatingsMatrix id_diff({"u1", "ux"}, {"i1", "i2"},
                                {Cell{1}, Cell{2}, Cell{3}, Cell{}});

    CHECK(a.fingerprint() == same.fingerprint());
    CHECK(a.fingerprint() != cell_diff.fingerprint());
    CHECK(a.fingerprint() != id_diff.fingerprint());
}

TEST_CASE("catalog loads, saves and subsets") {
    TempDir dir;
    const std::string path = dir.file("catalog.csv");
    write_file(path,
               "item_id,kind,label\n"
               "T1,tool,highlighting\n"
               "S1,strategy,weekly review\n"
               "P1,difficulty,concentration\n");

    const ItemCatalog catalog = ItemCatalog::load_csv(path);
    REQUIRE(catalog.entries().size() == 2);
    CHECK(catalog.has_item("T1"));
    CHECK(catalog.has_item("S1"));
    CHECK_FALSE(catalog.has_item("P1"));
    CHECK(catalog.is_difficulty("P1"));
    REQUIRE(catalog.find("S1") != nullptr);
    CHECK(catalog.find("S1")->label == "weekly review");
    CHECK(catalog.find("S1")->kind == ItemKind::Strategy);
    CHECK(catalog.find("T9") == nullptr);

    const std::string copy = dir.file("copy.csv");
    catalog.save_csv(copy);
    const ItemCatalog reloaded = ItemCatalog::load_csv(copy);
    REQUIRE(reloaded.entries().size() == 2);
    CHECK(reloaded.find("T1")->label == "highlighting");
    CHECK(reloaded.is_difficulty("P1"));

    const std::vector<std::string> keep = {"S1"};
    const ItemCatalog sub = catalog.subset(keep);
    REQUIRE(sub.entries().size() == 1);
    CHECK(sub.entries()[0].item_id == "S1");

    const std::vector<std::string> unknown = {"T9"};
    CHECK_THROWS_AS((void)catalog.subset(unknown), Error);
    CHECK_THROWS_AS((void)ItemCatalog::load_csv(dir.file("absent.csv")), Error);
}

TEST_CASE("matrix construction validates shape and rating range") {
    CHECK_THROWS_AS(RatingsMatrix({"u1"}, {"i1", "i2"}, {Cell{1}}), Error);
    CHECK_THROWS_AS(RatingsMatrix({"u1"}, {"i1"}, {Cell{6}}), Error);
    CHECK_THROWS_AS(RatingsMatrix({"u1"}, {"i1"}, {Cell{-1}}), Error);
    CHECK_THROWS_AS(RatingsMatrix({"u1", "u1"}, {"i1"}, {Cell{1}, Cell{2}}), Error);
    CHECK_THROWS_AS(RatingsMatrix({"u1"}, {"i1", "i1"}, {Cell{1}, Cell{2}}), Error);
}
