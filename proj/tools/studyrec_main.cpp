// Command-line front end for the studyrec library: synthetic data
// generation, questionnaire ingestion, user splits, model-selection grid
// search, single-config evaluation and cold-start recommendations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "studyrec/csv.hpp"
#include "studyrec/eval.hpp"
#include "studyrec/predict.hpp"
#include "studyrec/ratings.hpp"
#include "studyrec/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace studyrec;

namespace {

struct Dataset {
    RatingsMatrix ratings;
    ItemCatalog catalog;
    std::vector<std::string> removed_items;
    std::size_t unrated_users = 0;
};

Dataset load_dataset(const std::string& data_path, const std::string& catalog_path,
                     double max_missing) {
    const ItemCatalog catalog = ItemCatalog::load_csv(catalog_path);
    IngestResult ingested = ingest_csv(data_path, LabelMapping::standard(), catalog);
    FilterResult filtered = filter_items(ingested.ratings, max_missing);
    ItemCatalog kept = catalog.subset(filtered.matrix.item_ids());
    return Dataset{std::move(filtered.matrix), std::move(kept),
                   std::move(filtered.removed_items),
                   ingested.unrated_users.size()};
}

void ensure_out_dir(const std::string& out_dir) {
    if (out_dir.empty()) throw Error("--out directory must not be empty");
    fs::create_directories(out_dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::vector<SimilarityMetric> parse_metrics(const std::vector<std::string>& names) {
    std::vector<SimilarityMetric> metrics;
    metrics.reserve(names.size());
    for (const auto& name : names) metrics.push_back(metric_from_string(name));
    return metrics;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

// Flag bundles shared by the experiment subcommands.

struct SplitFlags {
    SplitSpec spec;
    std::optional<std::size_t> train_count;

    void attach(CLI::App* cmd, bool with_cv) {
        cmd->add_option("--train-fraction", spec.train_fraction,
                        "Fraction of users that trains the model")
            ->capture_default_str();
        cmd->add_option("--train-count", train_count,
                        "Exact number of training users (overrides the fraction)");
        cmd->add_option("--seed", spec.seed, "Random seed for every split")
            ->capture_default_str();
        if (with_cv) {
            cmd->add_option("--holdout-fraction", spec.item_holdout_fraction,
                            "Fraction of items hidden per evaluation epoch")
                ->capture_default_str();
            cmd->add_option("--epochs", spec.holdout_epochs,
                            "Number of item-holdout epochs")
                ->capture_default_str();
            cmd->add_option("--folds", spec.cv_folds,
                            "Cross-validation folds on the training users")
                ->capture_default_str();
        }
    }

    SplitSpec resolve() const {
        SplitSpec s = spec;
        s.train_count = train_count;
        return s;
    }
};

struct EvalFlags {
    EvalOptions options;

    void attach(CLI::App* cmd) {
        cmd->add_option("--k", options.k, "Ranking cutoff for precision/recall")
            ->capture_default_str();
        cmd->add_option("--threshold", options.relevance_threshold,
                        "Actual rating that counts as relevant")
            ->capture_default_str();
        cmd->add_option("--min-overlap", options.min_overlap,
                        "Co-rated positions required for a correlation")
            ->capture_default_str();
    }
};

json config_to_json(const HybridConfig& config) {
    json j;
    j["metric"] = to_string(config.metric);
    j["n_neighbors"] = config.n_neighbors;
    j["alpha"] = config.alpha;
    return j;
}

HybridConfig config_from_json(const json& j) {
    HybridConfig config;
    config.metric = metric_from_string(j.at("metric").get<std::string>());
    config.n_neighbors = j.at("n_neighbors").get<std::size_t>();
    config.alpha = j.at("alpha").get<double>();
    config.validate();
    return config;
}

std::vector<std::pair<std::string, std::string>> read_profile(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("profile not found: " + path);
    std::vector<std::pair<std::string, std::string>> responses;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 2) {
            throw Error("profile rows need item_id,answer: " + line);
        }
        const std::string id = trim(fields[0]);
        if (first && id == "item_id") {
            first = false;
            continue;  // optional header
        }
        first = false;
        responses.emplace_back(id, trim(fields[1]));
    }
    return responses;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative-filtering recommender for study-support tools "
                 "and learning strategies"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI file");

    // ---- synth ----------------------------------------------------------
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic rating matrix");
    synth_cmd->configurable();
    SynthSpec synth_spec;
    std::vector<double> synth_affinity;
    double affinity_high = 4.0;
    double affinity_low = 1.0;
    std::string synth_out = "synth_out";
    synth_cmd->add_option("--users", synth_spec.n_users, "Number of users")
        ->capture_default_str();
    synth_cmd->add_option("--items", synth_spec.n_items, "Number of items")
        ->capture_default_str();
    synth_cmd->add_option("--clusters", synth_spec.user_clusters, "User clusters")
        ->capture_default_str();
    synth_cmd->add_option("--groups", synth_spec.item_groups, "Item groups")
        ->capture_default_str();
    synth_cmd->add_option("--affinity", synth_affinity,
                          "Full clusters x groups affinity table, row-major");
    synth_cmd->add_option("--affinity-high", affinity_high,
                          "Diagonal affinity when no full table is given")
        ->capture_default_str();
    synth_cmd->add_option("--affinity-low", affinity_low,
                          "Off-diagonal affinity when no full table is given")
        ->capture_default_str();
    synth_cmd->add_option("--noise-sd", synth_spec.noise_sd, "Gaussian noise sd")
        ->capture_default_str();
    synth_cmd->add_option("--missing-rate", synth_spec.missing_rate,
                          "Probability a cell is missing")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed")
        ->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "Output directory")
        ->capture_default_str();
    synth_cmd->callback([&] {
        if (synth_affinity.empty()) {
            synth_spec.affinity.assign(
                synth_spec.user_clusters * synth_spec.item_groups, affinity_low);
            for (std::size_t c = 0; c < synth_spec.user_clusters; ++c) {
                for (std::size_t g = 0; g < synth_spec.item_groups; ++g) {
                    if (g % synth_spec.user_clusters == c % synth_spec.item_groups) {
                        synth_spec.affinity[c * synth_spec.item_groups + g] =
                            affinity_high;
                    }
                }
            }
        } else {
            synth_spec.affinity = synth_affinity;
        }
        const SynthResult result = generate(synth_spec);
        ensure_out_dir(synth_out);
        result.ratings.save_csv(join_path(synth_out, "ratings.csv"));
        synthetic_catalog(result.ratings.item_ids())
            .save_csv(join_path(synth_out, "catalog.csv"));
        save_truth_csv(result, join_path(synth_out, "truth.csv"));
        std::cout << "wrote " << result.ratings.n_users() << " users x "
                  << result.ratings.n_items() << " items to " << synth_out
                  << " (fingerprint " << result.ratings.fingerprint() << ")\n";
    });

    // ---- ingest ---------------------------------------------------------
    auto* ingest_cmd = app.add_subcommand(
        "ingest", "Read a questionnaire CSV and apply the item filter");
    ingest_cmd->configurable();
    std::string ingest_data;
    std::string ingest_catalog;
    double ingest_max_missing = 0.48;
    std::string ingest_out = "ingest_out";
    ingest_cmd->add_option("--data", ingest_data, "Questionnaire CSV")->required();
    ingest_cmd->add_option("--catalog", ingest_catalog, "Item catalog CSV")
        ->required();
    ingest_cmd
        ->add_option("--max-missing", ingest_max_missing,
                     "Items missing in more than this fraction of users are dropped")
        ->capture_default_str();
    ingest_cmd->add_option("--out", ingest_out, "Output directory")
        ->capture_default_str();
    ingest_cmd->callback([&] {
        const Dataset data =
            load_dataset(ingest_data, ingest_catalog, ingest_max_missing);
        ensure_out_dir(ingest_out);
        data.ratings.save_csv(join_path(ingest_out, "ratings.csv"));
        data.catalog.save_csv(join_path(ingest_out, "catalog.csv"));
        std::string removed;
        for (const auto& id : data.removed_items) removed += id + "\n";
        write_text(join_path(ingest_out, "removed_items.txt"), removed);
        std::cout << "kept " << data.ratings.n_users() << " users x "
                  << data.ratings.n_items() << " items; removed "
                  << data.removed_items.size() << " items; "
                  << data.unrated_users << " users have no ratings\n";
    });

    // ---- split ----------------------------------------------------------
    auto* split_cmd =
        app.add_subcommand("split", "Split users into train and test sets");
    split_cmd->configurable();
    std::string split_data;
    std::string split_catalog;
    double split_max_missing = 0.48;
    std::string split_out = "split_out";
    SplitFlags split_flags;
    split_cmd->add_option("--data", split_data, "Questionnaire CSV")->required();
    split_cmd->add_option("--catalog", split_catalog, "Item catalog CSV")
        ->required();
    split_cmd
        ->add_option("--max-missing", split_max_missing,
                     "Item filter threshold applied before the split")
        ->capture_default_str();
    split_flags.attach(split_cmd, false);
    split_cmd->add_option("--out", split_out, "Output directory")
        ->capture_default_str();
    split_cmd->callback([&] {
        const Dataset data =
            load_dataset(split_data, split_catalog, split_max_missing);
        const auto [train, test] = split_users(data.ratings, split_flags.resolve());
        ensure_out_dir(split_out);
        train.save_csv(join_path(split_out, "train.csv"));
        test.save_csv(join_path(split_out, "test.csv"));
        std::cout << "train " << train.n_users() << " users, test "
                  << test.n_users() << " users\n";
    });

    // ---- gridsearch -----------------------------------------------------
    auto* grid_cmd = app.add_subcommand(
        "gridsearch", "Cross-validated search over metric x neighbors x alpha");
    grid_cmd->configurable();
    std::string grid_data;
    std::string grid_catalog;
    double grid_max_missing = 0.48;
    std::string grid_out = "grid_out";
    std::vector<std::string> grid_metric_names;
    GridSpec grid_spec;
    SplitFlags grid_split;
    EvalFlags grid_eval;
    grid_cmd->add_option("--data", grid_data, "Questionnaire CSV")->required();
    grid_cmd->add_option("--catalog", grid_catalog, "Item catalog CSV")->required();
    grid_cmd
        ->add_option("--max-missing", grid_max_missing,
                     "Item filter threshold applied before the experiment")
        ->capture_default_str();
    grid_cmd->add_option("--metric", grid_metric_names,
                         "Similarity metrics to sweep (default: all three)");
    grid_cmd->add_option("--neighbors", grid_spec.neighbor_counts,
                         "Neighbor counts to sweep");
    grid_cmd->add_option("--alpha", grid_spec.alphas, "Hybrid weights to sweep");
    grid_split.attach(grid_cmd, true);
    grid_eval.attach(grid_cmd);
    grid_cmd->add_option("--out", grid_out, "Output directory")
        ->capture_default_str();
    grid_cmd->callback([&] {
        if (!grid_metric_names.empty()) {
            grid_spec.metrics = parse_metrics(grid_metric_names);
        }
        const Dataset data =
            load_dataset(grid_data, grid_catalog, grid_max_missing);
        const SplitSpec split_spec = grid_split.resolve();
        const EvaluationReport report =
            grid_search(data.ratings, split_spec, grid_spec, grid_eval.options);
        ensure_out_dir(grid_out);
        write_report_csv(report, join_path(grid_out, "grid_report.csv"));
        write_report_json(report, join_path(grid_out, "grid_report.json"));

        const ConfigScore& best = report.rows[report.best_index];
        json best_json = config_to_json(best.config);
        best_json["cv_mae"] = best.mae;
        best_json["test_mae"] = report.test.mae;
        best_json["k"] = grid_eval.options.k;
        best_json["relevance_threshold"] = grid_eval.options.relevance_threshold;
        best_json["min_overlap"] = grid_eval.options.min_overlap;
        write_text(join_path(grid_out, "best_config.json"),
                   best_json.dump(2) + "\n");
        write_text(join_path(grid_out, "run_config.ini"),
                   app.config_to_str(true, true));

        char mae_buf[64];
        std::snprintf(mae_buf, sizeof mae_buf, "%.6f", best.mae);
        std::cout << "best: metric=" << to_string(best.config.metric)
                  << " n=" << best.config.n_neighbors
                  << " alpha=" << best.config.alpha << " cv_mae=" << mae_buf
                  << "\n";
        std::snprintf(mae_buf, sizeof mae_buf, "%.6f", report.test.mae);
        std::cout << "test: mae=" << mae_buf << " (baseline "
                  << report.test.baseline_mae << ", " << report.test.n_pairs
                  << " pairs)\n";
    });

    // ---- evaluate -------------------------------------------------------
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "Evaluate a single config on the held-out test users");
    eval_cmd->configurable();
    std::string eval_data;
    std::string eval_catalog;
    double eval_max_missing = 0.48;
    std::string eval_out = "eval_out";
    std::string eval_metric = "pearson";
    HybridConfig eval_config;
    SplitFlags eval_split;
    EvalFlags eval_eval;
    eval_cmd->add_option("--data", eval_data, "Questionnaire CSV")->required();
    eval_cmd->add_option("--catalog", eval_catalog, "Item catalog CSV")->required();
    eval_cmd
        ->add_option("--max-missing", eval_max_missing,
                     "Item filter threshold applied before the evaluation")
        ->capture_default_str();
    eval_cmd->add_option("--metric", eval_metric, "Similarity metric")
        ->capture_default_str();
    eval_cmd->add_option("--neighbors", eval_config.n_neighbors, "Neighbor count")
        ->capture_default_str();
    eval_cmd->add_option("--alpha", eval_config.alpha, "Hybrid weight")
        ->capture_default_str();
    eval_split.attach(eval_cmd, true);
    eval_eval.attach(eval_cmd);
    eval_cmd->add_option("--out", eval_out, "Output directory")
        ->capture_default_str();
    eval_cmd->callback([&] {
        eval_config.metric = metric_from_string(eval_metric);
        const Dataset data =
            load_dataset(eval_data, eval_catalog, eval_max_missing);
        const SplitSpec split_spec = eval_split.resolve();
        const auto [train, test] = split_users(data.ratings, split_spec);
        const TestMetrics metrics =
            evaluate_config(train, test, eval_config, split_spec, eval_eval.options);
        ensure_out_dir(eval_out);
        json j;
        j["config"] = config_to_json(eval_config);
        j["mae"] = metrics.mae;
        j["rel_err"] = metrics.rel_err;
        j["rel_excluded"] = metrics.rel_excluded;
        j["precision_at_k"] =
            metrics.precision ? json(*metrics.precision) : json(nullptr);
        j["recall_at_k"] = metrics.recall ? json(*metrics.recall) : json(nullptr);
        j["baseline_mae"] = metrics.baseline_mae;
        j["n_pairs"] = metrics.n_pairs;
        j["n_train_users"] = train.n_users();
        j["n_test_users"] = test.n_users();
        write_text(join_path(eval_out, "evaluation.json"), j.dump(2) + "\n");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", metrics.mae);
        std::cout << "mae=" << buf << " over " << metrics.n_pairs << " pairs\n";
    });

    // ---- recommend ------------------------------------------------------
    auto* rec_cmd = app.add_subcommand(
        "recommend", "Rank unanswered items for a new user profile");
    rec_cmd->configurable();
    std::string rec_data;
    std::string rec_catalog;
    double rec_max_missing = 0.48;
    std::string rec_profile;
    std::string rec_model;
    std::string rec_metric = "pearson";
    HybridConfig rec_config;
    std::size_t rec_top_k = 5;
    std::size_t rec_min_overlap = kDefaultMinOverlap;
    std::string rec_out;
    rec_cmd->add_option("--data", rec_data, "Training ratings CSV")->required();
    rec_cmd->add_option("--catalog", rec_catalog, "Item catalog CSV")->required();
    rec_cmd
        ->add_option("--max-missing", rec_max_missing,
                     "Item filter threshold applied to the training data")
        ->capture_default_str();
    rec_cmd
        ->add_option("--profile", rec_profile,
                     "New user's answers as item_id,answer rows")
        ->required();
    rec_cmd->add_option("--model", rec_model,
                        "best_config.json from a grid search");
    rec_cmd->add_option("--metric", rec_metric, "Similarity metric")
        ->capture_default_str();
    rec_cmd->add_option("--neighbors", rec_config.n_neighbors, "Neighbor count")
        ->capture_default_str();
    rec_cmd->add_option("--alpha", rec_config.alpha, "Hybrid weight")
        ->capture_default_str();
    rec_cmd->add_option("--min-overlap", rec_min_overlap,
                        "Co-rated positions required for a correlation")
        ->capture_default_str();
    rec_cmd->add_option("--top-k", rec_top_k, "How many items to recommend")
        ->capture_default_str();
    rec_cmd->add_option("--out", rec_out,
                        "Optional directory for recommendations.json");
    rec_cmd->callback([&] {
        if (!rec_model.empty()) {
            std::ifstream in(rec_model);
            if (!in) throw Error("model not found: " + rec_model);
            json j = json::parse(in);
            rec_config = config_from_json(j);
            if (j.contains("min_overlap")) {
                rec_min_overlap = j["min_overlap"].get<std::size_t>();
            }
        } else {
            rec_config.metric = metric_from_string(rec_metric);
        }
        rec_config.validate();

        const Dataset data = load_dataset(rec_data, rec_catalog, rec_max_missing);
        const UserVector profile =
            cold_start_profile(read_profile(rec_profile), LabelMapping::standard(),
                               data.ratings.item_ids());

        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < profile.size(); ++i) {
            if (!profile[i]) candidates.push_back(i);
        }

        json out_json;
        out_json["config"] = config_to_json(rec_config);
        out_json["recommendations"] = json::array();
        if (candidates.empty()) {
            std::cout << "profile answers every item; nothing left to recommend\n";
        } else {
            RecommendationList recs = predict_hybrid(
                profile, data.ratings, candidates, rec_config, rec_min_overlap);
            if (recs.size() > rec_top_k) recs.resize(rec_top_k);
            for (std::size_t r = 0; r < recs.size(); ++r) {
                const CatalogEntry* entry = data.catalog.find(recs[r].item_id);
                char score[32];
                std::snprintf(score, sizeof score, "%.3f",
                              recs[r].predicted_rating);
                std::cout << r + 1 << ". " << recs[r].item_id << "  " << score
                          << "  " << (entry ? entry->label : "") << "  ["
                          << to_string(recs[r].source) << "]\n";
                json rec_json;
                rec_json["rank"] = r + 1;
                rec_json["item_id"] = recs[r].item_id;
                rec_json["label"] = entry ? entry->label : "";
                rec_json["predicted_rating"] = recs[r].predicted_rating;
                rec_json["source"] = to_string(recs[r].source);
                out_json["recommendations"].push_back(rec_json);
            }
        }
        if (!rec_out.empty()) {
            ensure_out_dir(rec_out);
            write_text(join_path(rec_out, "recommendations.json"),
                       out_json.dump(2) + "\n");
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
