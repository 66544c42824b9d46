// locenc: deterministic CLI for location-encoder training, benchmark
// evaluation, and geo-bias scoring. Exit codes: 0 success, 1 runtime
// failure, 2 usage/config failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "locenc/checkpoint.hpp"
#include "locenc/config.hpp"
#include "locenc/dataset.hpp"
#include "locenc/errors.hpp"
#include "locenc/geobias.hpp"
#include "locenc/hotspot.hpp"
#include "locenc/json_io.hpp"
#include "locenc/metrics.hpp"
#include "locenc/synth.hpp"
#include "locenc/train.hpp"

namespace fs = std::filesystem;
using namespace locenc;

namespace {

/// Usage-class failures (bad flags, config, schemas, input validation) exit
/// 2; anything else that throws exits 1.
template <typename Fn>
int run_guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const JoinError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NonFiniteError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

ordered_json metrics_to_json(const MetricsReport& m) {
    ordered_json j;
    if (m.task == Task::Classify) {
        j["task"] = "classification";
        j["n"] = m.n;
        j["top1"] = m.top1;
        j["top3"] = m.top3;
        j["mrr"] = m.mrr;
    } else {
        j["task"] = "regression";
        j["n"] = m.n;
        j["r2"] = m.r2;
        j["mae"] = m.mae;
        j["rmse"] = m.rmse;
    }
    return j;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

RunConfig load_common_config(const CommonFlags& flags, bool config_required) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = load_run_config(flags.config_path);
    } else if (config_required) {
        throw ConfigError("--config is required for this command");
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
    resolve_run_config(cfg);
    return cfg;
}

int cmd_train(const CommonFlags& flags) {
    RunConfig cfg = load_common_config(flags, true);
    if (cfg.dataset_path.empty()) throw ConfigError("config.paths.dataset is required");
    const Dataset dataset = load_dataset_csv(cfg.dataset_path, cfg.task);

    ensure_dir(cfg.output_dir);
    write_text(cfg.output_dir + "/config.json", run_config_to_json(cfg).dump(2) + "\n");

    Checkpoint ckpt;
    TrainLog log;
    if (cfg.task == Task::Classify) {
        std::tie(ckpt, log) =
            train_location_classifier(dataset, cfg.encoder, cfg.nn, cfg.train);
    } else {
        std::optional<VectorTable> emb;
        if (!cfg.image_embeddings_path.empty()) {
            emb = load_vector_csv(cfg.image_embeddings_path, "e");
        }
        std::tie(ckpt, log) = train_location_regressor(dataset, cfg.encoder, cfg.nn, cfg.train,
                                                       emb ? &*emb : nullptr);
    }

    save_checkpoint(cfg.output_dir + "/checkpoint.bin", ckpt);
    std::string log_csv = "epoch,loss\n";
    for (const auto& e : log.epochs) {
        log_csv += std::to_string(e.epoch) + "," + format_double(e.loss) + "\n";
    }
    write_text(cfg.output_dir + "/train_log.csv", log_csv);
    if (log.convergence_warning) {
        std::cerr << "warning: final training loss exceeds initial loss\n";
    }
    std::cout << "checkpoint written to " << cfg.output_dir << "/checkpoint.bin\n";
    return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_path,
                 const std::string& split_flag) {
    RunConfig cfg = load_common_config(flags, true);
    if (!split_flag.empty()) cfg.eval_split = split_flag;
    const Split split = split_from_name(cfg.eval_split);

    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.task != cfg.task) {
        throw ConfigError("checkpoint task does not match config task");
    }
    if (encoder_spec_to_json(ckpt.spec) != encoder_spec_to_json(cfg.encoder)) {
        throw ConfigError("checkpoint EncoderSpec does not match config (same config and seed "
                          "used for training are required)");
    }
    if (cfg.dataset_path.empty()) throw ConfigError("config.paths.dataset is required");
    const Dataset dataset = load_dataset_csv(cfg.dataset_path, cfg.task);
    const auto records = dataset.split_view(split);
    if (records.empty()) throw ConfigError("split '" + cfg.eval_split + "' has no records");

    ensure_dir(cfg.output_dir);
    ordered_json metrics;
    std::vector<PredictionRow> rows;
    rows.reserve(records.size());

    if (cfg.task == Task::Classify) {
        if (dataset.n_classes != ckpt.n_classes) {
            throw ConfigError("dataset class count differs from checkpoint");
        }
        const Eigen::MatrixXd loc_lp = location_logprob_matrix(ckpt, records);
        std::vector<ScoredRecord> loc_scored;
        loc_scored.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            loc_scored.emplace_back(loc_lp.col(static_cast<Eigen::Index>(i)),
                                    records[i]->label);
        }
        metrics["location_only"] = metrics_to_json(classification_metrics(loc_scored));

        const Eigen::MatrixXd* ranking = &loc_lp;
        Eigen::MatrixXd combined_lp;
        if (!cfg.image_logprobs_path.empty()) {
            const VectorTable img = load_vector_csv(cfg.image_logprobs_path, "logp");
            if (img.dim != dataset.n_classes) {
                throw SchemaError("image logprob width " + std::to_string(img.dim) +
                                  " != class count " + std::to_string(dataset.n_classes));
            }
            const Eigen::MatrixXd img_lp = join_by_id(img, records);
            std::vector<ScoredRecord> img_scored;
            std::vector<ScoredRecord> comb_scored;
            combined_lp.resize(img_lp.rows(), img_lp.cols());
            for (std::size_t i = 0; i < records.size(); ++i) {
                const auto col = static_cast<Eigen::Index>(i);
                combined_lp.col(col) = combine_priors(img_lp.col(col), loc_lp.col(col));
                img_scored.emplace_back(img_lp.col(col), records[i]->label);
                comb_scored.emplace_back(combined_lp.col(col), records[i]->label);
            }
            metrics["image_only"] = metrics_to_json(classification_metrics(img_scored));
            metrics["combined"] = metrics_to_json(classification_metrics(comb_scored));
            ranking = &combined_lp;
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            PredictionRow row;
            row.id = records[i]->id;
            row.loc = records[i]->loc;
            row.rank =
                rank_of_label(ranking->col(static_cast<Eigen::Index>(i)), records[i]->label);
            row.hit1 = row.rank == 1 ? 1 : 0;
            rows.push_back(std::move(row));
        }
    } else {
        Eigen::VectorXd preds;
        if (ckpt.proj) {
            if (cfg.image_embeddings_path.empty()) {
                throw ConfigError(
                    "checkpoint fuses image embeddings; config.paths.image_embeddings required");
            }
            const VectorTable emb = load_vector_csv(cfg.image_embeddings_path, "e");
            const Eigen::MatrixXd img = join_by_id(emb, records);
            preds = regressor_predictions(ckpt, records, &img);
        } else {
            preds = regressor_predictions(ckpt, records, nullptr);
        }
        Eigen::VectorXd targets(static_cast<Eigen::Index>(records.size()));
        for (std::size_t i = 0; i < records.size(); ++i) {
            targets[static_cast<Eigen::Index>(i)] = records[i]->target;
        }
        const MetricsReport rep = regression_report(preds, targets);
        metrics[ckpt.proj ? "combined" : "location_only"] = metrics_to_json(rep);
        for (std::size_t i = 0; i < records.size(); ++i) {
            PredictionRow row;
            row.id = records[i]->id;
            row.loc = records[i]->loc;
            row.abs_err = std::abs(preds[static_cast<Eigen::Index>(i)] -
                                   targets[static_cast<Eigen::Index>(i)]);
            rows.push_back(std::move(row));
        }
    }

    write_text(cfg.output_dir + "/metrics.json", metrics.dump(2) + "\n");
    save_predictions_csv(cfg.output_dir + "/predictions.csv", rows);
    std::cout << "metrics written to " << cfg.output_dir << "/metrics.json\n";
    return 0;
}

int cmd_geobias(const CommonFlags& flags, const std::string& predictions_path,
                const std::string& centers_csv, const std::optional<double>& radius_flag,
                const std::optional<int>& k_flag, const std::optional<int>& nperm_flag,
                const std::optional<int>& max_centers_flag, const std::string& rule_flag) {
    RunConfig cfg = load_common_config(flags, false);
    const std::vector<PredictionRow> rows = load_predictions_csv(predictions_path);
    if (rows.empty()) throw TooFewPointsError("predictions file has no rows");

    // Task defaults follow what the predictions actually contain.
    const bool rows_cls = rows.front().is_classification();
    if (!cfg.geobias_radius_set && !radius_flag) {
        cfg.geobias.radius_km = rows_cls ? 100.0 : 1000.0;
    }
    if (!cfg.geobias_rule_set && rule_flag.empty()) {
        cfg.geobias.low_perf_rule = rows_cls
                                        ? LowPerfRule{LowPerfRule::Kind::Hit1Miss, 1.0}
                                        : LowPerfRule{LowPerfRule::Kind::AbsErrOverSigma, 1.0};
    }
    if (radius_flag) cfg.geobias.radius_km = *radius_flag;
    if (k_flag) cfg.geobias.k = *k_flag;
    if (nperm_flag) cfg.geobias.n_permutations = *nperm_flag;
    if (max_centers_flag) cfg.geobias.max_centers = *max_centers_flag;
    if (!rule_flag.empty()) cfg.geobias.low_perf_rule = LowPerfRule::parse(rule_flag);
    validate_geobias_config(cfg.geobias);

    ensure_dir(cfg.output_dir);
    ordered_json out;
    const auto echo_config = [&](ordered_json& j) {
        j["radius_km"] = cfg.geobias.radius_km;
        j["k"] = cfg.geobias.k;
        j["n_permutations"] = cfg.geobias.n_permutations;
        j["seed"] = cfg.geobias.seed;
        j["low_perf_rule"] = cfg.geobias.low_perf_rule.to_string();
    };

    const std::vector<PerfLabeledPoint> labeled =
        binarize_performance(rows, cfg.geobias.low_perf_rule);
    try {
        const GeoBiasReport report = geo_bias_report(labeled, cfg.geobias);
        out["no_low_perf"] = false;
        out["base_mean"] = report.base_mean;
        out["rel_mean"] = report.rel_mean;
        out["n_centers"] = report.n_centers;
        out["n_skipped"] = report.n_skipped;
        echo_config(out);
        if (!centers_csv.empty()) {
            std::string csv = "center_id,lon,lat,n_neighborhood,base,rel,skipped\n";
            for (const auto& c : report.centers) {
                csv += std::to_string(c.center_index) + "," + format_double(c.loc.lon) + "," +
                       format_double(c.loc.lat) + "," + std::to_string(c.n_neighborhood) + "," +
                       format_double(c.base) + "," + format_double(c.rel) + "," +
                       (c.skipped ? "1" : "0") + "\n";
            }
            write_text(centers_csv, csv);
        }
    } catch (const NoLowPerfError&) {
        // A perfect model is not an error.
        out["no_low_perf"] = true;
        out["base_mean"] = nullptr;
        out["rel_mean"] = nullptr;
        out["n_centers"] = 0;
        out["n_skipped"] = 0;
        echo_config(out);
    }
    write_text(cfg.output_dir + "/geobias.json", out.dump(2) + "\n");
    std::cout << "geo-bias report written to " << cfg.output_dir << "/geobias.json\n";
    return 0;
}

int cmd_hotspot(const CommonFlags& flags, const std::string& predictions_path, int k) {
    RunConfig cfg = load_common_config(flags, false);
    const std::vector<PredictionRow> rows = load_predictions_csv(predictions_path);
    if (rows.size() < 3) throw TooFewPointsError("hotspot needs at least 3 predictions");

    std::vector<LocationDeg> locs;
    locs.reserve(rows.size());
    Eigen::VectorXd values(static_cast<Eigen::Index>(rows.size()));
    const bool rows_cls = rows.front().is_classification();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        locs.push_back(rows[i].loc);
        values[static_cast<Eigen::Index>(i)] =
            rows_cls ? static_cast<double>(rows[i].hit1) : rows[i].abs_err;
    }
    const WeightMatrix W = knn_weights(locs, k);
    const GiStarResult gi = getis_ord_gi_star(values, W);

    ensure_dir(cfg.output_dir);
    std::string csv = "id,lon,lat,z,bin\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv += rows[i].id + "," + format_double(rows[i].loc.lon) + "," +
               format_double(rows[i].loc.lat) + "," +
               format_double(gi.z[static_cast<Eigen::Index>(i)]) + "," + gi.bins[i] + "\n";
    }
    write_text(cfg.output_dir + "/hotspot.csv", csv);
    std::cout << "hot-spot table written to " << cfg.output_dir << "/hotspot.csv\n";
    return 0;
}

int cmd_synth(const CommonFlags& flags, const std::string& kind_str, int n,
              const SynthParams& params, const std::string& output_file) {
    RunConfig cfg = load_common_config(flags, false);
    const SynthKind kind = synth_kind_from_name(kind_str);
    const Dataset dataset = synth_dataset(kind, n, params, cfg.seed);
    ensure_dir(cfg.output_dir);
    const std::string path =
        output_file.empty() ? cfg.output_dir + "/dataset.csv" : output_file;
    save_dataset_csv(path, dataset);
    std::cout << "dataset written to " << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"location encoding toolkit: encoders, benchmark harness, geo-bias scores"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    CommonFlags flags;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--config", flags.config_path, "JSON config file")->expected(1);
    app.add_option("--seed", seed_flag, "override the top-level seed");
    app.add_option("--out", flags.out_dir, "output directory override");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    std::string synth_kind;
    int synth_n = 0;
    SynthParams synth_params;
    std::string synth_output;
    synth->add_option("--kind", synth_kind,
                      "sector_classes|cluster_classes|smooth_field|biased_clusters")
        ->required();
    synth->add_option("--n", synth_n, "number of records")->required()->check(CLI::PositiveNumber);
    synth->add_option("--classes", synth_params.classes, "class count");
    synth->add_option("--clusters", synth_params.clusters, "cluster count");
    synth->add_option("--noise-sigma", synth_params.noise_sigma, "smooth_field noise std");
    synth->add_option("--spread-deg", synth_params.spread_deg, "cluster angular spread");
    synth->add_option("--disc-radius-km", synth_params.disc_radius_km, "cluster cap radius");
    synth->add_option("--train-frac", synth_params.train_frac, "train fraction");
    synth->add_option("--val-frac", synth_params.val_frac, "val fraction");
    synth->add_option("--output", synth_output, "explicit output CSV path");

    auto* train = app.add_subcommand("train", "train a location model from a config");

    auto* evaluate = app.add_subcommand("evaluate", "compute metrics and predictions");
    std::string eval_checkpoint;
    std::string eval_split;
    evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
    evaluate->add_option("--split", eval_split, "train|val|test (default test)");

    auto* geobias = app.add_subcommand("geobias", "geo-bias scores from predictions");
    std::string gb_predictions;
    std::string gb_centers_csv;
    std::string gb_rule;
    std::optional<double> gb_radius;
    std::optional<int> gb_k;
    std::optional<int> gb_nperm;
    std::optional<int> gb_max_centers;
    geobias->add_option("--predictions", gb_predictions, "predictions CSV")->required();
    geobias->add_option("--radius-km", gb_radius, "neighborhood radius");
    geobias->add_option("--k", gb_k, "k-NN weight matrix k");
    geobias->add_option("--n-permutations", gb_nperm, "permutation count");
    geobias->add_option("--max-centers", gb_max_centers, "subsample centers");
    geobias->add_option("--rule", gb_rule,
                        "hit1_miss | abs_err_over_sigma(c) | abs_err_over_percentile(p)");
    geobias->add_option("--centers-csv", gb_centers_csv, "write per-center diagnostics CSV");

    auto* hotspot = app.add_subcommand("hotspot", "Getis-Ord Gi* hot/cold spot table");
    std::string hs_predictions;
    int hs_k = 4;
    hotspot->add_option("--predictions", hs_predictions, "predictions CSV")->required();
    hotspot->add_option("--k", hs_k, "k-NN weight matrix k")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    flags.seed = seed_flag;

    if (synth->parsed()) {
        return run_guarded([&] { return cmd_synth(flags, synth_kind, synth_n, synth_params,
                                                  synth_output); });
    }
    if (train->parsed()) {
        return run_guarded([&] { return cmd_train(flags); });
    }
    if (evaluate->parsed()) {
        return run_guarded([&] { return cmd_evaluate(flags, eval_checkpoint, eval_split); });
    }
    if (geobias->parsed()) {
        return run_guarded([&] {
            return cmd_geobias(flags, gb_predictions, gb_centers_csv, gb_radius, gb_k, gb_nperm,
                               gb_max_centers, gb_rule);
        });
    }
    if (hotspot->parsed()) {
        return run_guarded([&] { return cmd_hotspot(flags, hs_predictions, hs_k); });
    }
    return 2;
}
