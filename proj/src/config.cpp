#include "locenc/config.hpp"

#include <fstream>
#include <set>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        reject_unknown(j, {"task", "seed", "encoder", "nn", "train", "geobias", "paths",
                           "eval_split"},
                       "config");
        if (j.contains("task")) cfg.task = task_from_name(j.at("task").get<std::string>());
        maybe(j, "seed", cfg.seed);
        maybe(j, "eval_split", cfg.eval_split);
        split_from_name(cfg.eval_split); // validates

        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            reject_unknown(
                e, {"kind", "S", "r_min", "r_max", "W_dim", "sigma", "delta", "L", "cell_deg"},
                "config.encoder");
            const auto kind = e.contains("kind")
                                  ? encoder_kind_from_name(e.at("kind").get<std::string>())
                                  : EncoderKind::SphereC;
            cfg.encoder = EncoderSpec::defaults(kind);
            maybe(e, "S", cfg.encoder.S);
            maybe(e, "r_min", cfg.encoder.r_min);
            maybe(e, "r_max", cfg.encoder.r_max);
            maybe(e, "W_dim", cfg.encoder.W_dim);
            maybe(e, "sigma", cfg.encoder.sigma);
            maybe(e, "delta", cfg.encoder.delta);
            maybe(e, "L", cfg.encoder.L);
            maybe(e, "cell_deg", cfg.encoder.cell_deg);
            validate_spec(cfg.encoder);
        }

        if (j.contains("nn")) {
            const auto& n = j.at("nn");
            reject_unknown(n, {"arch", "activation", "k", "h", "d", "dropout"}, "config.nn");
            maybe(n, "arch", cfg.nn_arch);
            if (cfg.nn_arch != "auto") cfg.nn.arch = nn::arch_from_name(cfg.nn_arch);
            if (n.contains("activation")) {
                cfg.nn.activation =
                    nn::activation_from_name(n.at("activation").get<std::string>());
            }
            maybe(n, "k", cfg.nn.k);
            maybe(n, "h", cfg.nn.h);
            maybe(n, "d", cfg.nn.d);
            maybe(n, "dropout", cfg.train.dropout_p);
            if (cfg.nn.k < 1 || cfg.nn.h < 0 || cfg.nn.d < 1) {
                throw ConfigError("nn dims out of range");
            }
        }

        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t, {"lr", "epochs", "batch_size", "weight_decay"}, "config.train");
            maybe(t, "lr", cfg.train.lr);
            maybe(t, "epochs", cfg.train.epochs);
            maybe(t, "batch_size", cfg.train.batch_size);
            maybe(t, "weight_decay", cfg.train.weight_decay);
            nn::validate_train_config(cfg.train);
        }

        if (j.contains("geobias")) {
            const auto& g = j.at("geobias");
            reject_unknown(g,
                           {"radius_km", "k", "n_permutations", "background_spacing_km", "p_min",
                            "max_centers", "low_perf_rule"},
                           "config.geobias");
            if (g.contains("radius_km")) {
                cfg.geobias.radius_km = g.at("radius_km").get<double>();
                cfg.geobias_radius_set = true;
            }
            maybe(g, "k", cfg.geobias.k);
            maybe(g, "n_permutations", cfg.geobias.n_permutations);
            maybe(g, "background_spacing_km", cfg.geobias.background_spacing_km);
            maybe(g, "p_min", cfg.geobias.p_min);
            maybe(g, "max_centers", cfg.geobias.max_centers);
            if (g.contains("low_perf_rule")) {
                cfg.geobias.low_perf_rule =
                    LowPerfRule::parse(g.at("low_perf_rule").get<std::string>());
                cfg.geobias_rule_set = true;
            }
        }

        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            reject_unknown(p, {"dataset", "image_logprobs", "image_embeddings", "output_dir"},
                           "config.paths");
            maybe(p, "dataset", cfg.dataset_path);
            maybe(p, "image_logprobs", cfg.image_logprobs_path);
            maybe(p, "image_embeddings", cfg.image_embeddings_path);
            maybe(p, "output_dir", cfg.output_dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(j);
}

void resolve_run_config(RunConfig& cfg) {
    cfg.encoder.seed = mix_seed(cfg.seed, "anchors");
    cfg.train.seed = mix_seed(cfg.seed, "train");
    cfg.geobias.seed = mix_seed(cfg.seed, "permutations");
    if (!cfg.geobias_radius_set) {
        cfg.geobias.radius_km = cfg.task == Task::Classify ? 100.0 : 1000.0;
    }
    if (!cfg.geobias_rule_set) {
        cfg.geobias.low_perf_rule =
            cfg.task == Task::Classify
                ? LowPerfRule{LowPerfRule::Kind::Hit1Miss, 1.0}
                : LowPerfRule{LowPerfRule::Kind::AbsErrOverSigma, 1.0};
    }
    if (cfg.nn_arch == "auto") {
        switch (cfg.encoder.kind) {
            case EncoderKind::Wrap: cfg.nn.arch = nn::Arch::Residual4; break;
            case EncoderKind::SphericalHarmonics:
                cfg.nn.arch = nn::Arch::Siren;
                cfg.nn.activation = nn::Activation::Sine;
                break;
            case EncoderKind::Tile: cfg.nn.arch = nn::Arch::Table; break;
            default: cfg.nn.arch = nn::Arch::Ffn; break;
        }
        cfg.nn_arch = nn::arch_name(cfg.nn.arch);
    }
    validate_geobias_config(cfg.geobias);
}

ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["task"] = task_name(cfg.task);
    j["seed"] = cfg.seed;
    j["eval_split"] = cfg.eval_split;
    j["encoder"] = encoder_spec_to_json(cfg.encoder);
    j["nn"] = {{"arch", cfg.nn_arch},
               {"activation", nn::activation_name(cfg.nn.activation)},
               {"k", cfg.nn.k},
               {"h", cfg.nn.h},
               {"d", cfg.nn.d},
               {"dropout", cfg.train.dropout_p}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"weight_decay", cfg.train.weight_decay},
                  {"seed", cfg.train.seed}};
    j["geobias"] = {{"radius_km", cfg.geobias.radius_km},
                    {"k", cfg.geobias.k},
                    {"n_permutations", cfg.geobias.n_permutations},
                    {"background_spacing_km", cfg.geobias.resolved_spacing_km()},
                    {"p_min", cfg.geobias.p_min},
                    {"max_centers", cfg.geobias.max_centers},
                    {"low_perf_rule", cfg.geobias.low_perf_rule.to_string()},
                    {"seed", cfg.geobias.seed}};
    j["paths"] = {{"dataset", cfg.dataset_path},
                  {"image_logprobs", cfg.image_logprobs_path},
                  {"image_embeddings", cfg.image_embeddings_path},
                  {"output_dir", cfg.output_dir}};
    return j;
}

} // namespace locenc
