#pragma once

#include <string>

#include "locenc/dataset.hpp"
#include "locenc/encoders.hpp"
#include "locenc/geobias.hpp"
#include "locenc/json_io.hpp"
#include "locenc/train.hpp"

namespace locenc {

/// Fully-resolved run configuration. One top-level seed feeds named
/// sub-seeds (train, anchors, permutations); unknown JSON keys are rejected.
struct RunConfig {
    Task task = Task::Classify;
    std::uint64_t seed = 0;
    EncoderSpec encoder = EncoderSpec::defaults(EncoderKind::SphereC);
    std::string nn_arch = "auto"; // auto: wrap->residual4, sph. harmonics->siren, else ffn
    NnConfig nn;
    nn::TrainConfig train;
    GeoBiasConfig geobias;
    bool geobias_radius_set = false;
    bool geobias_rule_set = false;
    std::string dataset_path;
    std::string image_logprobs_path;
    std::string image_embeddings_path;
    std::string output_dir = "out";
    std::string eval_split = "test";
};

/// Parse + validate; every field has a documented default.
/// Throws ConfigError on unknown keys or bad values.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Fill in task-dependent pieces: sub-seeds, geobias radius (100 km classify
/// / 1000 km regress) and low-perf rule, and the nn arch when "auto".
void resolve_run_config(RunConfig& cfg);

/// The resolved config as pretty JSON, echoed into the output directory.
ordered_json run_config_to_json(const RunConfig& cfg);

} // namespace locenc
