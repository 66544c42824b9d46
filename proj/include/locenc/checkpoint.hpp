#pragma once

#include <optional>
#include <string>

#include "locenc/dataset.hpp"
#include "locenc/encoders.hpp"
#include "locenc/nn.hpp"

namespace locenc {

/// Everything needed to re-run a trained model: the location head, the
/// optional image-fusion parts (regression), and the encoder spec plus its
/// sampled aux so PE(x) is reproducible without the training data.
struct Checkpoint {
    Task task = Task::Classify;
    nn::MlpParams loc;
    std::optional<nn::MlpParams> proj; // linear image projection (regression)
    std::optional<nn::MlpParams> head; // fusion head (regression)
    EncoderSpec spec;
    EncoderAux aux;
    int n_classes = 0;
};

/// Versioned little-endian binary: header (magic "TSPM", version, task,
/// component flags, arch tags, dims) followed by the parameter arrays in
/// declaration order. A sidecar `<path>.json` carries the EncoderSpec, aux,
/// task, and class count.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path); // throws ParseError

} // namespace locenc
