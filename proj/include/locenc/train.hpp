#pragma once

#include <optional>
#include <vector>

#include "locenc/checkpoint.hpp"
#include "locenc/dataset.hpp"
#include "locenc/encoders.hpp"
#include "locenc/metrics.hpp"
#include "locenc/nn.hpp"

namespace locenc {

/// Architecture of the learnable head paired with an encoder.
struct NnConfig {
    nn::Arch arch = nn::Arch::Ffn;
    nn::Activation activation = nn::Activation::Relu;
    int k = 64;
    int h = 1;
    int d = 64; // location-embedding width (classification overrides with C)
};

struct TrainLogEntry {
    int epoch = 0;
    double loss = 0.0;
};

struct TrainLog {
    std::vector<TrainLogEntry> epochs;
    bool convergence_warning = false; // final epoch loss > initial epoch loss
};

/// PE(x) for a record set: a dense matrix for the sinusoidal/kernel kinds or
/// cell indices for tile.
struct EncodedInputs {
    bool is_table = false;
    Eigen::MatrixXd pe;              // W x N
    std::vector<std::int64_t> cells; // tile
};

/// Samples the encoder aux (rbf anchors from the train split, rff params)
/// using spec.seed; monostate for the deterministic kinds.
EncoderAux make_encoder_aux(const EncoderSpec& spec,
                            const std::vector<const DatasetRecord*>& train_records);

EncodedInputs encode_records(const EncoderSpec& spec, const EncoderAux& aux,
                             const std::vector<const DatasetRecord*>& records);

/// Trains NN(PE(x)) -> class logits with softmax cross-entropy on the train
/// split. The returned checkpoint carries spec + aux; log records per-epoch
/// mean loss. Throws DegenerateDatasetError when the train split has fewer
/// than two classes.
std::pair<Checkpoint, TrainLog> train_location_classifier(const Dataset& dataset,
                                                          const EncoderSpec& spec,
                                                          const NnConfig& nn_cfg,
                                                          const nn::TrainConfig& train_cfg);

/// log P(y|x) columns for each record under a trained classifier.
Eigen::MatrixXd location_logprob_matrix(const Checkpoint& ckpt,
                                        const std::vector<const DatasetRecord*>& records);

/// Trains the regression model: Enc(x) when no image embeddings are given,
/// otherwise head(proj(e) ⊙ Enc(x)) with a 2-layer fusion head, MSE loss.
/// image_embeddings may be nullptr.
std::pair<Checkpoint, TrainLog> train_location_regressor(const Dataset& dataset,
                                                         const EncoderSpec& spec,
                                                         const NnConfig& nn_cfg,
                                                         const nn::TrainConfig& train_cfg,
                                                         const VectorTable* image_embeddings);

/// Predictions for a record set; img columns must align with records when the
/// checkpoint was trained with an image projection.
Eigen::VectorXd regressor_predictions(const Checkpoint& ckpt,
                                      const std::vector<const DatasetRecord*>& records,
                                      const Eigen::MatrixXd* img);

} // namespace locenc
