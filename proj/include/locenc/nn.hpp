#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace locenc::nn {

enum class Arch { Ffn, Residual4, Siren, Table };
enum class Activation { Relu, LeakyRelu, Sigmoid, Sine };

const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);
const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kSirenOmega0 = 30.0;

/// Weights of the learnable head NN(.) mapping PE(x) in R^W to R^d.
///
/// Layer shapes (weights are out x in, biases out):
///   ffn / siren:  [k x in], (h-1) x [k x k], [d x k]; h = 0 is a single
///                 linear [d x in].
///   residual4:    projection [k x in], 4 blocks of {W1 [k x k], W2 [k x k]},
///                 output [d x k].
///   table:        no dense layers; embedding_table is (vocab+1) x d with the
///                 last row shared by out-of-vocabulary cells and initialized
///                 to zero.
struct MlpParams {
    Arch arch = Arch::Ffn;
    Activation activation = Activation::Relu;
    int in_dim = 0;
    int k = 0;
    int h = 0;
    int d = 0;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd embedding_table;      // tile only
    std::vector<std::int64_t> vocab;      // sorted cell ids, tile only
};

/// Gradients, same shapes as the parameters they mirror.
struct MlpGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd embedding_table;
};

/// Glorot-uniform init for ffn/residual4, the sine-network scheme for siren
/// (first layer U(-1/in, 1/in), omega0 = 30). Biases start at zero.
/// Deterministic given seed. Throws DomainError on non-positive dims.
MlpParams init_params(Arch arch, int in_dim, int k, int h, int d, std::uint64_t seed,
                      Activation activation = Activation::Relu);

/// Embedding-table params for the tile encoder. vocab must be sorted and
/// duplicate-free. In-vocabulary rows start at small seeded uniform values
/// (a zero table cannot pass gradients through a relu head); the shared OOV
/// row stays zero ("no prior").
MlpParams init_tile_params(std::vector<std::int64_t> vocab, int d, std::uint64_t seed = 0);

/// Row of the embedding table for a cell id; OOV cells share the last row.
Eigen::Index table_row(const MlpParams& params, std::int64_t cell);

/// Eval-mode forward for one input. Throws ShapeError on length mismatch.
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& pe);

/// Eval-mode forward for a tile cell index.
Eigen::VectorXd forward(const MlpParams& params, std::int64_t cell);

/// Everything backprop needs from a forward pass over a batch.
struct ForwardCache {
    Eigen::MatrixXd input;                 // in x B (dense archs)
    std::vector<Eigen::MatrixXd> pre;      // pre-activations per hidden stage
    std::vector<Eigen::MatrixXd> post;     // activation outputs per hidden stage
    std::vector<Eigen::MatrixXd> res_in;   // residual4: block inputs y_i
    std::vector<Eigen::MatrixXd> masks;    // dropout masks (already scaled), may be empty
    std::vector<std::int64_t> cells;       // tile batch
    Eigen::MatrixXd out;                   // d x B
};

/// Batched forward. dropout_p > 0 applies inverted dropout inside residual
/// blocks (only residual4 uses it); pass 0 for eval semantics.
ForwardCache forward_batch(const MlpParams& params, const Eigen::MatrixXd& input,
                           double dropout_p = 0.0, std::uint64_t dropout_seed = 0);

ForwardCache forward_batch(const MlpParams& params, const std::vector<std::int64_t>& cells);

/// Exact reverse-mode gradients of the forward composition.
/// grad_out is d x B, the gradient of the scalar loss w.r.t. the output.
/// When grad_input is non-null it receives dL/d(input), in x B (dense archs
/// only), so networks can be chained.
MlpGrads backprop(const MlpParams& params, const ForwardCache& cache,
                  const Eigen::MatrixXd& grad_out, Eigen::MatrixXd* grad_input = nullptr);

MlpGrads zero_grads_like(const MlpParams& params);

/// Numerically stable softmax cross-entropy. Returns (loss, grad wrt logits);
/// grad = softmax(logits) - one_hot(label). Throws IndexError.
std::pair<double, Eigen::VectorXd> loss_softmax_ce(const Eigen::VectorXd& logits, int label);

/// Batch version; loss is the mean over columns and the gradient carries the
/// 1/B factor.
std::pair<double, Eigen::MatrixXd> loss_softmax_ce_batch(const Eigen::MatrixXd& logits,
                                                         const std::vector<int>& labels);

/// loss = (pred - target)^2, grad = 2 (pred - target).
std::pair<double, double> loss_mse(double pred, double target);

/// Column-normalized log-softmax, for turning trained logits into log P(y|x).
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 30;
    int batch_size = 512;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    double dropout_p = 0.5; // residual blocks only
};

void validate_train_config(const TrainConfig& cfg); // throws DomainError

/// First/second moment accumulators, one flat vector per parameter array.
struct AdamState {
    std::vector<Eigen::VectorXd> m;
    std::vector<Eigen::VectorXd> v;
};

AdamState init_adam_state(const MlpParams& params);

/// One bias-corrected Adam step (t is 1-based). Rejects non-finite gradients
/// before touching any parameter. Throws NaNGradError.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               const TrainConfig& config, int t);

/// Central-difference gradient verification of the scalar training loss
/// (softmax CE when label >= 0, squared error against `target` on output 0
/// otherwise) over every parameter. Returns the max relative error.
struct FdTarget {
    int label = -1;       // >= 0 selects classification loss
    double target = 0.0;  // used when label < 0 (requires d == 1 semantics on out[0])
};

double finite_diff_check(const MlpParams& params, const Eigen::VectorXd& pe, FdTarget target,
                         double h);

} // namespace locenc::nn
