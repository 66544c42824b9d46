#include "locenc/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<LocationDeg> locations_of(const std::vector<const DatasetRecord*>& records) {
    std::vector<LocationDeg> locs;
    locs.reserve(records.size());
    for (const auto* r : records) locs.push_back(r->loc);
    return locs;
}

MatrixXd gather_cols(const MatrixXd& m, const std::vector<std::size_t>& idx, std::size_t lo,
                     std::size_t hi) {
    MatrixXd out(m.rows(), static_cast<Index>(hi - lo));
    for (std::size_t i = lo; i < hi; ++i) {
        out.col(static_cast<Index>(i - lo)) = m.col(static_cast<Index>(idx[i]));
    }
    return out;
}

/// Shuffled mini-batch schedule shared by both training loops.
struct BatchPlan {
    std::vector<std::size_t> order;
    std::size_t batch_size;

    void reshuffle(std::uint64_t seed) {
        std::mt19937_64 eng(seed);
        shuffle_in_place(order, eng);
    }
};

} // namespace

EncoderAux make_encoder_aux(const EncoderSpec& spec,
                            const std::vector<const DatasetRecord*>& train_records) {
    switch (spec.kind) {
        case EncoderKind::Rbf:
            return sample_rbf_anchors(locations_of(train_records), spec.W_dim, spec.seed);
        case EncoderKind::Rff:
            return sample_rff_params(spec.W_dim, spec.delta, spec.seed);
        default:
            return std::monostate{};
    }
}

EncodedInputs encode_records(const EncoderSpec& spec, const EncoderAux& aux,
                             const std::vector<const DatasetRecord*>& records) {
    EncodedInputs enc;
    if (spec.kind == EncoderKind::Tile) {
        enc.is_table = true;
        enc.cells.reserve(records.size());
        for (const auto* r : records) enc.cells.push_back(tile_cell_index(spec, r->loc));
        return enc;
    }
    enc.pe.resize(output_dim(spec), static_cast<Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        enc.pe.col(static_cast<Index>(i)) = encode_position(spec, records[i]->loc, aux);
    }
    return enc;
}

namespace {

nn::MlpParams init_location_net(const EncoderSpec& spec, const NnConfig& nn_cfg, int out_dim,
                                const EncodedInputs& train_inputs, std::uint64_t seed) {
    if (spec.kind == EncoderKind::Tile) {
        std::set<std::int64_t> seen(train_inputs.cells.begin(), train_inputs.cells.end());
        return nn::init_tile_params(std::vector<std::int64_t>(seen.begin(), seen.end()), out_dim,
                                    seed);
    }
    return nn::init_params(nn_cfg.arch, output_dim(spec), nn_cfg.k, nn_cfg.h, out_dim, seed,
                           nn_cfg.activation);
}

nn::ForwardCache forward_inputs(const nn::MlpParams& params, const EncodedInputs& inputs,
                                const std::vector<std::size_t>& idx, std::size_t lo,
                                std::size_t hi, double dropout_p, std::uint64_t dropout_seed) {
    if (params.arch == nn::Arch::Table) {
        std::vector<std::int64_t> cells(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) cells[i - lo] = inputs.cells[idx[i]];
        return nn::forward_batch(params, cells);
    }
    return nn::forward_batch(params, gather_cols(inputs.pe, idx, lo, hi), dropout_p,
                             dropout_seed);
}

nn::ForwardCache forward_all(const nn::MlpParams& params, const EncodedInputs& inputs) {
    if (params.arch == nn::Arch::Table) return nn::forward_batch(params, inputs.cells);
    return nn::forward_batch(params, inputs.pe);
}

} // namespace

std::pair<Checkpoint, TrainLog> train_location_classifier(const Dataset& dataset,
                                                          const EncoderSpec& spec,
                                                          const NnConfig& nn_cfg,
                                                          const nn::TrainConfig& train_cfg) {
    validate_spec(spec);
    nn::validate_train_config(train_cfg);
    if (dataset.task != Task::Classify) {
        throw DomainError("train_location_classifier needs a classification dataset");
    }
    const auto train = dataset.split_view(Split::Train);
    std::set<int> distinct;
    for (const auto* r : train) distinct.insert(r->label);
    if (distinct.size() < 2) {
        throw DegenerateDatasetError("train split has " + std::to_string(distinct.size()) +
                                     " class(es); need at least 2");
    }

    Checkpoint ckpt;
    ckpt.task = Task::Classify;
    ckpt.spec = spec;
    ckpt.n_classes = dataset.n_classes;
    ckpt.aux = make_encoder_aux(spec, train);

    const EncodedInputs inputs = encode_records(spec, ckpt.aux, train);
    ckpt.loc = init_location_net(spec, nn_cfg, dataset.n_classes, inputs,
                                 mix_seed(train_cfg.seed, "init"));

    std::vector<int> labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) labels[i] = train[i]->label;

    nn::AdamState adam = nn::init_adam_state(ckpt.loc);
    BatchPlan plan{{}, static_cast<std::size_t>(train_cfg.batch_size)};
    plan.order.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) plan.order[i] = i;

    TrainLog log;
    int t = 0;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        plan.reshuffle(mix_seed(mix_seed(train_cfg.seed, "epoch"), static_cast<std::uint64_t>(epoch)));
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < train.size(); lo += plan.batch_size) {
            const std::size_t hi = std::min(train.size(), lo + plan.batch_size);
            ++t;
            nn::ForwardCache cache =
                forward_inputs(ckpt.loc, inputs, plan.order, lo, hi, train_cfg.dropout_p,
                               mix_seed(train_cfg.seed, static_cast<std::uint64_t>(t)));
            std::vector<int> batch_labels(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) batch_labels[i - lo] = labels[plan.order[i]];
            auto [loss, grad] = nn::loss_softmax_ce_batch(cache.out, batch_labels);
            if (!std::isfinite(loss)) {
                throw NaNGradError("non-finite loss at step " + std::to_string(t));
            }
            epoch_loss += loss * static_cast<double>(hi - lo);
            const nn::MlpGrads grads = nn::backprop(ckpt.loc, cache, grad);
            nn::adam_step(ckpt.loc, grads, adam, train_cfg, t);
        }
        log.epochs.push_back({epoch, epoch_loss / static_cast<double>(train.size())});
    }
    log.convergence_warning = log.epochs.back().loss > log.epochs.front().loss;
    return {std::move(ckpt), std::move(log)};
}

Eigen::MatrixXd location_logprob_matrix(const Checkpoint& ckpt,
                                        const std::vector<const DatasetRecord*>& records) {
    if (ckpt.task != Task::Classify) throw DomainError("checkpoint is not a classifier");
    const EncodedInputs inputs = encode_records(ckpt.spec, ckpt.aux, records);
    const nn::ForwardCache cache = forward_all(ckpt.loc, inputs);
    MatrixXd out(cache.out.rows(), cache.out.cols());
    for (Index j = 0; j < cache.out.cols(); ++j) out.col(j) = nn::log_softmax(cache.out.col(j));
    return out;
}

std::pair<Checkpoint, TrainLog> train_location_regressor(const Dataset& dataset,
                                                         const EncoderSpec& spec,
                                                         const NnConfig& nn_cfg,
                                                         const nn::TrainConfig& train_cfg,
                                                         const VectorTable* image_embeddings) {
    validate_spec(spec);
    nn::validate_train_config(train_cfg);
    if (dataset.task != Task::Regress) {
        throw DomainError("train_location_regressor needs a regression dataset");
    }
    const auto train = dataset.split_view(Split::Train);
    if (train.empty()) throw DegenerateDatasetError("train split is empty");

    Checkpoint ckpt;
    ckpt.task = Task::Regress;
    ckpt.spec = spec;
    ckpt.aux = make_encoder_aux(spec, train);

    const int d = nn_cfg.d;
    const EncodedInputs inputs = encode_records(spec, ckpt.aux, train);
    ckpt.loc = init_location_net(spec, nn_cfg, d, inputs, mix_seed(train_cfg.seed, "init"));
    ckpt.head = nn::init_params(nn::Arch::Ffn, d, d, 1, 1, mix_seed(train_cfg.seed, "head"),
                                nn::Activation::Relu);

    MatrixXd img; // d_img x N_train, column-aligned with train
    if (image_embeddings != nullptr) {
        img = join_by_id(*image_embeddings, train);
        ckpt.proj = nn::init_params(nn::Arch::Ffn, image_embeddings->dim, 0, 0, d,
                                    mix_seed(train_cfg.seed, "proj"), nn::Activation::Relu);
        // The projection gates Enc(x) multiplicatively; a unit bias starts
        // the gate open so uninformative embeddings reduce to location-only.
        ckpt.proj->biases[0].setOnes();
    }

    VectorXd targets(static_cast<Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        targets[static_cast<Index>(i)] = train[i]->target;
    }

    nn::AdamState adam_loc = nn::init_adam_state(ckpt.loc);
    nn::AdamState adam_head = nn::init_adam_state(*ckpt.head);
    nn::AdamState adam_proj;
    if (ckpt.proj) adam_proj = nn::init_adam_state(*ckpt.proj);

    BatchPlan plan{{}, static_cast<std::size_t>(train_cfg.batch_size)};
    plan.order.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) plan.order[i] = i;

    TrainLog log;
    int t = 0;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        plan.reshuffle(mix_seed(mix_seed(train_cfg.seed, "epoch"), static_cast<std::uint64_t>(epoch)));
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < train.size(); lo += plan.batch_size) {
            const std::size_t hi = std::min(train.size(), lo + plan.batch_size);
            const auto B = static_cast<Index>(hi - lo);
            ++t;
            nn::ForwardCache loc_cache =
                forward_inputs(ckpt.loc, inputs, plan.order, lo, hi, train_cfg.dropout_p,
                               mix_seed(train_cfg.seed, static_cast<std::uint64_t>(t)));
            MatrixXd z = loc_cache.out; // d x B
            nn::ForwardCache proj_cache;
            MatrixXd u = z;
            if (ckpt.proj) {
                proj_cache = nn::forward_batch(*ckpt.proj, gather_cols(img, plan.order, lo, hi));
                u = z.cwiseProduct(proj_cache.out);
            }
            nn::ForwardCache head_cache = nn::forward_batch(*ckpt.head, u);

            VectorXd batch_targets(B);
            for (std::size_t i = lo; i < hi; ++i) {
                batch_targets[static_cast<Index>(i - lo)] = targets[static_cast<Index>(plan.order[i])];
            }
            const VectorXd err = head_cache.out.row(0).transpose() - batch_targets;
            const double loss = err.squaredNorm() / static_cast<double>(B);
            if (!std::isfinite(loss)) {
                throw NaNGradError("non-finite loss at step " + std::to_string(t));
            }
            epoch_loss += loss * static_cast<double>(B);

            MatrixXd dout(1, B);
            dout.row(0) = (2.0 / static_cast<double>(B)) * err.transpose();
            MatrixXd du;
            const nn::MlpGrads g_head = nn::backprop(*ckpt.head, head_cache, dout, &du);
            nn::MlpGrads g_loc;
            if (ckpt.proj) {
                const MatrixXd dz = du.cwiseProduct(proj_cache.out);
                const MatrixXd dp = du.cwiseProduct(z);
                const nn::MlpGrads g_proj = nn::backprop(*ckpt.proj, proj_cache, dp);
                g_loc = nn::backprop(ckpt.loc, loc_cache, dz);
                nn::adam_step(*ckpt.proj, g_proj, adam_proj, train_cfg, t);
            } else {
                g_loc = nn::backprop(ckpt.loc, loc_cache, du);
            }
            nn::adam_step(ckpt.loc, g_loc, adam_loc, train_cfg, t);
            nn::adam_step(*ckpt.head, g_head, adam_head, train_cfg, t);
        }
        log.epochs.push_back({epoch, epoch_loss / static_cast<double>(train.size())});
    }
    log.convergence_warning = log.epochs.back().loss > log.epochs.front().loss;
    return {std::move(ckpt), std::move(log)};
}

Eigen::VectorXd regressor_predictions(const Checkpoint& ckpt,
                                      const std::vector<const DatasetRecord*>& records,
                                      const Eigen::MatrixXd* img) {
    if (ckpt.task != Task::Regress || !ckpt.head) {
        throw DomainError("checkpoint is not a regressor");
    }
    if (ckpt.proj && img == nullptr) {
        throw MissingAuxError("checkpoint was trained with image embeddings; none supplied");
    }
    const EncodedInputs inputs = encode_records(ckpt.spec, ckpt.aux, records);
    MatrixXd z = forward_all(ckpt.loc, inputs).out;
    if (ckpt.proj) {
        if (img->cols() != z.cols()) throw ShapeError("image embedding column mismatch");
        z = z.cwiseProduct(nn::forward_batch(*ckpt.proj, *img).out);
    }
    return nn::forward_batch(*ckpt.head, z).out.row(0).transpose();
}

} // namespace locenc
