#include "locenc/nn.hpp"

#include <algorithm>
#include <cmath>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc::nn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd apply_activation(Activation act, const MatrixXd& pre) {
    switch (act) {
        case Activation::Relu: return pre.cwiseMax(0.0);
        case Activation::LeakyRelu:
            return pre.unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; });
        case Activation::Sigmoid:
            return pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        case Activation::Sine:
            return pre.unaryExpr([](double x) { return std::sin(kSirenOmega0 * x); });
    }
    throw DomainError("unhandled activation");
}

MatrixXd activation_derivative(Activation act, const MatrixXd& pre) {
    switch (act) {
        case Activation::Relu:
            return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
        case Activation::LeakyRelu:
            return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : kLeakySlope; });
        case Activation::Sigmoid:
            return pre.unaryExpr([](double x) {
                const double s = 1.0 / (1.0 + std::exp(-x));
                return s * (1.0 - s);
            });
        case Activation::Sine:
            return pre.unaryExpr(
                [](double x) { return kSirenOmega0 * std::cos(kSirenOmega0 * x); });
    }
    throw DomainError("unhandled activation");
}

void fill_uniform(MatrixXd& w, double bound, std::mt19937_64& eng) {
    double* p = w.data();
    for (Index i = 0; i < w.size(); ++i) p[i] = uniform_in(eng, -bound, bound);
}

double glorot_bound(Index fan_in, Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Flat views over every parameter array, in a fixed declaration order shared
// by adam_step and finite_diff_check.
std::vector<Eigen::Map<VectorXd>> param_views(MlpParams& p) {
    std::vector<Eigen::Map<VectorXd>> views;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        views.emplace_back(p.weights[i].data(), p.weights[i].size());
        views.emplace_back(p.biases[i].data(), p.biases[i].size());
    }
    if (p.embedding_table.size() > 0) {
        views.emplace_back(p.embedding_table.data(), p.embedding_table.size());
    }
    return views;
}

std::vector<Eigen::Map<const VectorXd>> grad_views(const MlpGrads& g) {
    std::vector<Eigen::Map<const VectorXd>> views;
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
        views.emplace_back(g.weights[i].data(), g.weights[i].size());
        views.emplace_back(g.biases[i].data(), g.biases[i].size());
    }
    if (g.embedding_table.size() > 0) {
        views.emplace_back(g.embedding_table.data(), g.embedding_table.size());
    }
    return views;
}

} // namespace

const char* arch_name(Arch a) {
    switch (a) {
        case Arch::Ffn: return "ffn";
        case Arch::Residual4: return "residual4";
        case Arch::Siren: return "siren";
        case Arch::Table: return "table";
    }
    return "?";
}

Arch arch_from_name(const std::string& name) {
    if (name == "ffn") return Arch::Ffn;
    if (name == "residual4") return Arch::Residual4;
    if (name == "siren") return Arch::Siren;
    if (name == "table") return Arch::Table;
    throw DomainError("unknown arch '" + name + "'");
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Sine: return "sine";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "leaky_relu") return Activation::LeakyRelu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "sine") return Activation::Sine;
    throw DomainError("unknown activation '" + name + "'");
}

MlpParams init_params(Arch arch, int in_dim, int k, int h, int d, std::uint64_t seed,
                      Activation activation) {
    if (arch == Arch::Table) throw DomainError("use init_tile_params for the table arch");
    if (in_dim < 1 || d < 1) throw DomainError("init_params: in_dim and d must be >= 1");
    if (h < 0) throw DomainError("init_params: h must be >= 0");
    const bool needs_hidden = (arch == Arch::Residual4) || h > 0;
    if (needs_hidden && k < 1) throw DomainError("init_params: k must be >= 1");

    MlpParams p;
    p.arch = arch;
    p.activation = (arch == Arch::Siren) ? Activation::Sine : activation;
    p.in_dim = in_dim;
    p.k = k;
    p.h = h;
    p.d = d;

    std::mt19937_64 eng(mix_seed(seed, "init_params"));
    auto add_layer = [&](Index rows, Index cols, double bound) {
        MatrixXd w(rows, cols);
        fill_uniform(w, bound, eng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(VectorXd::Zero(rows));
    };

    if (arch == Arch::Residual4) {
        add_layer(k, in_dim, glorot_bound(in_dim, k));
        for (int b = 0; b < 4; ++b) {
            add_layer(k, k, glorot_bound(k, k));
            add_layer(k, k, glorot_bound(k, k));
        }
        add_layer(d, k, glorot_bound(k, d));
        return p;
    }

    // ffn / siren chains
    const bool siren = arch == Arch::Siren;
    if (h == 0) {
        add_layer(d, in_dim, siren ? 1.0 / in_dim : glorot_bound(in_dim, d));
        return p;
    }
    add_layer(k, in_dim, siren ? 1.0 / in_dim : glorot_bound(in_dim, k));
    for (int i = 1; i < h; ++i) {
        add_layer(k, k, siren ? std::sqrt(6.0 / k) / kSirenOmega0 : glorot_bound(k, k));
    }
    add_layer(d, k, siren ? std::sqrt(6.0 / k) / kSirenOmega0 : glorot_bound(k, d));
    return p;
}

MlpParams init_tile_params(std::vector<std::int64_t> vocab, int d, std::uint64_t seed) {
    if (d < 1) throw DomainError("init_tile_params: d must be >= 1");
    if (!std::is_sorted(vocab.begin(), vocab.end()) ||
        std::adjacent_find(vocab.begin(), vocab.end()) != vocab.end()) {
        throw DomainError("init_tile_params: vocab must be sorted and unique");
    }
    MlpParams p;
    p.arch = Arch::Table;
    p.in_dim = 1;
    p.d = d;
    p.embedding_table = MatrixXd::Zero(static_cast<Index>(vocab.size()) + 1, d);
    std::mt19937_64 eng(mix_seed(seed, "tile_table"));
    for (Index r = 0; r < static_cast<Index>(vocab.size()); ++r) {
        for (Index c = 0; c < d; ++c) p.embedding_table(r, c) = uniform_in(eng, -0.1, 0.1);
    }
    p.vocab = std::move(vocab);
    return p;
}

Eigen::Index table_row(const MlpParams& params, std::int64_t cell) {
    const auto it = std::lower_bound(params.vocab.begin(), params.vocab.end(), cell);
    if (it != params.vocab.end() && *it == cell) {
        return static_cast<Index>(it - params.vocab.begin());
    }
    return static_cast<Index>(params.vocab.size()); // shared OOV row
}

ForwardCache forward_batch(const MlpParams& params, const MatrixXd& input, double dropout_p,
                           std::uint64_t dropout_seed) {
    if (params.arch == Arch::Table) {
        throw ShapeError("table arch takes cell indices, not dense input");
    }
    if (input.rows() != params.in_dim) {
        throw ShapeError("input has " + std::to_string(input.rows()) + " rows, expected " +
                         std::to_string(params.in_dim));
    }
    ForwardCache cache;
    cache.input = input;
    const Index B = input.cols();

    if (params.arch == Arch::Residual4) {
        MatrixXd y = (params.weights[0] * input).colwise() + params.biases[0];
        const bool drop = dropout_p > 0.0;
        std::mt19937_64 eng(mix_seed(dropout_seed, "dropout"));
        const double keep = 1.0 - dropout_p;
        for (int b = 0; b < 4; ++b) {
            cache.res_in.push_back(y);
            const auto& w1 = params.weights[1 + 2 * b];
            const auto& b1 = params.biases[1 + 2 * b];
            const auto& w2 = params.weights[2 + 2 * b];
            const auto& b2 = params.biases[2 + 2 * b];
            MatrixXd pre = (w1 * y).colwise() + b1;
            MatrixXd post = apply_activation(params.activation, pre);
            if (drop) {
                MatrixXd mask(post.rows(), post.cols());
                for (Index j = 0; j < mask.cols(); ++j) {
                    for (Index i = 0; i < mask.rows(); ++i) {
                        mask(i, j) = uniform01(eng) < keep ? 1.0 / keep : 0.0;
                    }
                }
                post = post.cwiseProduct(mask);
                cache.masks.push_back(std::move(mask));
            }
            cache.pre.push_back(std::move(pre));
            y += (w2 * post).colwise() + b2;
            cache.post.push_back(std::move(post));
        }
        cache.res_in.push_back(y);
        cache.out = (params.weights[9] * y).colwise() + params.biases[9];
        return cache;
    }

    // ffn / siren
    MatrixXd x = input;
    const std::size_t n_layers = params.weights.size();
    for (std::size_t i = 0; i + 1 < n_layers; ++i) {
        MatrixXd pre = (params.weights[i] * x).colwise() + params.biases[i];
        x = apply_activation(params.activation, pre);
        cache.pre.push_back(std::move(pre));
        cache.post.push_back(x);
    }
    cache.out = (params.weights[n_layers - 1] * x).colwise() + params.biases[n_layers - 1];
    (void)B;
    return cache;
}

ForwardCache forward_batch(const MlpParams& params, const std::vector<std::int64_t>& cells) {
    if (params.arch != Arch::Table) throw ShapeError("cell-index forward requires table arch");
    ForwardCache cache;
    cache.cells = cells;
    cache.out.resize(params.d, static_cast<Index>(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
        cache.out.col(static_cast<Index>(j)) =
            params.embedding_table.row(table_row(params, cells[j])).transpose();
    }
    return cache;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& pe) {
    return forward_batch(params, pe).out.col(0);
}

Eigen::VectorXd forward(const MlpParams& params, std::int64_t cell) {
    return forward_batch(params, std::vector<std::int64_t>{cell}).out.col(0);
}

MlpGrads zero_grads_like(const MlpParams& params) {
    MlpGrads g;
    g.weights.reserve(params.weights.size());
    g.biases.reserve(params.biases.size());
    for (const auto& w : params.weights) g.weights.push_back(MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : params.biases) g.biases.push_back(VectorXd::Zero(b.size()));
    if (params.embedding_table.size() > 0) {
        g.embedding_table =
            MatrixXd::Zero(params.embedding_table.rows(), params.embedding_table.cols());
    }
    return g;
}

MlpGrads backprop(const MlpParams& params, const ForwardCache& cache,
                  const MatrixXd& grad_out, MatrixXd* grad_input) {
    if (grad_out.rows() != params.d || grad_out.cols() != cache.out.cols()) {
        throw ShapeError("backprop: grad_out shape mismatch");
    }
    MlpGrads g = zero_grads_like(params);

    if (params.arch == Arch::Table) {
        if (grad_input != nullptr) {
            throw ShapeError("backprop: table arch has no dense input gradient");
        }
        for (std::size_t j = 0; j < cache.cells.size(); ++j) {
            g.embedding_table.row(table_row(params, cache.cells[j])) +=
                grad_out.col(static_cast<Index>(j)).transpose();
        }
        return g;
    }

    if (params.arch == Arch::Residual4) {
        g.weights[9] = grad_out * cache.res_in[4].transpose();
        g.biases[9] = grad_out.rowwise().sum();
        MatrixXd dy = params.weights[9].transpose() * grad_out;
        for (int b = 3; b >= 0; --b) {
            const auto& w1 = params.weights[1 + 2 * b];
            const auto& w2 = params.weights[2 + 2 * b];
            g.weights[2 + 2 * b] = dy * cache.post[static_cast<std::size_t>(b)].transpose();
            g.biases[2 + 2 * b] = dy.rowwise().sum();
            MatrixXd dpost = w2.transpose() * dy;
            if (!cache.masks.empty()) {
                dpost = dpost.cwiseProduct(cache.masks[static_cast<std::size_t>(b)]);
            }
            const MatrixXd dpre =
                dpost.cwiseProduct(activation_derivative(params.activation,
                                                         cache.pre[static_cast<std::size_t>(b)]));
            g.weights[1 + 2 * b] = dpre * cache.res_in[static_cast<std::size_t>(b)].transpose();
            g.biases[1 + 2 * b] = dpre.rowwise().sum();
            dy += w1.transpose() * dpre;
        }
        g.weights[0] = dy * cache.input.transpose();
        g.biases[0] = dy.rowwise().sum();
        if (grad_input != nullptr) *grad_input = params.weights[0].transpose() * dy;
        return g;
    }

    // ffn / siren
    const std::size_t n_layers = params.weights.size();
    const MatrixXd& last_in = n_layers == 1 ? cache.input : cache.post.back();
    g.weights[n_layers - 1] = grad_out * last_in.transpose();
    g.biases[n_layers - 1] = grad_out.rowwise().sum();
    MatrixXd dx = params.weights[n_layers - 1].transpose() * grad_out;
    for (std::size_t i = n_layers - 1; i-- > 0;) {
        const MatrixXd dpre =
            dx.cwiseProduct(activation_derivative(params.activation, cache.pre[i]));
        const MatrixXd& in_i = i == 0 ? cache.input : cache.post[i - 1];
        g.weights[i] = dpre * in_i.transpose();
        g.biases[i] = dpre.rowwise().sum();
        dx = params.weights[i].transpose() * dpre;
    }
    if (grad_input != nullptr) *grad_input = dx;
    return g;
}

std::pair<double, Eigen::VectorXd> loss_softmax_ce(const VectorXd& logits, int label) {
    if (label < 0 || label >= logits.size()) {
        throw IndexError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.size()) + " classes");
    }
    const double m = logits.maxCoeff();
    const VectorXd shifted = (logits.array() - m).exp();
    const double z = shifted.sum();
    const double loss = std::log(z) + m - logits[label];
    VectorXd grad = shifted / z;
    grad[label] -= 1.0;
    return {loss, grad};
}

std::pair<double, MatrixXd> loss_softmax_ce_batch(const MatrixXd& logits,
                                                  const std::vector<int>& labels) {
    if (static_cast<Index>(labels.size()) != logits.cols()) {
        throw ShapeError("loss_softmax_ce_batch: label count mismatch");
    }
    const Index B = logits.cols();
    MatrixXd grad(logits.rows(), B);
    double total = 0.0;
    for (Index j = 0; j < B; ++j) {
        auto [loss, g] = loss_softmax_ce(logits.col(j), labels[static_cast<std::size_t>(j)]);
        total += loss;
        grad.col(j) = g;
    }
    const double inv = 1.0 / static_cast<double>(B);
    return {total * inv, grad * inv};
}

std::pair<double, double> loss_mse(double pred, double target) {
    const double e = pred - target;
    return {e * e, 2.0 * e};
}

Eigen::VectorXd log_softmax(const VectorXd& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
}

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw DomainError("lr must be > 0");
    if (cfg.epochs < 1) throw DomainError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (cfg.weight_decay < 0.0) throw DomainError("weight_decay must be >= 0");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0) throw DomainError("dropout_p must be in [0,1)");
}

AdamState init_adam_state(const MlpParams& params) {
    AdamState state;
    auto views = param_views(const_cast<MlpParams&>(params));
    state.m.reserve(views.size());
    state.v.reserve(views.size());
    for (const auto& view : views) {
        state.m.push_back(VectorXd::Zero(view.size()));
        state.v.push_back(VectorXd::Zero(view.size()));
    }
    return state;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               const TrainConfig& config, int t) {
    if (t < 1) throw DomainError("adam_step: t must be >= 1");
    auto pv = param_views(params);
    auto gv = grad_views(grads);
    if (pv.size() != gv.size() || pv.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter/gradient structure mismatch");
    }
    for (std::size_t i = 0; i < gv.size(); ++i) {
        if (!gv[i].allFinite()) {
            throw NaNGradError("non-finite gradient in parameter array " + std::to_string(i));
        }
    }
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < pv.size(); ++i) {
        VectorXd g = gv[i];
        if (config.weight_decay > 0.0) g += config.weight_decay * VectorXd(pv[i]);
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] =
            config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
        const VectorXd mhat = state.m[i] / bc1;
        const VectorXd vhat = state.v[i] / bc2;
        pv[i] -= config.lr *
                 mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                    VectorXd::Constant(vhat.size(), config.eps));
        if (!pv[i].allFinite()) {
            throw NaNGradError("parameters became non-finite after Adam step " +
                               std::to_string(t));
        }
    }
}

double finite_diff_check(const MlpParams& params, const VectorXd& pe, FdTarget target,
                         double h) {
    if (!(h > 0.0)) throw DomainError("finite_diff_check: h must be > 0");
    MlpParams work = params;

    auto loss_of = [&](const MlpParams& p) {
        const VectorXd out = (p.arch == Arch::Table)
                                 ? forward(p, static_cast<std::int64_t>(pe[0]))
                                 : forward(p, pe);
        if (target.label >= 0) return loss_softmax_ce(out, target.label).first;
        return loss_mse(out[0], target.target).first;
    };

    // Analytic gradient at the given point.
    ForwardCache cache = (params.arch == Arch::Table)
                             ? forward_batch(params, std::vector<std::int64_t>{
                                                         static_cast<std::int64_t>(pe[0])})
                             : forward_batch(params, MatrixXd(pe));
    Eigen::MatrixXd grad_out(params.d, 1);
    if (target.label >= 0) {
        grad_out.col(0) = loss_softmax_ce(cache.out.col(0), target.label).second;
    } else {
        grad_out.setZero();
        grad_out(0, 0) = loss_mse(cache.out(0, 0), target.target).second;
    }
    const MlpGrads analytic = backprop(params, cache, grad_out);

    auto pv = param_views(work);
    auto gv = grad_views(analytic);
    double max_rel = 0.0;
    for (std::size_t a = 0; a < pv.size(); ++a) {
        for (Index i = 0; i < pv[a].size(); ++i) {
            const double saved = pv[a][i];
            pv[a][i] = saved + h;
            const double lp = loss_of(work);
            pv[a][i] = saved - h;
            const double lm = loss_of(work);
            pv[a][i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = gv[a][i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace locenc::nn
