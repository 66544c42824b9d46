#include <doctest.h>

#include <cmath>

#include "locenc/checkpoint.hpp"
#include "locenc/errors.hpp"
#include "locenc/metrics.hpp"
#include "locenc/synth.hpp"
#include "locenc/train.hpp"
#include "test_util.hpp"

using namespace locenc;

namespace {

EncoderSpec sphere_spec() {
    EncoderSpec spec = EncoderSpec::defaults(EncoderKind::SphereC);
    spec.S = 16;
    spec.seed = 5;
    return spec;
}

nn::TrainConfig quick_train(int epochs) {
    nn::TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.epochs = epochs;
    cfg.batch_size = 256;
    cfg.seed = 11;
    cfg.dropout_p = 0.0;
    return cfg;
}

double top1_on_test(const Checkpoint& ckpt, const Dataset& ds) {
    const auto test = ds.split_view(Split::Test);
    const Eigen::MatrixXd lp = location_logprob_matrix(ckpt, test);
    std::vector<ScoredRecord> scored;
    scored.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        scored.emplace_back(lp.col(static_cast<Eigen::Index>(i)), test[i]->label);
    }
    return topk_accuracy(scored, 1);
}

} // namespace

TEST_CASE("classifier learns longitude sectors") {
    SynthParams params;
    params.classes = 4;
    const Dataset ds = synth_dataset(SynthKind::SectorClasses, 3000, params, 7);
    NnConfig nn_cfg;
    nn_cfg.k = 32;
    nn_cfg.h = 1;
    auto [ckpt, log] = train_location_classifier(ds, sphere_spec(), nn_cfg, quick_train(20));
    CHECK(log.epochs.size() == 20);
    CHECK(log.epochs.back().loss < log.epochs.front().loss);
    CHECK_FALSE(log.convergence_warning);
    CHECK(top1_on_test(ckpt, ds) >= 0.9);
}

TEST_CASE("classifier training is deterministic") {
    SynthParams params;
    params.classes = 3;
    const Dataset ds = synth_dataset(SynthKind::SectorClasses, 600, params, 9);
    NnConfig nn_cfg;
    nn_cfg.k = 16;
    auto [a, log_a] = train_location_classifier(ds, sphere_spec(), nn_cfg, quick_train(3));
    auto [b, log_b] = train_location_classifier(ds, sphere_spec(), nn_cfg, quick_train(3));
    REQUIRE(a.loc.weights.size() == b.loc.weights.size());
    for (std::size_t i = 0; i < a.loc.weights.size(); ++i) {
        CHECK(a.loc.weights[i] == b.loc.weights[i]); // bitwise
        CHECK(a.loc.biases[i] == b.loc.biases[i]);
    }
    CHECK(log_a.epochs.back().loss == log_b.epochs.back().loss);
}

TEST_CASE("single-class train split is rejected") {
    Dataset ds;
    ds.task = Task::Classify;
    ds.n_classes = 2;
    for (int i = 0; i < 12; ++i) {
        ds.records.push_back({std::to_string(i),
                              {static_cast<double>(i), 0.0},
                              i < 8 ? Split::Train : Split::Test,
                              i < 8 ? 0 : 1,
                              0.0});
    }
    CHECK_THROWS_AS(
        train_location_classifier(ds, sphere_spec(), NnConfig{}, quick_train(1)),
        DegenerateDatasetError);
}

TEST_CASE("tile classifier uses the embedding table with OOV fallback") {
    SynthParams params;
    params.classes = 4;
    const Dataset ds = synth_dataset(SynthKind::SectorClasses, 2000, params, 13);
    EncoderSpec spec = EncoderSpec::defaults(EncoderKind::Tile);
    spec.cell_deg = 15.0;
    spec.seed = 1;
    auto [ckpt, log] = train_location_classifier(ds, spec, NnConfig{}, quick_train(20));
    CHECK(ckpt.loc.arch == nn::Arch::Table);
    CHECK(top1_on_test(ckpt, ds) >= 0.8);

    // An OOV cell produces the zero row, i.e. a uniform prior.
    const Eigen::Index oov_row = static_cast<Eigen::Index>(ckpt.loc.vocab.size());
    CHECK(ckpt.loc.embedding_table.row(oov_row).isZero(0));
}

TEST_CASE("location-only regressor fits the smooth field") {
    SynthParams params;
    params.noise_sigma = 0.05;
    const Dataset ds = synth_dataset(SynthKind::SmoothField, 4000, params, 21);
    NnConfig nn_cfg;
    nn_cfg.k = 48;
    nn_cfg.d = 32;
    auto [ckpt, log] = train_location_regressor(ds, sphere_spec(), nn_cfg, quick_train(30),
                                                nullptr);
    const auto test = ds.split_view(Split::Test);
    const Eigen::VectorXd preds = regressor_predictions(ckpt, test, nullptr);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        targets[static_cast<Eigen::Index>(i)] = test[i]->target;
    }
    CHECK(regression_metrics(preds, targets).r2 >= 0.8);
    CHECK(log.epochs.back().loss < log.epochs.front().loss);
}

TEST_CASE("all-zero image embeddings behave like location-only") {
    SynthParams params;
    params.noise_sigma = 0.05;
    const Dataset ds = synth_dataset(SynthKind::SmoothField, 3000, params, 23);
    NnConfig nn_cfg;
    nn_cfg.k = 32;
    nn_cfg.d = 24;

    VectorTable zeros;
    zeros.dim = 6;
    for (const auto& r : ds.records) zeros.by_id[r.id] = Eigen::VectorXd::Zero(6);

    auto [plain, log_a] =
        train_location_regressor(ds, sphere_spec(), nn_cfg, quick_train(25), nullptr);
    auto [fused, log_b] =
        train_location_regressor(ds, sphere_spec(), nn_cfg, quick_train(25), &zeros);

    const auto test = ds.split_view(Split::Test);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        targets[static_cast<Eigen::Index>(i)] = test[i]->target;
    }
    const Eigen::MatrixXd img = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(test.size()));
    const double r2_plain =
        regression_metrics(regressor_predictions(plain, test, nullptr), targets).r2;
    const double r2_fused =
        regression_metrics(regressor_predictions(fused, test, &img), targets).r2;
    // Projection bias learning makes the fused model equivalent in family.
    CHECK(std::abs(r2_plain - r2_fused) <= 0.05);
}

TEST_CASE("constant targets do not crash the regressor") {
    Dataset ds;
    ds.task = Task::Regress;
    for (int i = 0; i < 40; ++i) {
        ds.records.push_back({std::to_string(i),
                              {static_cast<double>(i % 20) * 2.0, 0.0},
                              i < 30 ? Split::Train : Split::Test,
                              -1,
                              1.5});
    }
    auto [ckpt, log] =
        train_location_regressor(ds, sphere_spec(), NnConfig{}, quick_train(2), nullptr);
    const auto test = ds.split_view(Split::Test);
    const Eigen::VectorXd preds = regressor_predictions(ckpt, test, nullptr);
    Eigen::VectorXd targets = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(test.size()), 1.5);
    const auto m = regression_metrics(preds, targets);
    CHECK(m.degenerate_variance);
    CHECK_FALSE(m.r2 > 0.0); // NaN, reported rather than thrown
}

TEST_CASE("checkpoint save/load round trip") {
    testutil::TempDir tmp("ckpt");
    SynthParams params;
    params.classes = 3;
    const Dataset ds = synth_dataset(SynthKind::SectorClasses, 400, params, 31);
    EncoderSpec spec = EncoderSpec::defaults(EncoderKind::Rff);
    spec.W_dim = 24;
    spec.seed = 3;
    NnConfig nn_cfg;
    nn_cfg.k = 8;
    auto [ckpt, log] = train_location_classifier(ds, spec, nn_cfg, quick_train(2));

    const std::string path = tmp.file("model.bin");
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.task == Task::Classify);
    CHECK(back.n_classes == 3);
    CHECK(back.spec.kind == EncoderKind::Rff);
    CHECK(back.spec.W_dim == 24);
    REQUIRE(back.loc.weights.size() == ckpt.loc.weights.size());
    for (std::size_t i = 0; i < ckpt.loc.weights.size(); ++i) {
        CHECK(back.loc.weights[i] == ckpt.loc.weights[i]); // bitwise through the binary file
    }
    const auto* aux = std::get_if<RffParams>(&back.aux);
    REQUIRE(aux != nullptr);
    const auto* orig = std::get_if<RffParams>(&ckpt.aux);
    CHECK(aux->omegas == orig->omegas);
    CHECK(aux->shifts == orig->shifts);

    // Logprobs from the reloaded checkpoint match the in-memory model.
    const auto test = ds.split_view(Split::Test);
    CHECK(location_logprob_matrix(back, test) == location_logprob_matrix(ckpt, test));

    CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.bin")), ParseError);
}

TEST_CASE("regressor checkpoint with fusion head round trips") {
    testutil::TempDir tmp("ckpt_reg");
    SynthParams params;
    const Dataset ds = synth_dataset(SynthKind::SmoothField, 300, params, 37);
    VectorTable emb;
    emb.dim = 4;
    std::mt19937_64 eng(1);
    for (const auto& r : ds.records) {
        Eigen::VectorXd v(4);
        for (int i = 0; i < 4; ++i) v[i] = standard_normal(eng);
        emb.by_id[r.id] = v;
    }
    NnConfig nn_cfg;
    nn_cfg.k = 8;
    nn_cfg.d = 8;
    auto [ckpt, log] =
        train_location_regressor(ds, sphere_spec(), nn_cfg, quick_train(2), &emb);
    REQUIRE(ckpt.proj.has_value());
    REQUIRE(ckpt.head.has_value());

    const std::string path = tmp.file("reg.bin");
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);
    REQUIRE(back.proj.has_value());
    const auto test = ds.split_view(Split::Test);
    const Eigen::MatrixXd img = join_by_id(emb, test);
    CHECK(regressor_predictions(back, test, &img) == regressor_predictions(ckpt, test, &img));
    CHECK_THROWS_AS(regressor_predictions(back, test, nullptr), MissingAuxError);
}
