#include <doctest.h>

#include <cmath>
#include <random>

#include "locenc/errors.hpp"
#include "locenc/metrics.hpp"

using namespace locenc;

namespace {

ScoredRecord scored(std::initializer_list<double> scores, int label) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(scores.size()));
    Eigen::Index i = 0;
    for (double s : scores) v[i++] = s;
    return {v, label};
}

} // namespace

TEST_CASE("rank_of_label with the lower-index tie rule") {
    Eigen::Vector4d uniform(1, 1, 1, 1);
    CHECK(rank_of_label(uniform, 0) == 1);
    CHECK(rank_of_label(uniform, 1) == 2);
    CHECK(rank_of_label(uniform, 3) == 4);
    Eigen::Vector4d v(0.1, 0.9, 0.9, 0.2);
    CHECK(rank_of_label(v, 1) == 1);
    CHECK(rank_of_label(v, 2) == 2);
    CHECK(rank_of_label(v, 3) == 3);
    CHECK(rank_of_label(v, 0) == 4);
    CHECK_THROWS_AS(rank_of_label(v, 4), IndexError);
}

TEST_CASE("topk accuracy") {
    std::vector<ScoredRecord> perfect = {scored({0.9, 0.1}, 0), scored({0.2, 0.8}, 1)};
    CHECK(topk_accuracy(perfect, 1) == 1.0);

    // Uniform scores: tie rule sends label 0 to rank 1 every time.
    std::vector<ScoredRecord> ties = {scored({0.5, 0.5}, 0), scored({0.5, 0.5}, 0)};
    CHECK(topk_accuracy(ties, 1) == 1.0);

    std::vector<ScoredRecord> half = {scored({1, 0, 0, 0}, 0), scored({1, 0, 0, 0}, 1),
                                      scored({0, 1, 0, 0}, 1), scored({0, 0, 1, 0}, 3)};
    CHECK(topk_accuracy(half, 1) == 0.5);
    CHECK_THROWS_AS(topk_accuracy(half, 0), DomainError);
}

TEST_CASE("mrr") {
    std::vector<ScoredRecord> all_first = {scored({0.9, 0.1}, 0), scored({0.1, 0.9}, 1)};
    CHECK(mrr(all_first) == 1.0);

    // Ranks 1, 2, 4 -> (1 + 1/2 + 1/4) / 3.
    std::vector<ScoredRecord> mixed = {scored({4, 3, 2, 1}, 0), scored({4, 3, 2, 1}, 1),
                                       scored({4, 3, 2, 1}, 3)};
    CHECK(mrr(mixed) == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-12));

    Eigen::VectorXd ten = Eigen::VectorXd::LinSpaced(10, 10, 1);
    std::vector<ScoredRecord> single = {{ten, 9}};
    CHECK(mrr(single) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(mrr({}), EmptyDatasetError);
}

TEST_CASE("classification metrics invariants") {
    std::vector<ScoredRecord> recs = {scored({0.6, 0.3, 0.1}, 0), scored({0.1, 0.2, 0.7}, 1),
                                      scored({0.3, 0.4, 0.3}, 2)};
    const MetricsReport m = classification_metrics(recs);
    CHECK(m.n == 3);
    CHECK(m.top1 <= m.top3);
    CHECK(m.mrr >= m.top1);
    CHECK(m.mrr <= 1.0);
}

TEST_CASE("regression metrics") {
    Eigen::Vector3d t(1, 2, 3);
    const auto exact = regression_metrics(t, t);
    CHECK(exact.r2 == 1.0);
    CHECK(exact.mae == 0.0);
    CHECK(exact.rmse == 0.0);

    Eigen::Vector3d mean_pred = Eigen::Vector3d::Constant(t.mean());
    CHECK(regression_metrics(mean_pred, t).r2 == doctest::Approx(0.0).epsilon(1e-12));

    // targets [0,2], preds [1,1] -> R2 = 0, mae = 1, rmse = 1.
    Eigen::Vector2d targets(0, 2);
    Eigen::Vector2d preds(1, 1);
    const auto m = regression_metrics(preds, targets);
    CHECK(m.r2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.mae == 1.0);
    CHECK(m.rmse == 1.0);

    // Constant target: degenerate variance flagged, not thrown.
    Eigen::Vector3d constant(2, 2, 2);
    const auto degenerate = regression_metrics(Eigen::Vector3d(1, 1, 1), constant);
    CHECK(degenerate.degenerate_variance);
    CHECK(std::isnan(degenerate.r2));
    CHECK(degenerate.mae >= 0.0);
    CHECK(degenerate.rmse >= 0.0);

    CHECK_THROWS_AS(regression_metrics(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)),
                    ShapeError);
}

TEST_CASE("combine_priors product rule") {
    auto logv = [](std::initializer_list<double> probs) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(probs.size()));
        Eigen::Index i = 0;
        for (double p : probs) v[i++] = std::log(p);
        return v;
    };

    // Uniform location prior is neutral.
    const Eigen::VectorXd keep = combine_priors(logv({0.7, 0.3}), logv({0.5, 0.5}));
    CHECK(std::exp(keep[0]) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(std::exp(keep[1]) == doctest::Approx(0.3).epsilon(1e-12));

    // Hand arithmetic of the product rule.
    const Eigen::VectorXd mix = combine_priors(logv({0.6, 0.4}), logv({0.25, 0.75}));
    CHECK(std::exp(mix[0]) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(std::exp(mix[1]) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // Near-one-hot location prior dominates.
    const Eigen::VectorXd hot =
        combine_priors(logv({0.5, 0.2, 0.3}), logv({1e-30, 1e-30, 1.0}));
    CHECK(std::exp(hot[2]) == doctest::Approx(1.0).epsilon(1e-9));

    // Output exponentiates to a distribution.
    const double total = std::exp(mix[0]) + std::exp(mix[1]);
    CHECK(std::abs(total - 1.0) < 1e-12);

    CHECK_THROWS_AS(combine_priors(logv({0.5, 0.5}), logv({1.0})), ShapeError);
    Eigen::Vector2d bad(std::nan(""), 0.0);
    CHECK_THROWS_AS(combine_priors(bad, logv({0.5, 0.5})), NonFiniteError);
}

TEST_CASE("uniform prior preserves the full ranking") {
    std::mt19937_64 eng(77);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd img(8);
        for (int i = 0; i < 8; ++i) {
            img[i] = -static_cast<double>(eng() % 1000) / 100.0;
        }
        const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(8, std::log(1.0 / 8.0));
        const Eigen::VectorXd combined = combine_priors(img, uniform);
        for (int label = 0; label < 8; ++label) {
            CHECK(rank_of_label(combined, label) == rank_of_label(img, label));
        }
    }
}
