#include "locenc/metrics.hpp"

#include <cmath>
#include <limits>

#include "locenc/errors.hpp"

namespace locenc {

int rank_of_label(const Eigen::VectorXd& scores, int label) {
    if (label < 0 || label >= scores.size()) throw IndexError("rank_of_label: label out of range");
    const double s = scores[label];
    int rank = 1;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        if (scores[j] > s || (scores[j] == s && j < label)) ++rank;
    }
    return rank;
}

double topk_accuracy(const std::vector<ScoredRecord>& scored, int k) {
    if (k < 1) throw DomainError("topk_accuracy: k must be >= 1");
    if (scored.empty()) return 0.0;
    int hits = 0;
    for (const auto& [scores, label] : scored) {
        if (rank_of_label(scores, label) <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scored.size());
}

double mrr(const std::vector<ScoredRecord>& scored) {
    if (scored.empty()) throw EmptyDatasetError("mrr: no records");
    double total = 0.0;
    for (const auto& [scores, label] : scored) {
        total += 1.0 / static_cast<double>(rank_of_label(scores, label));
    }
    return total / static_cast<double>(scored.size());
}

MetricsReport classification_metrics(const std::vector<ScoredRecord>& scored) {
    MetricsReport report;
    report.task = Task::Classify;
    report.n = static_cast<int>(scored.size());
    report.top1 = topk_accuracy(scored, 1);
    report.top3 = topk_accuracy(scored, 3);
    report.mrr = mrr(scored);
    return report;
}

RegressionMetrics regression_metrics(const Eigen::VectorXd& preds,
                                     const Eigen::VectorXd& targets) {
    if (preds.size() != targets.size()) throw ShapeError("regression_metrics: length mismatch");
    if (preds.size() == 0) throw EmptyDatasetError("regression_metrics: no records");
    RegressionMetrics m;
    const Eigen::VectorXd err = preds - targets;
    m.mae = err.cwiseAbs().mean();
    m.rmse = std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
    const double mean = targets.mean();
    const double ss_tot = (targets.array() - mean).matrix().squaredNorm();
    if (ss_tot == 0.0) {
        m.degenerate_variance = true;
        m.r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        m.r2 = 1.0 - err.squaredNorm() / ss_tot;
    }
    return m;
}

MetricsReport regression_report(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
    const RegressionMetrics m = regression_metrics(preds, targets);
    MetricsReport report;
    report.task = Task::Regress;
    report.n = static_cast<int>(preds.size());
    report.r2 = m.r2;
    report.mae = m.mae;
    report.rmse = m.rmse;
    report.degenerate_variance = m.degenerate_variance;
    return report;
}

Eigen::VectorXd combine_priors(const Eigen::VectorXd& image_logprobs,
                               const Eigen::VectorXd& loc_logprobs) {
    if (image_logprobs.size() != loc_logprobs.size()) {
        throw ShapeError("combine_priors: length mismatch");
    }
    if (!image_logprobs.allFinite() || !loc_logprobs.allFinite()) {
        throw NonFiniteError("combine_priors: inputs must be finite");
    }
    Eigen::VectorXd sum = image_logprobs + loc_logprobs;
    const double m = sum.maxCoeff();
    const double lse = m + std::log((sum.array() - m).exp().sum());
    return sum.array() - lse;
}

} // namespace locenc
