#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "locenc/dataset.hpp"

namespace locenc {

/// Metric bundle for one model variant on one split.
struct MetricsReport {
    Task task = Task::Classify;
    int n = 0;
    // classification
    double top1 = 0.0;
    double top3 = 0.0;
    double mrr = 0.0;
    // regression
    double r2 = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    bool degenerate_variance = false; // SS_tot = 0: r2 reported as NaN
};

/// 1-based rank of the label; ties resolved in favor of the lower class
/// index, so equal scores rank the smaller index first.
int rank_of_label(const Eigen::VectorXd& scores, int label);

using ScoredRecord = std::pair<Eigen::VectorXd, int>; // (score vector, label)

double topk_accuracy(const std::vector<ScoredRecord>& scored, int k);
double mrr(const std::vector<ScoredRecord>& scored);

MetricsReport classification_metrics(const std::vector<ScoredRecord>& scored);

struct RegressionMetrics {
    double r2 = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    bool degenerate_variance = false;
};

/// R^2 = 1 - SS_res/SS_tot about the target mean; SS_tot = 0 yields
/// r2 = NaN with the degenerate flag set, never a throw.
RegressionMetrics regression_metrics(const Eigen::VectorXd& preds,
                                     const Eigen::VectorXd& targets);

MetricsReport regression_report(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

/// Log-space Bayesian product of the image and location priors:
/// log P(y|I) + log P(y|x), renormalized by log-sum-exp. The result
/// exponentiates to a distribution summing to 1.
/// Throws ShapeError on length mismatch, NonFiniteError on bad input.
Eigen::VectorXd combine_priors(const Eigen::VectorXd& image_logprobs,
                               const Eigen::VectorXd& loc_logprobs);

} // namespace locenc
