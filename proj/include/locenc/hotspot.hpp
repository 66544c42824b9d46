#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "locenc/weights.hpp"

namespace locenc {

/// Getis-Ord Gi* per-point z-scores with self-inclusion (W_ii treated as 1)
/// and significance bins: hot99/hot95/hot90 at z >= 2.576/1.96/1.645,
/// symmetric cold bins, "ns" otherwise.
struct GiStarResult {
    Eigen::VectorXd z;
    std::vector<std::string> bins;
};

/// Throws TooFewPointsError (n < 3) and ZeroVarianceError (constant values).
GiStarResult getis_ord_gi_star(const Eigen::VectorXd& values, const WeightMatrix& W);

const char* gi_star_bin(double z);

} // namespace locenc
