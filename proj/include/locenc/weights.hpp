#pragma once

#include <vector>

#include "locenc/geo.hpp"

namespace locenc {

/// Sparse non-negative spatial connectivity; no self-loops.
struct WeightEntry {
    int i = 0;
    int j = 0;
    double w = 0.0;
};

struct WeightMatrix {
    int n = 0;
    std::vector<WeightEntry> entries; // sorted by (i, j)

    double total_weight() const;
};

/// Row i gets unit weights on the k nearest points by haversine distance,
/// ties broken by input index; k is clipped to n-1.
/// Throws TooFewPointsError when n < 2.
WeightMatrix knn_weights(const std::vector<LocationDeg>& points, int k);

} // namespace locenc
