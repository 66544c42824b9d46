#include "locenc/weights.hpp"

#include <algorithm>
#include <numeric>

#include "locenc/errors.hpp"

namespace locenc {

double WeightMatrix::total_weight() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.w;
    return s;
}

WeightMatrix knn_weights(const std::vector<LocationDeg>& points, int k) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw TooFewPointsError("knn_weights: need at least 2 points");
    if (k < 1) throw DomainError("knn_weights: k must be >= 1");
    const int kk = std::min(k, n - 1);

    WeightMatrix W;
    W.n = n;
    W.entries.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(kk));

    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[m++] = {haversine_km(points[static_cast<std::size_t>(i)],
                                      points[static_cast<std::size_t>(j)]),
                         j};
        }
        // (distance, index) ordering makes the tie rule explicit.
        std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
        std::vector<int> picked(static_cast<std::size_t>(kk));
        for (int t = 0; t < kk; ++t) picked[static_cast<std::size_t>(t)] = cand[static_cast<std::size_t>(t)].second;
        std::sort(picked.begin(), picked.end());
        for (int j : picked) W.entries.push_back({i, j, 1.0});
    }
    return W;
}

} // namespace locenc
