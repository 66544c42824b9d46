#include "locenc/hotspot.hpp"

#include <cmath>

#include "locenc/errors.hpp"

namespace locenc {

const char* gi_star_bin(double z) {
    if (z >= 2.576) return "hot99";
    if (z >= 1.96) return "hot95";
    if (z >= 1.645) return "hot90";
    if (z <= -2.576) return "cold99";
    if (z <= -1.96) return "cold95";
    if (z <= -1.645) return "cold90";
    return "ns";
}

GiStarResult getis_ord_gi_star(const Eigen::VectorXd& values, const WeightMatrix& W) {
    const int n = W.n;
    if (values.size() != n) throw ShapeError("getis_ord_gi_star: value count != W.n");
    if (n < 3) throw TooFewPointsError("getis_ord_gi_star: need n >= 3");

    const double mean = values.mean();
    const double s = std::sqrt(values.squaredNorm() / static_cast<double>(n) - mean * mean);
    if (s == 0.0) throw ZeroVarianceError("getis_ord_gi_star: constant values");

    // Per-row accumulations including the implicit self-weight of 1.
    Eigen::VectorXd wx = values;                                // sum_j w_ij x_j
    Eigen::VectorXd sw = Eigen::VectorXd::Ones(n);              // sum_j w_ij
    Eigen::VectorXd sw2 = Eigen::VectorXd::Ones(n);             // sum_j w_ij^2
    for (const auto& e : W.entries) {
        wx[e.i] += e.w * values[e.j];
        sw[e.i] += e.w;
        sw2[e.i] += e.w * e.w;
    }

    GiStarResult result;
    result.z.resize(n);
    result.bins.reserve(static_cast<std::size_t>(n));
    const double nn = static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
        const double denom =
            s * std::sqrt((nn * sw2[i] - sw[i] * sw[i]) / (nn - 1.0));
        result.z[i] = (wx[i] - mean * sw[i]) / denom;
        result.bins.emplace_back(gi_star_bin(result.z[i]));
    }
    return result;
}

} // namespace locenc
