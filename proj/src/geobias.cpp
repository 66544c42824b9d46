#include "locenc/geobias.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <unordered_map>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc {

namespace {

using Eigen::VectorXd;

constexpr double kRadToDeg = 180.0 / M_PI;

double moran_from_centered(const WeightMatrix& W, const VectorXd& z, double denom, double sum_w,
                           const std::vector<int>& perm) {
    double num = 0.0;
    if (perm.empty()) {
        for (const auto& e : W.entries) num += e.w * z[e.i] * z[e.j];
    } else {
        for (const auto& e : W.entries) {
            num += e.w * z[perm[static_cast<std::size_t>(e.i)]] *
                   z[perm[static_cast<std::size_t>(e.j)]];
        }
    }
    return (static_cast<double>(W.n) / sum_w) * (num / denom);
}

} // namespace

std::string LowPerfRule::to_string() const {
    switch (kind) {
        case Kind::Hit1Miss: return "hit1_miss";
        case Kind::AbsErrOverSigma: return "abs_err_over_sigma(" + format_double(param) + ")";
        case Kind::AbsErrOverPercentile:
            return "abs_err_over_percentile(" + format_double(param) + ")";
    }
    return "?";
}

LowPerfRule LowPerfRule::parse(const std::string& text) {
    LowPerfRule rule;
    auto param_of = [&](const std::string& s, const std::string& name,
                        double fallback) -> double {
        if (s == name) return fallback;
        if (s.size() > name.size() + 2 && s.compare(0, name.size() + 1, name + "(") == 0 &&
            s.back() == ')') {
            const std::string num = s.substr(name.size() + 1, s.size() - name.size() - 2);
            try {
                std::size_t used = 0;
                const double v = std::stod(num, &used);
                if (used == num.size()) return v;
            } catch (...) {
            }
        }
        throw DomainError("cannot parse low_perf_rule '" + text + "'");
    };
    if (text == "hit1_miss") {
        rule.kind = Kind::Hit1Miss;
        return rule;
    }
    if (text.rfind("abs_err_over_sigma", 0) == 0) {
        rule.kind = Kind::AbsErrOverSigma;
        rule.param = param_of(text, "abs_err_over_sigma", 1.0);
        return rule;
    }
    if (text.rfind("abs_err_over_percentile", 0) == 0) {
        rule.kind = Kind::AbsErrOverPercentile;
        rule.param = param_of(text, "abs_err_over_percentile", 90.0);
        if (rule.param < 0.0 || rule.param > 100.0) {
            throw DomainError("percentile must be in [0, 100]");
        }
        return rule;
    }
    throw DomainError("unknown low_perf_rule '" + text + "'");
}

double GeoBiasConfig::resolved_spacing_km() const {
    return background_spacing_km > 0.0 ? background_spacing_km : radius_km / 8.0;
}

void validate_geobias_config(const GeoBiasConfig& cfg) {
    if (!(cfg.radius_km > 0.0)) throw DomainError("radius_km must be > 0");
    if (cfg.k < 1) throw DomainError("k must be >= 1");
    if (cfg.n_permutations < 19) throw DomainError("n_permutations must be >= 19");
    if (!(cfg.p_min > 0.0) || cfg.p_min > 1.0) throw DomainError("p_min must be in (0, 1]");
    if (cfg.max_centers < 0) throw DomainError("max_centers must be >= 0");
    if (cfg.low_perf_rule.kind == LowPerfRule::Kind::AbsErrOverPercentile &&
        (cfg.low_perf_rule.param < 0.0 || cfg.low_perf_rule.param > 100.0)) {
        throw DomainError("percentile must be in [0, 100]");
    }
}

double morans_i(const Eigen::VectorXd& values, const WeightMatrix& W) {
    if (values.size() != W.n) throw ShapeError("morans_i: value count != W.n");
    if (W.n < 2) throw TooFewPointsError("morans_i: need n >= 2");
    const VectorXd z = values.array() - values.mean();
    const double denom = z.squaredNorm();
    if (denom == 0.0) throw ZeroVarianceError("morans_i: constant values");
    const double sum_w = W.total_weight();
    if (sum_w <= 0.0) throw DomainError("morans_i: weight matrix has no mass");
    return moran_from_centered(W, z, denom, sum_w, {});
}

double moran_null_reference(int n) {
    if (n < 2) throw DomainError("moran_null_reference: n must be >= 2");
    return -1.0 / (static_cast<double>(n) - 1.0);
}

SsiCalibration calibrate_ssi(const Eigen::VectorXd& values, const WeightMatrix& W,
                             int n_permutations, std::uint64_t seed) {
    if (n_permutations < 2) throw DomainError("calibrate_ssi: need >= 2 permutations");
    const VectorXd z = values.array() - values.mean();
    const double denom = z.squaredNorm();
    if (denom == 0.0) throw ZeroVarianceError("calibrate_ssi: constant values");
    const double sum_w = W.total_weight();

    std::mt19937_64 eng(seed);
    std::vector<int> perm(static_cast<std::size_t>(W.n));
    for (int i = 0; i < W.n; ++i) perm[static_cast<std::size_t>(i)] = i;

    double sum = 0.0;
    double sum_sq = 0.0;
    for (int t = 0; t < n_permutations; ++t) {
        shuffle_in_place(perm, eng);
        const double stat = moran_from_centered(W, z, denom, sum_w, perm);
        sum += stat;
        sum_sq += stat * stat;
    }
    SsiCalibration calib;
    const double n = static_cast<double>(n_permutations);
    calib.mu = sum / n;
    const double var = std::max(0.0, (sum_sq - n * calib.mu * calib.mu) / (n - 1.0));
    calib.sigma = std::sqrt(var);
    return calib;
}

double ssi_from_calibration(double i_obs, const SsiCalibration& calib, double p_min) {
    const double zscore = (i_obs - calib.mu) / std::max(calib.sigma, 1e-12);
    // Two-sided Gaussian tail 2(1 - Phi(|z|)) = erfc(|z|/sqrt 2).
    const double p = std::clamp(std::erfc(std::abs(zscore) / std::sqrt(2.0)), p_min, 1.0);
    return -std::log2(p);
}

double ssi(const Eigen::VectorXd& values, const WeightMatrix& W, int n_permutations,
           std::uint64_t seed, double p_min) {
    if (values.size() != W.n) throw ShapeError("ssi: value count != W.n");
    if (values.size() == 0) return 0.0;
    if ((values.array() == values[0]).all()) return 0.0; // no spatial information
    const SsiCalibration calib = calibrate_ssi(values, W, n_permutations, seed);
    return ssi_from_calibration(morans_i(values, W), calib, p_min);
}

std::vector<int> extract_neighborhood(const std::vector<LocationDeg>& points,
                                      const LocationDeg& center, double radius_km) {
    if (!(radius_km > 0.0)) throw DomainError("extract_neighborhood: radius_km must be > 0");
    std::vector<int> idx;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (haversine_km(points[i], center) <= radius_km) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

namespace {

std::vector<LocationDeg> background_lattice(const std::vector<LocationDeg>& obs,
                                            const LocationDeg& center,
                                            const GeoBiasConfig& config) {
    const double spacing_km = config.resolved_spacing_km();
    const double step_deg = spacing_km / kEarthRadiusKm * kRadToDeg;
    const int reach = static_cast<int>(std::floor(config.radius_km / spacing_km));
    const double coincident_km = spacing_km * 1e-6;

    std::vector<LocationDeg> nodes;
    for (int i = -reach; i <= reach; ++i) {
        const double lat = center.lat + i * step_deg;
        if (lat < -90.0 || lat > 90.0) continue;
        for (int j = -reach; j <= reach; ++j) {
            double lon = std::fmod(center.lon + j * step_deg + 180.0, 360.0);
            if (lon < 0.0) lon += 360.0;
            lon -= 180.0;
            const LocationDeg node{lon, lat};
            if (haversine_km(node, center) > config.radius_km) continue;
            bool observed = false;
            for (const auto& o : obs) {
                if (haversine_km(node, o) <= coincident_km) {
                    observed = true;
                    break;
                }
            }
            if (!observed) nodes.push_back(node);
        }
    }
    return nodes;
}

} // namespace

ScoreResult base_geo_bias(const std::vector<LocationDeg>& neighborhood_points,
                          const LocationDeg& center, const GeoBiasConfig& config) {
    validate_geobias_config(config);
    if (neighborhood_points.empty()) return {0.0, true};
    const std::vector<LocationDeg> background =
        background_lattice(neighborhood_points, center, config);

    std::vector<LocationDeg> pts = neighborhood_points;
    pts.insert(pts.end(), background.begin(), background.end());
    if (pts.size() < 3 || background.empty()) return {0.0, true};

    VectorXd labels(static_cast<Eigen::Index>(pts.size()));
    labels.head(static_cast<Eigen::Index>(neighborhood_points.size())).setConstant(1.0);
    labels.tail(static_cast<Eigen::Index>(background.size())).setConstant(-1.0);

    const WeightMatrix W = knn_weights(pts, config.k);
    return {ssi(labels, W, config.n_permutations, mix_seed(config.seed, "base"), config.p_min),
            false};
}

ScoreResult relative_geo_bias(const std::vector<PerfLabeledPoint>& neighborhood,
                              const GeoBiasConfig& config) {
    validate_geobias_config(config);
    if (neighborhood.size() < 3) return {0.0, true};
    VectorXd values(static_cast<Eigen::Index>(neighborhood.size()));
    std::vector<LocationDeg> pts;
    pts.reserve(neighborhood.size());
    for (std::size_t i = 0; i < neighborhood.size(); ++i) {
        values[static_cast<Eigen::Index>(i)] = neighborhood[i].value;
        pts.push_back(neighborhood[i].loc);
    }
    if ((values.array() == values[0]).all()) return {0.0, true};

    const WeightMatrix W = knn_weights(pts, config.k);
    const SsiCalibration calib =
        calibrate_ssi(values, W, config.n_permutations, mix_seed(config.seed, "rel_calib"));
    const double observed = ssi_from_calibration(morans_i(values, W), calib, config.p_min);

    // Mean SSI of random labelings of the same neighborhood, scored against
    // the same null (the permuted multiset is unchanged).
    const VectorXd z = values.array() - values.mean();
    const double denom = z.squaredNorm();
    const double sum_w = W.total_weight();
    std::mt19937_64 eng(mix_seed(config.seed, "rel_mean"));
    std::vector<int> perm(static_cast<std::size_t>(W.n));
    for (int i = 0; i < W.n; ++i) perm[static_cast<std::size_t>(i)] = i;
    double mean_random = 0.0;
    for (int t = 0; t < config.n_permutations; ++t) {
        shuffle_in_place(perm, eng);
        const double stat = moran_from_centered(W, z, denom, sum_w, perm);
        mean_random += ssi_from_calibration(stat, calib, config.p_min);
    }
    mean_random /= static_cast<double>(config.n_permutations);
    return {observed - mean_random, false};
}

std::vector<PerfLabeledPoint> binarize_performance(const std::vector<PredictionRow>& predictions,
                                                   const LowPerfRule& rule) {
    std::vector<PerfLabeledPoint> out;
    out.reserve(predictions.size());
    switch (rule.kind) {
        case LowPerfRule::Kind::Hit1Miss: {
            for (const auto& p : predictions) {
                if (p.hit1 < 0) {
                    throw DomainError("hit1_miss rule needs classification predictions");
                }
                out.push_back({p.loc, p.hit1 == 1 ? 1 : -1});
            }
            return out;
        }
        case LowPerfRule::Kind::AbsErrOverSigma: {
            double sum = 0.0;
            for (const auto& p : predictions) {
                if (!std::isfinite(p.abs_err)) {
                    throw DomainError("abs_err rules need regression predictions");
                }
                sum += p.abs_err;
            }
            const double n = static_cast<double>(predictions.size());
            const double mean = sum / n;
            double ss = 0.0;
            for (const auto& p : predictions) ss += (p.abs_err - mean) * (p.abs_err - mean);
            const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            const double threshold = mean + rule.param * sd;
            for (const auto& p : predictions) {
                out.push_back({p.loc, p.abs_err > threshold ? -1 : 1});
            }
            return out;
        }
        case LowPerfRule::Kind::AbsErrOverPercentile: {
            std::vector<double> errs;
            errs.reserve(predictions.size());
            for (const auto& p : predictions) {
                if (!std::isfinite(p.abs_err)) {
                    throw DomainError("abs_err rules need regression predictions");
                }
                errs.push_back(p.abs_err);
            }
            std::sort(errs.begin(), errs.end());
            // Nearest-rank percentile; values strictly above go low.
            const auto pos = static_cast<std::size_t>(std::max<long>(
                1, static_cast<long>(
                       std::ceil(rule.param / 100.0 * static_cast<double>(errs.size())))));
            const double threshold = errs[std::min(pos, errs.size()) - 1];
            for (const auto& p : predictions) {
                out.push_back({p.loc, p.abs_err > threshold ? -1 : 1});
            }
            return out;
        }
    }
    throw DomainError("unhandled low_perf_rule");
}

std::vector<PerfLabeledPoint> binarize_performance(const std::vector<DatasetRecord>& records,
                                                   const std::vector<PredictionRow>& predictions,
                                                   const LowPerfRule& rule) {
    std::unordered_map<std::string, const PredictionRow*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);
    std::vector<PredictionRow> joined;
    joined.reserve(records.size());
    std::vector<std::string> missing;
    for (const auto& r : records) {
        const auto it = by_id.find(r.id);
        if (it == by_id.end()) {
            if (missing.size() < 10) missing.push_back(r.id);
            continue;
        }
        PredictionRow row = *it->second;
        row.loc = r.loc;
        joined.push_back(std::move(row));
    }
    if (!missing.empty()) {
        std::string msg = "predictions missing for record ids:";
        for (const auto& id : missing) msg += " " + id;
        throw JoinError(msg);
    }
    return binarize_performance(joined, rule);
}

GeoBiasReport geo_bias_report(const std::vector<PerfLabeledPoint>& points,
                              const GeoBiasConfig& config) {
    validate_geobias_config(config);
    std::vector<int> low;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].value == -1) low.push_back(static_cast<int>(i));
    }
    if (low.empty()) throw NoLowPerfError("no low-performance observations");

    if (config.max_centers > 0 && static_cast<int>(low.size()) > config.max_centers) {
        std::mt19937_64 eng(mix_seed(config.seed, "centers"));
        const auto chosen = sample_without_replacement(
            low.size(), static_cast<std::size_t>(config.max_centers), eng);
        std::vector<int> sub;
        sub.reserve(chosen.size());
        for (std::size_t c : chosen) sub.push_back(low[c]);
        std::sort(sub.begin(), sub.end());
        low = std::move(sub);
    }

    std::vector<LocationDeg> all_locs;
    all_locs.reserve(points.size());
    for (const auto& p : points) all_locs.push_back(p.loc);

    GeoBiasReport report;
    report.config = config;
    report.centers.resize(low.size());

    // Per-center work is pure given the per-center seed; farm it out and
    // aggregate in center order.
    const auto worker = [&](std::size_t c) {
        const int pi = low[c];
        GeoBiasConfig center_cfg = config;
        center_cfg.seed = mix_seed(config.seed, static_cast<std::uint64_t>(pi));
        const LocationDeg center = points[static_cast<std::size_t>(pi)].loc;
        const std::vector<int> nbhd = extract_neighborhood(all_locs, center, config.radius_km);

        std::vector<LocationDeg> nbhd_locs;
        std::vector<PerfLabeledPoint> nbhd_pts;
        nbhd_locs.reserve(nbhd.size());
        nbhd_pts.reserve(nbhd.size());
        for (int i : nbhd) {
            nbhd_locs.push_back(all_locs[static_cast<std::size_t>(i)]);
            nbhd_pts.push_back(points[static_cast<std::size_t>(i)]);
        }
        const ScoreResult base = base_geo_bias(nbhd_locs, center, center_cfg);
        const ScoreResult rel = relative_geo_bias(nbhd_pts, center_cfg);

        CenterDiagnostics diag;
        diag.center_index = pi;
        diag.loc = center;
        diag.n_neighborhood = static_cast<int>(nbhd.size());
        diag.base = base.bits;
        diag.rel = rel.bits;
        diag.skipped = base.skipped || rel.skipped;
        report.centers[c] = diag;
    };

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LOCENC_THREADS")) {
        const int forced = std::atoi(env);
        if (forced > 0) hw = static_cast<unsigned>(forced);
    }
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::size_t>(hw, low.size()));
    if (n_threads <= 1) {
        for (std::size_t c = 0; c < low.size(); ++c) worker(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (unsigned th = 0; th < n_threads; ++th) {
            threads.emplace_back([&] {
                for (;;) {
                    const std::size_t c = next.fetch_add(1);
                    if (c >= low.size()) return;
                    worker(c);
                }
            });
        }
        for (auto& th : threads) th.join();
    }

    double base_sum = 0.0;
    double rel_sum = 0.0;
    for (const auto& diag : report.centers) {
        if (diag.skipped) {
            ++report.n_skipped;
            continue;
        }
        ++report.n_centers;
        base_sum += diag.base;
        rel_sum += diag.rel;
    }
    if (report.n_centers == 0) {
        report.base_mean = std::numeric_limits<double>::quiet_NaN();
        report.rel_mean = std::numeric_limits<double>::quiet_NaN();
    } else {
        report.base_mean = base_sum / report.n_centers;
        report.rel_mean = rel_sum / report.n_centers;
    }
    return report;
}

} // namespace locenc
