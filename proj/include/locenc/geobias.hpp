#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "locenc/dataset.hpp"
#include "locenc/weights.hpp"

namespace locenc {

/// How per-record performance is collapsed to {+1 high, -1 low}.
struct LowPerfRule {
    enum class Kind { Hit1Miss, AbsErrOverSigma, AbsErrOverPercentile };
    Kind kind = Kind::Hit1Miss;
    double param = 1.0; // sigma multiplier c, or percentile p

    std::string to_string() const;
    static LowPerfRule parse(const std::string& text); // throws DomainError
};

struct GeoBiasConfig {
    double radius_km = 100.0;
    int k = 4;
    int n_permutations = 199;
    std::uint64_t seed = 0;
    double background_spacing_km = 0.0; // <= 0 resolves to radius_km / 8
    double p_min = 1e-12;
    int max_centers = 0; // <= 0 means all low-performance points
    LowPerfRule low_perf_rule;

    double resolved_spacing_km() const;
};

void validate_geobias_config(const GeoBiasConfig& cfg); // throws DomainError

struct PerfLabeledPoint {
    LocationDeg loc;
    int value = 1; // +1 high performance, -1 low performance
};

/// Classic Moran's I: (N / sum W) * sum_ij W_ij (x_i - xbar)(x_j - xbar) /
/// sum_i (x_i - xbar)^2. Throws ZeroVarianceError on constant values.
double morans_i(const Eigen::VectorXd& values, const WeightMatrix& W);

/// The null reference value -1/(n-1).
double moran_null_reference(int n);

/// Mean/std of Moran's I over seeded random permutations of the values.
/// The null depends only on the value multiset and W.
struct SsiCalibration {
    double mu = 0.0;
    double sigma = 0.0;
};

SsiCalibration calibrate_ssi(const Eigen::VectorXd& values, const WeightMatrix& W,
                             int n_permutations, std::uint64_t seed);

/// Bits of a two-sided Gaussian tail at the calibrated z of an observed I.
double ssi_from_calibration(double i_obs, const SsiCalibration& calib, double p_min);

/// Spatial self-information in bits: z-score the observed Moran's I against
/// the permutation null, p = two-sided Gaussian tail clamped to [p_min, 1],
/// SSI = -log2 p. Constant values return 0 (no spatial information).
double ssi(const Eigen::VectorXd& values, const WeightMatrix& W, int n_permutations,
           std::uint64_t seed, double p_min);

/// Indices of all points within radius_km of center (closed ball).
std::vector<int> extract_neighborhood(const std::vector<LocationDeg>& points,
                                      const LocationDeg& center, double radius_km);

struct ScoreResult {
    double bits = 0.0;
    bool skipped = false;
};

/// SSI of the observation locations against an unobserved-background lattice
/// clipped to the radius disc: {observations: +1} vs {background: -1} under
/// k-NN weights. Lattice nodes coinciding with an observation are dropped.
/// Unions with < 3 points or a single label return 0, flagged skipped.
ScoreResult base_geo_bias(const std::vector<LocationDeg>& neighborhood_points,
                          const LocationDeg& center, const GeoBiasConfig& config);

/// SSI of the +-1 labeling minus the mean SSI of seeded random relabelings
/// of the same neighborhood (shared calibration). May be negative. Skipped
/// when n < 3 or only one label is present.
ScoreResult relative_geo_bias(const std::vector<PerfLabeledPoint>& neighborhood,
                              const GeoBiasConfig& config);

/// Collapse predictions to +-1 performance labels per the rule.
std::vector<PerfLabeledPoint> binarize_performance(const std::vector<PredictionRow>& predictions,
                                                   const LowPerfRule& rule);

/// Join-validating variant: every record id must have a prediction
/// (JoinError lists the first 10 missing); labels come out in record order.
std::vector<PerfLabeledPoint> binarize_performance(const std::vector<DatasetRecord>& records,
                                                   const std::vector<PredictionRow>& predictions,
                                                   const LowPerfRule& rule);

struct CenterDiagnostics {
    int center_index = 0; // index into the labeled point list
    LocationDeg loc;
    int n_neighborhood = 0;
    double base = 0.0;
    double rel = 0.0;
    bool skipped = false;
};

struct GeoBiasReport {
    double base_mean = 0.0; // NaN when n_centers = 0
    double rel_mean = 0.0;
    int n_centers = 0; // centers contributing to the means
    int n_skipped = 0;
    std::vector<CenterDiagnostics> centers;
    GeoBiasConfig config;
};

/// Every low-performance point (subsampled to max_centers by seeded choice)
/// becomes a neighborhood center; per-center seeds derive from (config.seed,
/// point index) so parallel scheduling cannot change the output.
/// Throws NoLowPerfError when no -1 labels exist.
GeoBiasReport geo_bias_report(const std::vector<PerfLabeledPoint>& points,
                              const GeoBiasConfig& config);

} // namespace locenc
