#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "locenc/dataset.hpp"

namespace locenc {

/// Synthetic dataset families; desk-scale stand-ins with known structure.
enum class SynthKind {
    SectorClasses,  // area-uniform points, label = longitude sector
    ClusterClasses, // vMF-like clusters, label = cluster
    SmoothField,    // area-uniform points, target = sin(2 lat) cos(lon) + noise
    BiasedClusters, // points packed into spherical-cap clusters
};

const char* synth_kind_name(SynthKind k);
SynthKind synth_kind_from_name(const std::string& name); // throws DomainError

struct SynthParams {
    int classes = 8;            // sector/cluster class count
    int clusters = 5;           // biased_clusters cap count
    double noise_sigma = 0.05;  // smooth_field noise std
    double spread_deg = 10.0;   // cluster_classes angular spread
    double disc_radius_km = 500.0; // biased_clusters cap radius
    double train_frac = 0.7;
    double val_frac = 0.1;
};

/// Point uniform w.r.t. sphere surface area (lat = asin of uniform).
LocationDeg sample_area_uniform(std::mt19937_64& eng);

/// Deterministic given (kind, n, params, seed). Splits are assigned by index
/// range with the configured fractions. Throws DomainError on bad params.
Dataset synth_dataset(SynthKind kind, int n, const SynthParams& params, std::uint64_t seed);

} // namespace locenc
