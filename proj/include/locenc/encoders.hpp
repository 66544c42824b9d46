#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "locenc/geo.hpp"

namespace locenc {

/// The fifteen position-encoder kinds.
enum class EncoderKind {
    Tile,
    Wrap,
    WrapFfn,
    Rbf,
    Rff,
    Grid,
    Theory,
    Xyz,
    Nerf,
    SphereC,
    SphereCPlus,
    SphereM,
    SphereMPlus,
    Dfs,
    SphericalHarmonics,
};

const char* encoder_kind_name(EncoderKind kind);
EncoderKind encoder_kind_from_name(const std::string& name); // throws DomainError

/// Full configuration of one position encoder. Fields irrelevant to a kind
/// are ignored by encode_position but still validated.
struct EncoderSpec {
    EncoderKind kind = EncoderKind::SphereC;
    int S = 32;              // number of scales (multi-scale kinds)
    double r_min = 1e-3;     // minimum scaling factor
    double r_max = 1.0;      // maximum scaling factor (360 for grid/theory)
    int W_dim = 512;         // PE width for rbf/rff
    double sigma = 1.0;      // rbf kernel size
    double delta = 1.0;      // rff frequency std
    int L = 15;              // max spherical-harmonics degree
    double cell_deg = 1.0;   // tile cell size in degrees
    std::uint64_t seed = 0;  // drives anchor/omega/shift sampling

    /// Kind-appropriate defaults: degree-based kinds (grid, theory) get
    /// r_max = 360, everything else r_max = 1.
    static EncoderSpec defaults(EncoderKind kind);
};

/// Throws DomainError if any field is out of its domain.
void validate_spec(const EncoderSpec& spec);

using PositionEmbedding = Eigen::VectorXd;

/// RBF anchor points, sampled from the training split.
struct RbfAnchors {
    std::vector<LocationDeg> anchors;
};

/// Random Fourier feature parameters: omega rows are direction vectors in
/// R^2, shifts are phases in [0, 2pi).
struct RffParams {
    Eigen::MatrixXd omegas; // W_dim x 2
    Eigen::VectorXd shifts; // W_dim
};

using EncoderAux = std::variant<std::monostate, RbfAnchors, RffParams>;

/// Geometric scale schedule: alpha_s = r_min * (r_max/r_min)^(s/(S-1)),
/// s = 0..S-1; [r_min] when S = 1. Strictly non-decreasing.
/// Throws DomainError on S < 1, r_min <= 0, or r_max < r_min.
std::vector<double> scale_factors(int S, double r_min, double r_max);

/// Length of the embedding produced by encode_position for this spec.
int output_dim(const EncoderSpec& spec);

/// Flat cell index for the tile encoder: cells of cell_deg degrees over
/// [-180,180] x [-90,90], row-major by latitude band. The inclusive upper
/// boundaries (+180, +90) fall in the last cell of their axis.
std::int64_t tile_cell_index(const EncoderSpec& spec, const LocationDeg& loc);

/// Total number of tile cells for this spec.
std::int64_t tile_cell_count(const EncoderSpec& spec);

/// The position encoder PE(.). aux must hold RbfAnchors for rbf and
/// RffParams for rff; it is ignored otherwise.
/// Throws MissingAuxError, DomainError.
PositionEmbedding encode_position(const EncoderSpec& spec, const LocationDeg& loc,
                                  const EncoderAux& aux = std::monostate{});

/// W_dim anchors drawn from train_locs: without replacement when the split
/// is large enough, with replacement otherwise. Deterministic given
/// (train_locs order, W_dim, seed).
/// Throws EmptyDatasetError.
RbfAnchors sample_rbf_anchors(const std::vector<LocationDeg>& train_locs, int W_dim,
                              std::uint64_t seed);

/// omegas ~ N(0, delta^2 I) i.i.d., shifts ~ U[0, 2pi). Deterministic given
/// seed. Throws DomainError on W_dim < 1 or delta <= 0.
RffParams sample_rff_params(int W_dim, double delta, std::uint64_t seed);

/// Real spherical harmonics Y_l^m for l = 0..L, m = -l..l, orthonormal
/// convention, colatitude theta = pi/2 - lat. Index of (l, m) is l^2 + l + m.
Eigen::VectorXd spherical_harmonics_basis(int L, const LocationDeg& loc);

} // namespace locenc
