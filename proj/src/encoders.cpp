#include "locenc/encoders.hpp"

#include <array>
#include <cmath>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

const std::array<std::pair<EncoderKind, const char*>, 15> kKindNames = {{
    {EncoderKind::Tile, "tile"},
    {EncoderKind::Wrap, "wrap"},
    {EncoderKind::WrapFfn, "wrap_ffn"},
    {EncoderKind::Rbf, "rbf"},
    {EncoderKind::Rff, "rff"},
    {EncoderKind::Grid, "grid"},
    {EncoderKind::Theory, "theory"},
    {EncoderKind::Xyz, "xyz"},
    {EncoderKind::Nerf, "nerf"},
    {EncoderKind::SphereC, "sphereC"},
    {EncoderKind::SphereCPlus, "sphereC_plus"},
    {EncoderKind::SphereM, "sphereM"},
    {EncoderKind::SphereMPlus, "sphereM_plus"},
    {EncoderKind::Dfs, "dfs"},
    {EncoderKind::SphericalHarmonics, "spherical_harmonics"},
}};

} // namespace

const char* encoder_kind_name(EncoderKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "?";
}

EncoderKind encoder_kind_from_name(const std::string& name) {
    for (const auto& [k, n] : kKindNames) {
        if (name == n) return k;
    }
    throw DomainError("unknown encoder kind '" + name + "'");
}

EncoderSpec EncoderSpec::defaults(EncoderKind kind) {
    EncoderSpec spec;
    spec.kind = kind;
    if (kind == EncoderKind::Grid || kind == EncoderKind::Theory) spec.r_max = 360.0;
    return spec;
}

void validate_spec(const EncoderSpec& spec) {
    if (spec.S < 1) throw DomainError("S must be >= 1");
    if (!(spec.r_min > 0.0)) throw DomainError("r_min must be > 0");
    if (spec.r_max < spec.r_min) throw DomainError("r_max must be >= r_min");
    if (spec.W_dim < 1) throw DomainError("W_dim must be >= 1");
    if (!(spec.sigma > 0.0)) throw DomainError("sigma must be > 0");
    if (!(spec.delta > 0.0)) throw DomainError("delta must be > 0");
    if (spec.L < 0) throw DomainError("L must be >= 0");
    if (!(spec.cell_deg > 0.0)) throw DomainError("cell_deg must be > 0");
}

std::vector<double> scale_factors(int S, double r_min, double r_max) {
    if (S < 1) throw DomainError("scale_factors: S must be >= 1");
    if (!(r_min > 0.0)) throw DomainError("scale_factors: r_min must be > 0");
    if (r_max < r_min) throw DomainError("scale_factors: r_max must be >= r_min");
    std::vector<double> alphas(static_cast<std::size_t>(S));
    if (S == 1) {
        alphas[0] = r_min;
        return alphas;
    }
    const double g = r_max / r_min;
    for (int s = 0; s < S; ++s) {
        alphas[static_cast<std::size_t>(s)] =
            r_min * std::pow(g, static_cast<double>(s) / static_cast<double>(S - 1));
    }
    alphas.front() = r_min;
    alphas.back() = r_max;
    return alphas;
}

int output_dim(const EncoderSpec& spec) {
    switch (spec.kind) {
        case EncoderKind::Tile: return 1;
        case EncoderKind::Wrap:
        case EncoderKind::WrapFfn: return 4;
        case EncoderKind::Rbf:
        case EncoderKind::Rff: return spec.W_dim;
        case EncoderKind::Grid: return 4 * spec.S;
        case EncoderKind::Theory: return 6 * spec.S;
        case EncoderKind::Xyz: return 3;
        case EncoderKind::Nerf: return 6 * spec.S;
        case EncoderKind::SphereC: return 3 * spec.S;
        case EncoderKind::SphereCPlus: return 7 * spec.S;
        case EncoderKind::SphereM: return 5 * spec.S;
        case EncoderKind::SphereMPlus: return 9 * spec.S;
        case EncoderKind::Dfs: return 6 * spec.S;
        case EncoderKind::SphericalHarmonics: return (spec.L + 1) * (spec.L + 1);
    }
    throw DomainError("output_dim: unhandled encoder kind");
}

std::int64_t tile_cell_count(const EncoderSpec& spec) {
    const auto n_lon = static_cast<std::int64_t>(std::ceil(360.0 / spec.cell_deg));
    const auto n_lat = static_cast<std::int64_t>(std::ceil(180.0 / spec.cell_deg));
    return n_lon * n_lat;
}

std::int64_t tile_cell_index(const EncoderSpec& spec, const LocationDeg& loc) {
    const auto n_lon = static_cast<std::int64_t>(std::ceil(360.0 / spec.cell_deg));
    const auto n_lat = static_cast<std::int64_t>(std::ceil(180.0 / spec.cell_deg));
    auto clamp = [](std::int64_t v, std::int64_t n) {
        return v < 0 ? 0 : (v >= n ? n - 1 : v);
    };
    const auto ix =
        clamp(static_cast<std::int64_t>(std::floor((loc.lon + 180.0) / spec.cell_deg)), n_lon);
    const auto iy =
        clamp(static_cast<std::int64_t>(std::floor((loc.lat + 90.0) / spec.cell_deg)), n_lat);
    return ix + n_lon * iy;
}

namespace {

// Four grid terms for one scale. Degree-based kinds pass angles scaled by
// 2*pi/alpha (alpha is a wavelength in degrees, alpha = 360 spans the full
// circle); radian-based kinds pass angles scaled by 1/alpha.
void append_grid_terms(Eigen::VectorXd& out, Eigen::Index& at, double lon_arg, double lat_arg) {
    out[at++] = std::sin(lon_arg);
    out[at++] = std::cos(lon_arg);
    out[at++] = std::sin(lat_arg);
    out[at++] = std::cos(lat_arg);
}

void append_sphere_c_terms(Eigen::VectorXd& out, Eigen::Index& at, double lam, double phi) {
    out[at++] = std::sin(phi);
    out[at++] = std::cos(phi) * std::cos(lam);
    out[at++] = std::cos(phi) * std::sin(lam);
}

} // namespace

PositionEmbedding encode_position(const EncoderSpec& spec, const LocationDeg& loc,
                                  const EncoderAux& aux) {
    validate_spec(spec);
    Eigen::VectorXd out(output_dim(spec));
    Eigen::Index at = 0;

    const double lam = loc.lon * kDegToRad;
    const double phi = loc.lat * kDegToRad;

    switch (spec.kind) {
        case EncoderKind::Tile: {
            out[0] = static_cast<double>(tile_cell_index(spec, loc));
            return out;
        }
        case EncoderKind::Wrap:
        case EncoderKind::WrapFfn: {
            const double lt = loc.lon / 180.0;
            const double pt = loc.lat / 90.0;
            out << std::sin(M_PI * lt), std::cos(M_PI * lt), std::sin(M_PI * pt),
                std::cos(M_PI * pt);
            return out;
        }
        case EncoderKind::Rbf: {
            const auto* anchors = std::get_if<RbfAnchors>(&aux);
            if (anchors == nullptr) throw MissingAuxError("rbf requires RbfAnchors aux");
            if (static_cast<int>(anchors->anchors.size()) != spec.W_dim) {
                throw DomainError("rbf anchor count does not match W_dim");
            }
            const double inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
            const double x0 = loc.lon / 180.0;
            const double x1 = loc.lat / 90.0;
            for (int m = 0; m < spec.W_dim; ++m) {
                const auto& a = anchors->anchors[static_cast<std::size_t>(m)];
                const double d0 = x0 - a.lon / 180.0;
                const double d1 = x1 - a.lat / 90.0;
                out[m] = std::exp(-(d0 * d0 + d1 * d1) * inv);
            }
            return out;
        }
        case EncoderKind::Rff: {
            const auto* params = std::get_if<RffParams>(&aux);
            if (params == nullptr) throw MissingAuxError("rff requires RffParams aux");
            if (params->omegas.rows() != spec.W_dim || params->omegas.cols() != 2 ||
                params->shifts.size() != spec.W_dim) {
                throw DomainError("rff params do not match W_dim");
            }
            const Eigen::Vector2d x(loc.lon / 180.0, loc.lat / 90.0);
            const double scale = std::sqrt(2.0) / std::sqrt(static_cast<double>(spec.W_dim));
            out = (((params->omegas * x) + params->shifts).array().cos() * scale).matrix();
            return out;
        }
        case EncoderKind::Grid: {
            for (double alpha : scale_factors(spec.S, spec.r_min, spec.r_max)) {
                const double w = 2.0 * M_PI / alpha;
                append_grid_terms(out, at, w * loc.lon, w * loc.lat);
            }
            return out;
        }
        case EncoderKind::Theory: {
            // Unit directions at 0, 120, 240 degrees.
            static const double a[3][2] = {
                {1.0, 0.0}, {-0.5, std::sqrt(3.0) / 2.0}, {-0.5, -std::sqrt(3.0) / 2.0}};
            for (double alpha : scale_factors(spec.S, spec.r_min, spec.r_max)) {
                const double w = 2.0 * M_PI / alpha;
                for (const auto& dir : a) {
                    const double proj = w * (loc.lon * dir[0] + loc.lat * dir[1]);
                    out[at++] = std::sin(proj);
                    out[at++] = std::cos(proj);
                }
            }
            return out;
        }
        case EncoderKind::Xyz: {
            const Vec3 v = latlon_to_xyz(loc);
            out << v.x(), v.y(), v.z();
            return out;
        }
        case EncoderKind::Nerf: {
            const Vec3 v = latlon_to_xyz(loc);
            for (int s = 0; s < spec.S; ++s) {
                const double f = std::ldexp(M_PI, s); // 2^s * pi
                for (int c = 0; c < 3; ++c) {
                    out[at++] = std::sin(f * v[c]);
                    out[at++] = std::cos(f * v[c]);
                }
            }
            return out;
        }
        case EncoderKind::SphereC: {
            for (double alpha : scale_factors(spec.S, spec.r_min, spec.r_max)) {
                append_sphere_c_terms(out, at, lam / alpha, phi / alpha);
            }
            return out;
        }
        case EncoderKind::SphereCPlus: {
            for (double alpha : scale_factors(spec.S, spec.r_min, spec.r_max)) {
                append_sphere_c_terms(out, at, lam / alpha, phi / alpha);
                append_grid_terms(out, at, lam / alpha, phi / alpha);
            }
            return out;
        }
        case EncoderKind::SphereM: {
            const auto alphas = scale_factors(spec.S, spec.r_min, spec.r_max);
            const double a0 = alphas.front(); // finest scale mixed into every term
            for (double alpha : alphas) {
                out[at++] = std::sin(phi / alpha);
                out[at++] = std::cos(phi / alpha) * std::cos(lam / a0);
                out[at++] = std::cos(phi / a0) * std::cos(lam / alpha);
                out[at++] = std::cos(phi / alpha) * std::sin(lam / a0);
                out[at++] = std::cos(phi / a0) * std::sin(lam / alpha);
            }
            return out;
        }
        case EncoderKind::SphereMPlus: {
            const auto alphas = scale_factors(spec.S, spec.r_min, spec.r_max);
            const double a0 = alphas.front();
            for (double alpha : alphas) {
                out[at++] = std::sin(phi / alpha);
                out[at++] = std::cos(phi / alpha) * std::cos(lam / a0);
                out[at++] = std::cos(phi / a0) * std::cos(lam / alpha);
                out[at++] = std::cos(phi / alpha) * std::sin(lam / a0);
                out[at++] = std::cos(phi / a0) * std::sin(lam / alpha);
                append_grid_terms(out, at, lam / alpha, phi / alpha);
            }
            return out;
        }
        case EncoderKind::Dfs: {
            for (double alpha : scale_factors(spec.S, spec.r_min, spec.r_max)) {
                const double la = lam / alpha;
                const double ph = phi / alpha;
                out[at++] = std::sin(ph);
                out[at++] = std::cos(ph);
                out[at++] = std::sin(la);
                out[at++] = std::cos(la);
                out[at++] = std::cos(ph) * std::sin(la);
                out[at++] = std::cos(ph) * std::cos(la);
            }
            return out;
        }
        case EncoderKind::SphericalHarmonics:
            return spherical_harmonics_basis(spec.L, loc);
    }
    throw DomainError("encode_position: unhandled encoder kind");
}

RbfAnchors sample_rbf_anchors(const std::vector<LocationDeg>& train_locs, int W_dim,
                              std::uint64_t seed) {
    if (train_locs.empty()) throw EmptyDatasetError("sample_rbf_anchors: no training locations");
    if (W_dim < 1) throw DomainError("sample_rbf_anchors: W_dim must be >= 1");
    std::mt19937_64 eng(mix_seed(seed, "rbf_anchors"));
    RbfAnchors result;
    result.anchors.reserve(static_cast<std::size_t>(W_dim));
    const std::size_t n = train_locs.size();
    if (n >= static_cast<std::size_t>(W_dim)) {
        for (std::size_t i : sample_without_replacement(n, static_cast<std::size_t>(W_dim), eng)) {
            result.anchors.push_back(train_locs[i]);
        }
    } else {
        for (int i = 0; i < W_dim; ++i) {
            result.anchors.push_back(train_locs[uniform_index(eng, n)]);
        }
    }
    return result;
}

RffParams sample_rff_params(int W_dim, double delta, std::uint64_t seed) {
    if (W_dim < 1) throw DomainError("sample_rff_params: W_dim must be >= 1");
    if (!(delta > 0.0)) throw DomainError("sample_rff_params: delta must be > 0");
    std::mt19937_64 eng(mix_seed(seed, "rff_params"));
    RffParams params;
    params.omegas.resize(W_dim, 2);
    params.shifts.resize(W_dim);
    for (int i = 0; i < W_dim; ++i) {
        params.omegas(i, 0) = delta * standard_normal(eng);
        params.omegas(i, 1) = delta * standard_normal(eng);
    }
    for (int i = 0; i < W_dim; ++i) {
        params.shifts[i] = uniform_in(eng, 0.0, 2.0 * M_PI);
    }
    return params;
}

Eigen::VectorXd spherical_harmonics_basis(int L, const LocationDeg& loc) {
    if (L < 0) throw DomainError("spherical_harmonics_basis: L must be >= 0");
    const int dim = (L + 1) * (L + 1);
    Eigen::VectorXd out(dim);

    // x = cos(theta) with theta the colatitude; sin(theta) = cos(lat) >= 0.
    const double x = sind(loc.lat);
    const double sx = cosd(loc.lat);
    const double lam = loc.lon * kDegToRad;

    // Fully normalized associated Legendre values P̄_l^m including the
    // sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) factor, computed by stable
    // recurrences on the normalized quantities (no factorials).
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L + 1, L + 1); // P(l, m), m <= l
    P(0, 0) = std::sqrt(1.0 / (4.0 * M_PI));
    for (int m = 1; m <= L; ++m) {
        P(m, m) = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sx * P(m - 1, m - 1);
    }
    for (int m = 0; m < L; ++m) {
        P(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * P(m, m);
    }
    for (int m = 0; m <= L; ++m) {
        for (int l = m + 2; l <= L; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
            const double b =
                std::sqrt((4.0 * (l - 1.0) * (l - 1.0) - 1.0) /
                          ((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m));
            P(l, m) = a * (x * P(l - 1, m) - P(l - 2, m) / b);
        }
    }

    const double sqrt2 = std::sqrt(2.0);
    for (int l = 0; l <= L; ++l) {
        const int base = l * l + l; // index of (l, 0)
        out[base] = P(l, 0);
        for (int m = 1; m <= l; ++m) {
            out[base + m] = sqrt2 * P(l, m) * std::cos(m * lam);
            out[base - m] = sqrt2 * P(l, m) * std::sin(m * lam);
        }
    }
    return out;
}

} // namespace locenc
