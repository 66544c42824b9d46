#include "locenc/synth.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "locenc/errors.hpp"
#include "locenc/rng.hpp"

namespace locenc {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

LocationDeg xyz_to_latlon(const Vec3& v) {
    const Vec3 u = v.normalized();
    double lat = std::asin(std::clamp(u.z(), -1.0, 1.0)) * kRadToDeg;
    double lon = std::atan2(u.y(), u.x()) * kRadToDeg;
    lat = std::clamp(lat, -90.0, 90.0);
    lon = std::clamp(lon, -180.0, 180.0);
    return LocationDeg{lon, lat};
}

/// Uniform point in the spherical cap of angular radius rho around center.
LocationDeg sample_in_cap(const LocationDeg& center, double rho, std::mt19937_64& eng) {
    const double cos_theta = uniform_in(eng, std::cos(rho), 1.0);
    const double theta = std::acos(std::clamp(cos_theta, -1.0, 1.0));
    const double psi = uniform_in(eng, 0.0, 2.0 * M_PI);
    // Orthonormal frame at the center.
    const Vec3 c = latlon_to_xyz(center);
    Vec3 ref = std::abs(c.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 e1 = ref.cross(c).normalized();
    const Vec3 e2 = c.cross(e1);
    const Vec3 p = std::cos(theta) * c + std::sin(theta) * (std::cos(psi) * e1 + std::sin(psi) * e2);
    return xyz_to_latlon(p);
}

} // namespace

const char* synth_kind_name(SynthKind k) {
    switch (k) {
        case SynthKind::SectorClasses: return "sector_classes";
        case SynthKind::ClusterClasses: return "cluster_classes";
        case SynthKind::SmoothField: return "smooth_field";
        case SynthKind::BiasedClusters: return "biased_clusters";
    }
    return "?";
}

SynthKind synth_kind_from_name(const std::string& name) {
    if (name == "sector_classes") return SynthKind::SectorClasses;
    if (name == "cluster_classes") return SynthKind::ClusterClasses;
    if (name == "smooth_field") return SynthKind::SmoothField;
    if (name == "biased_clusters") return SynthKind::BiasedClusters;
    throw DomainError("unknown synthetic dataset kind '" + name + "'");
}

LocationDeg sample_area_uniform(std::mt19937_64& eng) {
    const double lon = uniform_in(eng, -180.0, 180.0);
    const double z = uniform_in(eng, -1.0, 1.0);
    const double lat = std::asin(z) * kRadToDeg;
    return LocationDeg{lon, lat};
}

Dataset synth_dataset(SynthKind kind, int n, const SynthParams& params, std::uint64_t seed) {
    if (n < 1) throw DomainError("synth_dataset: n must be >= 1");
    if (params.classes < 1) throw DomainError("synth_dataset: classes must be >= 1");
    if (params.clusters < 1) throw DomainError("synth_dataset: clusters must be >= 1");
    if (params.noise_sigma < 0.0) throw DomainError("synth_dataset: noise_sigma must be >= 0");
    if (!(params.spread_deg > 0.0)) throw DomainError("synth_dataset: spread_deg must be > 0");
    if (!(params.disc_radius_km > 0.0)) {
        throw DomainError("synth_dataset: disc_radius_km must be > 0");
    }
    if (params.train_frac < 0.0 || params.val_frac < 0.0 ||
        params.train_frac + params.val_frac > 1.0) {
        throw DomainError("synth_dataset: split fractions out of range");
    }

    Dataset dataset;
    dataset.task = (kind == SynthKind::SmoothField) ? Task::Regress : Task::Classify;
    dataset.records.reserve(static_cast<std::size_t>(n));

    std::mt19937_64 eng(mix_seed(seed, synth_kind_name(kind)));

    // Cluster centers drawn up-front so they do not depend on n.
    std::vector<LocationDeg> centers;
    if (kind == SynthKind::ClusterClasses || kind == SynthKind::BiasedClusters) {
        const int n_centers =
            kind == SynthKind::ClusterClasses ? params.classes : params.clusters;
        centers.reserve(static_cast<std::size_t>(n_centers));
        for (int c = 0; c < n_centers; ++c) centers.push_back(sample_area_uniform(eng));
    }

    const int n_train = static_cast<int>(std::ceil(params.train_frac * n));
    const int n_val = static_cast<int>(std::ceil(params.val_frac * n));

    for (int i = 0; i < n; ++i) {
        DatasetRecord rec;
        rec.id = std::to_string(i);
        rec.split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        switch (kind) {
            case SynthKind::SectorClasses: {
                rec.loc = sample_area_uniform(eng);
                const double width = 360.0 / params.classes;
                int sector = static_cast<int>(std::floor((rec.loc.lon + 180.0) / width));
                rec.label = std::clamp(sector, 0, params.classes - 1);
                break;
            }
            case SynthKind::ClusterClasses: {
                const int c = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(
                                                                      params.classes)));
                const Vec3 mu = latlon_to_xyz(centers[static_cast<std::size_t>(c)]);
                const double sig = params.spread_deg * M_PI / 180.0;
                const Vec3 p = mu + sig * Vec3(standard_normal(eng), standard_normal(eng),
                                               standard_normal(eng));
                rec.loc = xyz_to_latlon(p);
                rec.label = c;
                break;
            }
            case SynthKind::SmoothField: {
                rec.loc = sample_area_uniform(eng);
                const double lat_rad = rec.loc.lat * M_PI / 180.0;
                const double lon_rad = rec.loc.lon * M_PI / 180.0;
                rec.target = std::sin(2.0 * lat_rad) * std::cos(lon_rad);
                if (params.noise_sigma > 0.0) {
                    rec.target += params.noise_sigma * standard_normal(eng);
                }
                break;
            }
            case SynthKind::BiasedClusters: {
                const int c = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(
                                                                      params.clusters)));
                const double rho = params.disc_radius_km / kEarthRadiusKm;
                rec.loc = sample_in_cap(centers[static_cast<std::size_t>(c)], rho, eng);
                rec.label = c;
                break;
            }
        }
        if (dataset.task == Task::Classify) {
            dataset.n_classes = std::max(dataset.n_classes, rec.label + 1);
        }
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

} // namespace locenc
