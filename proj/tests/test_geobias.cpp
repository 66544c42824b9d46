#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "locenc/errors.hpp"
#include "locenc/geobias.hpp"
#include "locenc/rng.hpp"
#include "test_util.hpp"

using namespace locenc;

namespace {

/// Independent oracle: the double sum evaluated naively over a dense matrix.
double moran_bruteforce(const Eigen::VectorXd& x, const Eigen::MatrixXd& W) {
    const int n = static_cast<int>(x.size());
    double xbar = 0.0;
    for (int i = 0; i < n; ++i) xbar += x[i];
    xbar /= n;
    double sum_w = 0.0;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            sum_w += W(i, j);
            num += W(i, j) * (x[i] - xbar) * (x[j] - xbar);
        }
        den += (x[i] - xbar) * (x[i] - xbar);
    }
    return (static_cast<double>(n) / sum_w) * (num / den);
}

Eigen::MatrixXd dense_of(const WeightMatrix& W) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(W.n, W.n);
    for (const auto& e : W.entries) D(e.i, e.j) = e.w;
    return D;
}

/// Undirected ring over n nodes, unit weights both directions.
WeightMatrix ring_weights(int n) {
    WeightMatrix W;
    W.n = n;
    for (int i = 0; i < n; ++i) {
        const int prev = (i + n - 1) % n;
        const int next = (i + 1) % n;
        W.entries.push_back({i, std::min(prev, next), 1.0});
        W.entries.push_back({i, std::max(prev, next), 1.0});
    }
    return W;
}

GeoBiasConfig quick_config(std::uint64_t seed) {
    GeoBiasConfig cfg;
    cfg.radius_km = 1000.0;
    cfg.k = 4;
    cfg.n_permutations = 99;
    cfg.seed = seed;
    return cfg;
}

std::vector<LocationDeg> disc_points(const LocationDeg& center, double radius_km, int n,
                                     std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::vector<LocationDeg> pts;
    pts.reserve(static_cast<std::size_t>(n));
    const double deg_per_km = 180.0 / (M_PI * kEarthRadiusKm);
    while (static_cast<int>(pts.size()) < n) {
        const double dx = uniform_in(eng, -radius_km, radius_km);
        const double dy = uniform_in(eng, -radius_km, radius_km);
        if (dx * dx + dy * dy > radius_km * radius_km) continue;
        pts.push_back({center.lon + dx * deg_per_km, center.lat + dy * deg_per_km});
    }
    return pts;
}

} // namespace

TEST_CASE("knn_weights construction") {
    // k is clipped to n-1.
    const WeightMatrix two = knn_weights({{0, 0}, {1, 0}}, 4);
    CHECK(two.entries.size() == 2);

    // Equidistant tie resolves to the lower input index.
    const WeightMatrix three = knn_weights({{-1, 0}, {0, 0}, {1, 0}}, 1);
    for (const auto& e : three.entries) {
        if (e.i == 1) CHECK(e.j == 0);
    }

    const auto pts = testutil::random_locations(100, 55);
    const WeightMatrix W = knn_weights(pts, 4);
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(100);
    for (const auto& e : W.entries) {
        CHECK(e.i != e.j); // no self loops
        CHECK(e.w == 1.0);
        row_sum[e.i] += e.w;
    }
    for (int i = 0; i < 100; ++i) CHECK(row_sum[i] == 4.0);

    CHECK_THROWS_AS(knn_weights({{0, 0}}, 1), TooFewPointsError);
}

TEST_CASE("morans_i ring fixtures") {
    const WeightMatrix ring = ring_weights(4);
    Eigen::Vector4d blocks(1, 1, -1, -1);
    CHECK(std::abs(morans_i(blocks, ring) - 0.0) <= 1e-12);
    Eigen::Vector4d alternating(1, -1, 1, -1);
    CHECK(std::abs(morans_i(alternating, ring) - (-1.0)) <= 1e-12);
    Eigen::Vector4d constant(2, 2, 2, 2);
    CHECK_THROWS_AS(morans_i(constant, ring), ZeroVarianceError);
}

TEST_CASE("morans_i equals the brute-force double sum on random instances") {
    std::mt19937_64 eng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 5 + static_cast<int>(uniform_index(eng, 46));
        const int k = 2 + static_cast<int>(uniform_index(eng, 5));
        const auto pts = testutil::random_locations(n, 1000 + static_cast<std::uint64_t>(trial));
        const WeightMatrix W = knn_weights(pts, k);
        Eigen::VectorXd values(n);
        for (int i = 0; i < n; ++i) values[i] = standard_normal(eng);
        CHECK(std::abs(morans_i(values, W) - moran_bruteforce(values, dense_of(W))) <= 1e-10);
    }
}

TEST_CASE("moran_null_reference") {
    CHECK(moran_null_reference(2) == -1.0);
    CHECK(moran_null_reference(101) == doctest::Approx(-0.01).epsilon(1e-14));
    CHECK(moran_null_reference(5) == -0.25);
    CHECK_THROWS_AS(moran_null_reference(1), DomainError);
}

TEST_CASE("morans_i is affine invariant") {
    std::mt19937_64 eng(19);
    const auto pts = testutil::random_locations(40, 77);
    const WeightMatrix W = knn_weights(pts, 4);
    Eigen::VectorXd values(40);
    for (int i = 0; i < 40; ++i) values[i] = standard_normal(eng);
    const double base = morans_i(values, W);
    for (double a : {2.0, -0.5, 10.0}) {
        for (double b : {0.0, 3.0, -7.0}) {
            CHECK(std::abs(morans_i(a * values.array() + b, W) - base) <= 1e-9);
        }
    }
}

TEST_CASE("ssi basics") {
    const WeightMatrix ring = ring_weights(20);
    Eigen::VectorXd constant = Eigen::VectorXd::Ones(20);
    CHECK(ssi(constant, ring, 199, 3, 1e-12) == 0.0);

    Eigen::VectorXd alternating(20);
    for (int i = 0; i < 20; ++i) alternating[i] = i % 2 == 0 ? 1.0 : -1.0;
    CHECK(ssi(alternating, ring, 199, 3, 1e-12) >= 3.0);

    // Global label flip leaves the score unchanged: centered products are
    // identical, so this holds exactly, well within the 1e-9 contract.
    const Eigen::VectorXd flipped = -alternating;
    CHECK(std::abs(ssi(alternating, ring, 199, 3, 1e-12) -
                   ssi(flipped, ring, 199, 3, 1e-12)) <= 1e-9);
}

TEST_CASE("ssi null calibration on random labels") {
    std::vector<double> scores;
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = testutil::random_locations(100, 400 + static_cast<std::uint64_t>(trial));
        const WeightMatrix W = knn_weights(pts, 4);
        std::mt19937_64 eng(900 + static_cast<std::uint64_t>(trial));
        Eigen::VectorXd labels(100);
        for (int i = 0; i < 100; ++i) labels[i] = uniform01(eng) < 0.5 ? 1.0 : -1.0;
        if (std::abs(labels.sum()) == 100.0) labels[0] = -labels[0];
        scores.push_back(ssi(labels, W, 99, 5000 + static_cast<std::uint64_t>(trial), 1e-12));
    }
    std::nth_element(scores.begin(), scores.begin() + 50, scores.end());
    CHECK(scores[50] <= 2.0); // median is ~1 bit under the null
}

TEST_CASE("extract_neighborhood closed ball") {
    const std::vector<LocationDeg> pts = {{0, 0}, {1, 0}, {2, 0}, {10, 0}};
    const LocationDeg center{0, 0};
    const double d1 = haversine_km(center, pts[1]);

    const auto only_center = extract_neighborhood(pts, center, d1 * 0.5);
    CHECK(only_center == std::vector<int>{0});

    const auto all = extract_neighborhood(pts, center, 1e9);
    CHECK(all.size() == 4);

    // Point exactly at the radius boundary is included.
    const auto boundary = extract_neighborhood(pts, center, d1);
    CHECK(boundary == std::vector<int>{0, 1});

    CHECK_THROWS_AS(extract_neighborhood(pts, center, 0.0), DomainError);
}

TEST_CASE("base_geo_bias background behavior") {
    GeoBiasConfig cfg = quick_config(42);
    cfg.radius_km = 500.0;

    SUBCASE("observations exactly on the lattice carry no clustering signal") {
        // Reconstruct the lattice positions with the same arithmetic; the
        // dedup leaves zero background, a constant union, and a skip.
        const LocationDeg center{30.0, 10.0};
        const double spacing = cfg.resolved_spacing_km();
        const double step_deg = spacing / kEarthRadiusKm * 180.0 / M_PI;
        const int reach = static_cast<int>(std::floor(cfg.radius_km / spacing));
        std::vector<LocationDeg> obs;
        for (int i = -reach; i <= reach; ++i) {
            for (int j = -reach; j <= reach; ++j) {
                double lon = std::fmod(center.lon + j * step_deg + 180.0, 360.0);
                if (lon < 0.0) lon += 360.0;
                lon -= 180.0;
                const LocationDeg node{lon, center.lat + i * step_deg};
                if (haversine_km(node, center) <= cfg.radius_km) obs.push_back(node);
            }
        }
        REQUIRE(obs.size() > 10);
        const ScoreResult res = base_geo_bias(obs, center, cfg);
        CHECK(res.bits <= 2.0);
    }

    SUBCASE("a packed sub-disc is strongly clustered against the background") {
        const LocationDeg center{0.0, 0.0};
        cfg.radius_km = 1000.0;
        const auto obs = disc_points(center, 50.0, 40, 7);
        const ScoreResult res = base_geo_bias(obs, center, cfg);
        CHECK_FALSE(res.skipped);
        CHECK(res.bits >= 5.0);
    }

    SUBCASE("single observation with zero background is skipped") {
        GeoBiasConfig sparse = cfg;
        sparse.background_spacing_km = cfg.radius_km * 2.5;
        const LocationDeg center{10.0, 20.0};
        const ScoreResult res = base_geo_bias({center}, center, sparse);
        CHECK(res.skipped);
        CHECK(res.bits == 0.0);
    }

    SUBCASE("spread observations are scored, not skipped") {
        const LocationDeg center{0.0, 0.0};
        const auto obs = disc_points(center, cfg.radius_km * 0.9, 60, 8);
        const ScoreResult res = base_geo_bias(obs, center, cfg);
        CHECK_FALSE(res.skipped);
        CHECK(res.bits >= 0.0);
    }
}

TEST_CASE("relative_geo_bias") {
    SUBCASE("null calibration: random labels have small expected rel") {
        double total = 0.0;
        int count = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto pts =
                disc_points({20, 40}, 800.0, 30, 6000 + static_cast<std::uint64_t>(trial));
            std::mt19937_64 eng(7000 + static_cast<std::uint64_t>(trial));
            std::vector<PerfLabeledPoint> labeled;
            for (const auto& p : pts) {
                labeled.push_back({p, uniform01(eng) < 0.5 ? 1 : -1});
            }
            labeled[0].value = 1;
            labeled[1].value = -1;
            GeoBiasConfig cfg = quick_config(8000 + static_cast<std::uint64_t>(trial));
            const ScoreResult res = relative_geo_bias(labeled, cfg);
            if (!res.skipped) {
                total += res.bits;
                ++count;
            }
        }
        REQUIRE(count > 90);
        CHECK(std::abs(total / count) <= 1.0);
    }

    SUBCASE("a west/east split is a strong pattern") {
        const auto pts = disc_points({0, 0}, 800.0, 60, 11);
        std::vector<PerfLabeledPoint> labeled;
        for (const auto& p : pts) labeled.push_back({p, p.lon < 0.0 ? -1 : 1});
        GeoBiasConfig cfg = quick_config(12);
        cfg.n_permutations = 199;
        const ScoreResult res = relative_geo_bias(labeled, cfg);
        CHECK_FALSE(res.skipped);
        CHECK(res.bits >= 2.0);
    }

    SUBCASE("degenerate neighborhoods are skipped") {
        GeoBiasConfig cfg = quick_config(1);
        const std::vector<PerfLabeledPoint> tiny = {{{0, 0}, 1}, {{1, 0}, -1}};
        CHECK(relative_geo_bias(tiny, cfg).skipped);
        std::vector<PerfLabeledPoint> same;
        for (const auto& p : disc_points({0, 0}, 500, 10, 3)) same.push_back({p, 1});
        CHECK(relative_geo_bias(same, cfg).skipped);
    }
}

TEST_CASE("binarize_performance rules") {
    SUBCASE("hit1_miss") {
        std::vector<PredictionRow> rows;
        for (int i = 0; i < 6; ++i) {
            PredictionRow r;
            r.id = std::to_string(i);
            r.loc = {static_cast<double>(i), 0.0};
            r.hit1 = 1;
            r.rank = 1;
            rows.push_back(r);
        }
        const auto all_high = binarize_performance(rows, LowPerfRule{});
        for (const auto& p : all_high) CHECK(p.value == 1);
        rows[2].hit1 = 0;
        rows[2].rank = 4;
        const auto one_low = binarize_performance(rows, LowPerfRule{});
        CHECK(one_low[2].value == -1);
        CHECK(one_low[0].value == 1);
    }

    SUBCASE("percentile rule flags exactly the upper half on distinct errors") {
        std::vector<PredictionRow> rows;
        for (int i = 0; i < 10; ++i) {
            PredictionRow r;
            r.id = std::to_string(i);
            r.loc = {static_cast<double>(i), 0.0};
            r.abs_err = static_cast<double>(i);
            rows.push_back(r);
        }
        LowPerfRule rule;
        rule.kind = LowPerfRule::Kind::AbsErrOverPercentile;
        rule.param = 50.0;
        const auto labeled = binarize_performance(rows, rule);
        int low = 0;
        for (const auto& p : labeled) low += p.value == -1 ? 1 : 0;
        CHECK(low == 5);
        CHECK(labeled[9].value == -1);
        CHECK(labeled[0].value == 1);
    }

    SUBCASE("sigma rule on Gaussian errors (half-normal oracle)") {
        // abs_err = |N(0,1)| is half-normal with mean 0.7979, std 0.6028;
        // P(|e| > mean + 3 std) = erfc(2.6063/sqrt 2) ~ 0.92%. The flagged
        // fraction must sit in a +-3 SE band around that.
        std::mt19937_64 eng(3001);
        std::vector<PredictionRow> rows;
        for (int i = 0; i < 10000; ++i) {
            PredictionRow r;
            r.id = std::to_string(i);
            r.loc = {0.0, 0.0};
            r.abs_err = std::abs(standard_normal(eng));
            rows.push_back(r);
        }
        LowPerfRule rule;
        rule.kind = LowPerfRule::Kind::AbsErrOverSigma;
        rule.param = 3.0;
        const auto labeled = binarize_performance(rows, rule);
        int low = 0;
        for (const auto& p : labeled) low += p.value == -1 ? 1 : 0;
        const double frac = low / 10000.0;
        CHECK(frac > 0.005);
        CHECK(frac < 0.015);
    }

    SUBCASE("join validation lists missing ids") {
        std::vector<DatasetRecord> records = {{"a", {0, 0}, Split::Test, 0, 0.0},
                                              {"b", {1, 0}, Split::Test, 1, 0.0}};
        std::vector<PredictionRow> rows(1);
        rows[0].id = "a";
        rows[0].loc = {0, 0};
        rows[0].hit1 = 1;
        rows[0].rank = 1;
        try {
            binarize_performance(records, rows, LowPerfRule{});
            FAIL("expected JoinError");
        } catch (const JoinError& e) {
            CHECK(std::string(e.what()).find("b") != std::string::npos);
        }
        rows.push_back(rows[0]);
        rows[1].id = "b";
        const auto ok = binarize_performance(records, rows, LowPerfRule{});
        CHECK(ok.size() == 2);
    }

    SUBCASE("rule/row type mismatch") {
        std::vector<PredictionRow> reg_rows(1);
        reg_rows[0].id = "x";
        reg_rows[0].abs_err = 0.5;
        CHECK_THROWS_AS(binarize_performance(reg_rows, LowPerfRule{}), DomainError);
    }
}

TEST_CASE("geo_bias_report") {
    SUBCASE("all high performance raises NoLowPerfError") {
        std::vector<PerfLabeledPoint> pts;
        for (const auto& p : testutil::random_locations(20, 3)) pts.push_back({p, 1});
        CHECK_THROWS_AS(geo_bias_report(pts, quick_config(1)), NoLowPerfError);
    }

    SUBCASE("max_centers subsamples deterministically") {
        std::vector<PerfLabeledPoint> pts;
        std::mt19937_64 eng(5);
        for (const auto& p : testutil::random_locations(200, 9)) {
            pts.push_back({p, uniform01(eng) < 0.3 ? -1 : 1});
        }
        GeoBiasConfig cfg = quick_config(77);
        cfg.max_centers = 1;
        const GeoBiasReport one = geo_bias_report(pts, cfg);
        CHECK(one.centers.size() == 1);
        cfg.max_centers = 10;
        const GeoBiasReport ten_a = geo_bias_report(pts, cfg);
        const GeoBiasReport ten_b = geo_bias_report(pts, cfg);
        REQUIRE(ten_a.centers.size() == 10);
        CHECK(ten_a.base_mean == ten_b.base_mean); // bitwise determinism
        CHECK(ten_a.rel_mean == ten_b.rel_mean);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(ten_a.centers[i].center_index == ten_b.centers[i].center_index);
            CHECK(ten_a.centers[i].base == ten_b.centers[i].base);
            CHECK(ten_a.centers[i].rel == ten_b.centers[i].rel);
        }
    }

    SUBCASE("parallel scheduling cannot change the output") {
        std::vector<PerfLabeledPoint> pts;
        std::mt19937_64 eng(15);
        for (const auto& p : testutil::random_locations(300, 16)) {
            pts.push_back({p, uniform01(eng) < 0.2 ? -1 : 1});
        }
        GeoBiasConfig cfg = quick_config(88);
        cfg.max_centers = 12;
        setenv("LOCENC_THREADS", "1", 1);
        const GeoBiasReport serial = geo_bias_report(pts, cfg);
        setenv("LOCENC_THREADS", "4", 1);
        const GeoBiasReport parallel = geo_bias_report(pts, cfg);
        unsetenv("LOCENC_THREADS");
        CHECK(serial.base_mean == parallel.base_mean); // bitwise
        CHECK(serial.rel_mean == parallel.rel_mean);
        REQUIRE(serial.centers.size() == parallel.centers.size());
        for (std::size_t i = 0; i < serial.centers.size(); ++i) {
            CHECK(serial.centers[i].base == parallel.centers[i].base);
            CHECK(serial.centers[i].rel == parallel.centers[i].rel);
        }
    }

    SUBCASE("means are NaN when every center is skipped") {
        // Two isolated points: neighborhoods of size < 3 skip everything.
        std::vector<PerfLabeledPoint> pts = {{{0, 0}, -1}, {{120, 40}, 1}};
        GeoBiasConfig cfg = quick_config(3);
        cfg.radius_km = 10.0;
        const GeoBiasReport report = geo_bias_report(pts, cfg);
        CHECK(report.n_centers == 0);
        CHECK(report.n_skipped == 1);
        CHECK(std::isnan(report.base_mean));
        CHECK(std::isnan(report.rel_mean));
    }

    SUBCASE("planted clusters beat random labelings over 20 seeded trials") {
        // Statistical monotonicity: the trial-mean rel score of planted
        // labelings strictly exceeds that of uniform-random ones.
        double planted_total = 0.0;
        double random_total = 0.0;
        for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const auto pts = testutil::random_locations(300, 500 + trial);
            std::mt19937_64 eng(600 + trial);
            const LocationDeg center = pts[uniform_index(eng, pts.size())];
            std::vector<std::pair<double, std::size_t>> by_dist;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                by_dist.emplace_back(haversine_km(pts[i], center), i);
            }
            std::sort(by_dist.begin(), by_dist.end());
            std::vector<PerfLabeledPoint> planted;
            std::vector<bool> low(pts.size(), false);
            for (int i = 0; i < 30; ++i) low[by_dist[static_cast<std::size_t>(i)].second] = true;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                planted.push_back({pts[i], low[i] ? -1 : 1});
            }
            std::vector<PerfLabeledPoint> random_labeled;
            const auto chosen = sample_without_replacement(pts.size(), 30, eng);
            std::vector<bool> rlow(pts.size(), false);
            for (std::size_t i : chosen) rlow[i] = true;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                random_labeled.push_back({pts[i], rlow[i] ? -1 : 1});
            }
            GeoBiasConfig cfg = quick_config(700 + trial);
            cfg.radius_km = 4000.0;
            cfg.n_permutations = 49;
            cfg.max_centers = 8;
            planted_total += geo_bias_report(planted, cfg).rel_mean;
            random_total += geo_bias_report(random_labeled, cfg).rel_mean;
        }
        CHECK(planted_total / 20.0 > random_total / 20.0);
    }

    SUBCASE("clustered lows score higher than random lows") {
        // Seedable small version of the ordering experiment.
        const auto pts = testutil::random_locations(600, 99);
        const int n_low = 60;

        std::vector<PerfLabeledPoint> clustered;
        std::vector<std::pair<double, int>> by_dist;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            by_dist.emplace_back(haversine_km(pts[i], pts[0]), static_cast<int>(i));
        }
        std::sort(by_dist.begin(), by_dist.end());
        std::vector<bool> low_flag(pts.size(), false);
        for (int i = 0; i < n_low; ++i) low_flag[static_cast<std::size_t>(by_dist[i].second)] = true;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            clustered.push_back({pts[i], low_flag[i] ? -1 : 1});
        }

        std::vector<PerfLabeledPoint> random_labeled;
        std::mt19937_64 eng(7);
        std::vector<std::size_t> idx(pts.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        shuffle_in_place(idx, eng);
        std::vector<bool> rand_flag(pts.size(), false);
        for (int i = 0; i < n_low; ++i) rand_flag[idx[static_cast<std::size_t>(i)]] = true;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            random_labeled.push_back({pts[i], rand_flag[i] ? -1 : 1});
        }

        GeoBiasConfig cfg = quick_config(123);
        cfg.radius_km = 3000.0;
        cfg.max_centers = 30;
        const GeoBiasReport rep_clustered = geo_bias_report(clustered, cfg);
        const GeoBiasReport rep_random = geo_bias_report(random_labeled, cfg);
        CHECK(rep_clustered.rel_mean > rep_random.rel_mean);
    }
}
