#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pcl/bridge.hpp"
#include "pcl/errors.hpp"
#include "test_util.hpp"

using namespace pcl;

TEST_CASE("sample_bridge: sigma=0 is exact linear interpolation") {
    Rng rng = Rng::seeded(42);
    const BridgeSpec spec{4, 0.0, 0.0, 1.0};
    const std::vector<double> x0 = {0.1, -2.7, 3.3};
    const std::vector<double> x1 = {0.9, 1.1, -0.4};
    const Matrix path = sample_bridge(x0, x1, 0.0, spec, rng);
    for (int j = 0; j <= 4; ++j) {
        const double alpha = j / 4.0;
        for (int c = 0; c < 3; ++c) {
            // Mixup form used by the sampler: bit-exact.
            CHECK(path(j, c) == (j == 0 ? x0[c] : j == 4 ? x1[c] : x0[c] - alpha * (x0[c] - x1[c])));
            // Convex combination: same value up to one rounding.
            CHECK(path(j, c) ==
                  doctest::Approx((1.0 - alpha) * x0[c] + alpha * x1[c]).epsilon(1e-15));
        }
    }
}

TEST_CASE("sample_bridge: sigma=0 equals convex combination bit-exactly on dyadic data") {
    Rng rng = Rng::seeded(9);
    const BridgeSpec spec{4, 0.0, 0.0, 1.0};
    const std::vector<double> x0 = {1.0, -2.0};
    const std::vector<double> x1 = {3.0, 6.0};
    const Matrix path = sample_bridge(x0, x1, 0.0, spec, rng);
    for (int j = 0; j <= 4; ++j) {
        const double alpha = j / 4.0;
        for (int c = 0; c < 2; ++c)
            CHECK(path(j, c) == (1.0 - alpha) * x0[c] + alpha * x1[c]);
    }
}

TEST_CASE("sample_bridge: endpoints pinned exactly for any sigma") {
    Rng rng = Rng::seeded(123);
    for (double sigma : {0.0, 0.03, 0.5, 1.0, 4.0}) {
        const BridgeSpec spec{7, sigma, sigma, 2.0};
        std::vector<double> x0(5), x1(5);
        for (auto& v : x0) v = rng.normal();
        for (auto& v : x1) v = rng.normal();
        const Matrix path = sample_bridge(x0, x1, sigma, spec, rng);
        for (int c = 0; c < 5; ++c) {
            CHECK(path(0, c) == x0[c]);
            CHECK(path(7, c) == x1[c]);
        }
    }
}

TEST_CASE("sample_bridge: k=0 rejected") {
    Rng rng = Rng::seeded(1);
    const BridgeSpec spec{0, 1.0, 1.0, 1.0};
    const std::vector<double> p = {0.0};
    CHECK_THROWS_AS(sample_bridge(p, p, 1.0, spec, rng), param_error);
}

// Var[BB_t] = sigma^2 t(T-t)/T per coordinate for a pinned x0 = x1 bridge.
TEST_CASE("sample_bridge: empirical marginal variance matches t(1-t)") {
    const int n = 100000;
    const BridgeSpec spec{4, 1.0, 1.0, 1.0};
    const std::vector<double> zero = {0.0};
    std::vector<std::vector<double>> values(5, std::vector<double>{});
    Rng base = Rng::seeded(2024);
    for (int i = 0; i < n; ++i) {
        Rng rng = base.fork(i);
        const Matrix path = sample_bridge(zero, zero, 1.0, spec, rng);
        for (int j = 1; j < 4; ++j) values[j].push_back(path(j, 0));
    }
    for (int j = 1; j < 4; ++j) {
        const double t = j / 4.0;
        const double expected = t * (1.0 - t);
        const double observed = testutil::sample_variance(values[j]);
        const double se = expected * std::sqrt(2.0 / (n - 1));
        CHECK(std::abs(observed - expected) < 3.0 * se);
    }
}

TEST_CASE("sample_bridge: midpoint marginal passes KS against N(0, T/4)") {
    const int n = 100000;
    const BridgeSpec spec{4, 1.0, 1.0, 1.0};
    const std::vector<double> zero = {0.0};
    std::vector<double> midpoints;
    midpoints.reserve(n);
    Rng base = Rng::seeded(77);
    for (int i = 0; i < n; ++i) {
        Rng rng = base.fork(i);
        midpoints.push_back(sample_bridge(zero, zero, 1.0, spec, rng)(2, 0));
    }
    const double sd = 0.5;  // sqrt(T/4)
    const double d = testutil::ks_statistic(
        midpoints, [&](double x) { return testutil::normal_cdf(x / sd); });
    CHECK(d < testutil::ks_critical_001(n));
}

// Bridge increments are Markov: the deviation of BB_{t+dt} from its
// conditional mean (T-t-dt)/(T-t) * BB_t is uncorrelated with earlier points.
TEST_CASE("sample_bridge: conditional increments uncorrelated with the past") {
    const int n = 100000;
    const BridgeSpec spec{4, 1.0, 1.0, 1.0};
    const std::vector<double> zero = {0.0};
    std::vector<double> past, residual;
    Rng base = Rng::seeded(31);
    for (int i = 0; i < n; ++i) {
        Rng rng = base.fork(i);
        const Matrix path = sample_bridge(zero, zero, 1.0, spec, rng);
        const double bb_s = path(1, 0);   // s = 0.25
        const double bb_t = path(2, 0);   // t = 0.50
        const double bb_t1 = path(3, 0);  // t + dt = 0.75
        const double shrink = (1.0 - 0.75) / (1.0 - 0.5);
        past.push_back(bb_s);
        residual.push_back(bb_t1 - shrink * bb_t);
    }
    const double mp = testutil::mean(past);
    const double mr = testutil::mean(residual);
    double cov = 0.0;
    for (int i = 0; i < n; ++i) cov += (past[i] - mp) * (residual[i] - mr);
    cov /= n - 1;
    const double corr = cov / std::sqrt(testutil::sample_variance(past) *
                                        testutil::sample_variance(residual));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("pairing_permutation: two rows pair mutually under euclidean sorting") {
    const Matrix x = matrix_from({{0.0, 0.0}, {1.0, 1.0}});
    Rng rng = Rng::seeded(3);
    const auto perm = pairing_permutation(x, PairingStrategy::EuclideanSorted, rng);
    REQUIRE(perm.size() == 2);
    CHECK(perm[0] == 1);
    CHECK(perm[1] == 0);
}

TEST_CASE("pairing_permutation: always a permutation; identity is identity") {
    Rng rng = Rng::seeded(17);
    Matrix x(9, 3);
    for (double& v : x.data) v = rng.normal();
    for (auto strategy : {PairingStrategy::RandomShuffle, PairingStrategy::EuclideanSorted,
                          PairingStrategy::Identity}) {
        const auto perm = pairing_permutation(x, strategy, rng);
        std::vector<bool> hit(9, false);
        for (int p : perm) {
            CHECK(p >= 0);
            CHECK(p < 9);
            hit[p] = true;
        }
        CHECK(std::count(hit.begin(), hit.end(), true) == 9);
    }
    const auto id = pairing_permutation(x, PairingStrategy::Identity, rng);
    for (int i = 0; i < 9; ++i) CHECK(id[i] == i);
}

TEST_CASE("sample_paired_bridges: sigma 0 gives straight joint lines") {
    Rng data_rng = Rng::seeded(5);
    Matrix x(6, 4), y(6, 3);
    for (double& v : x.data) v = data_rng.normal();
    for (double& v : y.data) v = data_rng.uniform();
    const BridgeSpec spec{5, 0.0, 0.0, 1.0};
    const auto paths = sample_paired_bridges(x, y, spec, PairingStrategy::RandomShuffle,
                                             VarianceStrategy::Constant, nullptr,
                                             Rng::seeded(99));
    CHECK(paths.size() == 6);
    for (const auto& path : paths) {
        for (int j = 0; j <= 5; ++j) {
            const double alpha = path.times[j];
            for (int c = 0; c < 4; ++c)
                CHECK(path.xs(j, c) ==
                      doctest::Approx(path.xs(0, c) - alpha * (path.xs(0, c) - path.xs(5, c)))
                          .epsilon(1e-14));
            for (int c = 0; c < 3; ++c)
                CHECK(path.ys(j, c) ==
                      doctest::Approx(path.ys(0, c) - alpha * (path.ys(0, c) - path.ys(5, c)))
                          .epsilon(1e-14));
        }
    }
}

TEST_CASE("sample_paired_bridges: seeded replay is bit-identical") {
    Rng data_rng = Rng::seeded(8);
    Matrix x(5, 3), y(5, 2);
    for (double& v : x.data) v = data_rng.normal();
    for (double& v : y.data) v = data_rng.uniform();
    const BridgeSpec spec{4, 0.3, 0.1, 1.0};
    const auto a = sample_paired_bridges(x, y, spec, PairingStrategy::RandomShuffle,
                                         VarianceStrategy::Constant, nullptr, Rng::seeded(1234));
    const auto b = sample_paired_bridges(x, y, spec, PairingStrategy::RandomShuffle,
                                         VarianceStrategy::Constant, nullptr, Rng::seeded(1234));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].xs.data == b[i].xs.data);
        CHECK(a[i].ys.data == b[i].ys.data);
    }
}

TEST_CASE("sample_paired_bridges: tempering requires gradient norms") {
    Matrix x(3, 2), y(3, 2);
    const BridgeSpec spec{4, 0.1, 0.1, 1.0};
    CHECK_THROWS_AS(sample_paired_bridges(x, y, spec, PairingStrategy::RandomShuffle,
                                          VarianceStrategy::Tempering, nullptr, Rng::seeded(0)),
                    param_error);
}

TEST_CASE("sample_paired_bridges: uniform gradient norms reduce tempering to constant") {
    Rng data_rng = Rng::seeded(21);
    Matrix x(4, 3), y(4, 2);
    for (double& v : x.data) v = data_rng.normal();
    for (double& v : y.data) v = data_rng.uniform();
    const BridgeSpec spec{4, 0.2, 0.05, 1.0};
    const std::vector<double> norms(4, 4.0);  // equal norms -> factor exactly 1
    const auto tempered =
        sample_paired_bridges(x, y, spec, PairingStrategy::Identity,
                              VarianceStrategy::Tempering, &norms, Rng::seeded(55));
    const auto constant =
        sample_paired_bridges(x, y, spec, PairingStrategy::Identity,
                              VarianceStrategy::Constant, nullptr, Rng::seeded(55));
    for (std::size_t i = 0; i < tempered.size(); ++i) {
        CHECK(tempered[i].xs.data == constant[i].xs.data);
        CHECK(tempered[i].ys.data == constant[i].ys.data);
    }
}
