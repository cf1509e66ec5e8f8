#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cola/localized.hpp"
#include "cola/rng.hpp"

using namespace cola;

TEST_CASE("kernel weights") {
    KernelSpec kernel{KernelSpec::Kind::Laplace, 2.0};

    std::vector<FeatureVector> same(7, FeatureVector{1.0, -2.0});
    WeightVector w = kernel_weights(same, {1.0, -2.0}, kernel);
    for (double v : w.w) CHECK(v == Catch::Approx(1.0 / 7));
    CHECK(w.raw_sum == Catch::Approx(7.0));

    // distances (0, h ln 4) give similarities (1, 1/4) -> weights (0.8, 0.2)
    double h = 1.7;
    std::vector<FeatureVector> two = {{0.0}, {h * std::log(4.0)}};
    WeightVector w2 = kernel_weights(two, {0.0}, KernelSpec{KernelSpec::Kind::Laplace, h});
    CHECK(w2.w[0] == Catch::Approx(0.8));
    CHECK(w2.w[1] == Catch::Approx(0.2));

    // scaling coordinates and bandwidth together leaves weights unchanged
    Rng rng(61);
    std::vector<FeatureVector> xs;
    for (int i = 0; i < 20; ++i) xs.push_back({rng.normal(), rng.normal()});
    FeatureVector probe = {0.3, -0.4};
    WeightVector base = kernel_weights(xs, probe, kernel);
    std::vector<FeatureVector> scaled = xs;
    for (auto& x : scaled) {
        for (double& v : x) v *= 3.5;
    }
    WeightVector after = kernel_weights(scaled, {probe[0] * 3.5, probe[1] * 3.5},
                                        KernelSpec{KernelSpec::Kind::Laplace, 2.0 * 3.5});
    for (std::size_t i = 0; i < base.w.size(); ++i) {
        CHECK(base.w[i] == Catch::Approx(after.w[i]).margin(1e-12));
    }
}

TEST_CASE("weights are normalized, nonnegative and monotone in distance") {
    Rng rng(62);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<FeatureVector> xs;
        int n = 5 + static_cast<int>(rng.uniform_index(40));
        for (int i = 0; i < n; ++i) xs.push_back({rng.normal(), rng.normal()});
        FeatureVector probe = {rng.normal(), rng.normal()};
        KernelSpec kernel{KernelSpec::Kind::Laplace, rng.uniform(0.2, 3.0)};
        WeightVector w = kernel_weights(xs, probe, kernel);
        double sum = 0.0;
        for (double v : w.w) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (euclidean_distance(xs[a], probe) < euclidean_distance(xs[b], probe)) {
                    CHECK(w.w[a] > w.w[b]);
                }
            }
        }
    }
}

TEST_CASE("degenerate similarities raise a numerical error") {
    std::vector<FeatureVector> xs = {{1000.0}, {2000.0}};
    CHECK_THROWS_AS(kernel_weights(xs, {0.0}, KernelSpec{KernelSpec::Kind::Laplace, 1e-3}),
                    NumericError);
}

TEST_CASE("effective sample size") {
    KernelSpec wide{KernelSpec::Kind::Laplace, 1e9};
    std::vector<FeatureVector> xs = {{0.0}, {1.0}, {2.0}, {3.0}};
    CHECK(effective_sample_size(xs, {1.5}, wide) == Catch::Approx(4.0).epsilon(1e-6));

    // one similarity 1, the rest almost 0 -> ESS near 1
    KernelSpec narrow{KernelSpec::Kind::Laplace, 0.02};
    std::vector<FeatureVector> spread = {{0.0}, {10.0}, {20.0}};
    CHECK(effective_sample_size(spread, {0.0}, narrow) == Catch::Approx(1.0).epsilon(1e-6));

    // H = (1, 1, ~0): ESS = 4/2 = 2
    std::vector<FeatureVector> pair = {{0.0}, {0.0}, {1e6}};
    CHECK(effective_sample_size(pair, {0.0}, KernelSpec{KernelSpec::Kind::Laplace, 1.0}) ==
          Catch::Approx(2.0).epsilon(1e-6));

    Rng rng(63);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<FeatureVector> pts;
        int n = 2 + static_cast<int>(rng.uniform_index(30));
        for (int i = 0; i < n; ++i) pts.push_back({rng.normal()});
        double ess = effective_sample_size(pts, {rng.normal()},
                                           KernelSpec{KernelSpec::Kind::Laplace,
                                                      rng.uniform(0.05, 5.0)});
        CHECK(ess >= 1.0 - 1e-9);
        CHECK(ess <= n + 1e-9);
    }
}

TEST_CASE("bandwidth calibration hits the target mean ESS on uniform data") {
    Rng rng(64);
    std::vector<FeatureVector> xs;
    for (int i = 0; i < 2000; ++i) xs.push_back({rng.uniform(-2.0, 2.0)});
    double h = calibrate_bandwidth(xs, 200.0, xs);
    CHECK(h > 0.0);
    KernelSpec kernel{KernelSpec::Kind::Laplace, h};
    double mean_ess = 0.0;
    for (const auto& p : xs) mean_ess += effective_sample_size(xs, p, kernel);
    mean_ess /= static_cast<double>(xs.size());
    CHECK(mean_ess >= 198.0);
    CHECK(mean_ess <= 202.0);
}

TEST_CASE("calibrated bandwidth scales with the data in one dimension") {
    Rng rng(65);
    std::vector<FeatureVector> xs;
    for (int i = 0; i < 400; ++i) xs.push_back({rng.uniform(0.0, 1.0)});
    std::vector<FeatureVector> doubled = xs;
    for (auto& x : doubled) x[0] *= 2.0;
    double h1 = calibrate_bandwidth(xs, 60.0, xs);
    double h2 = calibrate_bandwidth(doubled, 60.0, doubled);
    CHECK(h2 / h1 == Catch::Approx(2.0).epsilon(0.02));
}

TEST_CASE("unreachable ESS target errors out") {
    std::vector<FeatureVector> xs = {{0.0}, {1.0}, {2.0}};
    CHECK_THROWS_AS(calibrate_bandwidth(xs, 0.5, xs), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_bandwidth(xs, 3.0, xs), std::invalid_argument);

    // duplicated points keep the small-bandwidth ESS above 1.5 at two of the
    // three probes, so a target of 1.5 is unreachable inside (1, n)
    std::vector<FeatureVector> dup = {{0.0}, {0.0}, {1.0}};
    CHECK_THROWS_AS(calibrate_bandwidth(dup, 1.5, dup), NumericError);
}
