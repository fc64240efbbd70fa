#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "plnoise/rng.hpp"
#include "plnoise/synthesis.hpp"

using namespace plnoise;

namespace {

NoiseModel field_model(std::uint64_t seed, double kappa = 0.01) {
    return NoiseModel::with_uniform_anchor({1.8e-3, 3.47, 2.87, 0.0}, 8, 68.0, seed, kappa);
}

} // namespace

TEST_CASE("degenerate step distribution with kappa 0 holds the anchor") {
    auto m = NoiseModel::with_uniform_anchor({0.0, 0.0, 3.0, 0.0}, 4, 50.0, 1, 0.0);
    const auto s = synthesize(m, 1000, 2);
    for (double x : s) REQUIRE(x == Catch::Approx(50.05)); // anchor bin center
}

TEST_CASE("synthesis is deterministic per (seed, freq)") {
    const auto m = field_model(77);
    const auto a = synthesize(m, 10000, 3);
    const auto b = synthesize(m, 10000, 3);
    REQUIRE(a == b);
    const auto c = synthesize(m, 10000, 4);
    CHECK(a != c);
}

TEST_CASE("series never exits the band") {
    const auto m = field_model(5);
    const auto s = synthesize(m, 500000, 0);
    for (double x : s) {
        REQUIRE(x >= m.band_low[0] - 1e-9);
        REQUIRE(x <= m.band_high[0] + 1e-9);
    }
}

TEST_CASE("kappa 0 without clamping gives back the quantized steps") {
    // wide band so the clamp never engages
    NoiseModel m;
    m.step_dist = {0.0, 0.5, 5.0, 0.0};
    m.kappa = 0.0;
    m.seed = 9;
    m.quantization = QuantizationPolicy(0.1, -2000.0, 2000.0);
    m.anchor = {0.0};
    m.band_low = {-1999.0};
    m.band_high = {1999.0};
    const auto s = synthesize(m, 20000, 0);
    const auto d = difference(s);
    // regenerate the same steps: each realized d(t) is the raw step snapped
    // onto the bin grid, so it sits within half a bin of it and on a multiple
    // of the bin width
    Rng rng = Rng::derive(m.seed, 0);
    for (std::size_t t = 0; t < d.size(); ++t) {
        const double step = sample_t_location_scale(m.step_dist, rng);
        REQUIRE(std::abs(d[t] - step) <= 0.05 + 1e-6);
        REQUIRE(d[t] == Catch::Approx(0.1 * std::llround(d[t] / 0.1)).margin(1e-9));
    }
}

TEST_CASE("t sampler: near-gaussian limit at huge nu") {
    Rng rng(11);
    const TLocationScale p{0.0, 2.0, 1e6, 0.0};
    const int n = 200000;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_t_location_scale(p, rng);
        s2 += x * x;
    }
    CHECK(s2 / n == Catch::Approx(4.0).epsilon(0.01));
}

TEST_CASE("t sampler: sigma 0 always returns mu") {
    Rng rng(12);
    const TLocationScale p{1.5, 0.0, 3.0, 0.0};
    for (int i = 0; i < 100; ++i) REQUIRE(sample_t_location_scale(p, rng) == 1.5);
}

TEST_CASE("t sampler quantiles match the analytic CDF") {
    Rng rng(13);
    const TLocationScale p{0.0, 3.47, 2.87, 0.0};
    const int n = 2000000;
    std::vector<double> draws(n);
    for (auto& x : draws) x = sample_t_location_scale(p, rng);
    std::sort(draws.begin(), draws.end());
    for (double q : {0.1, 0.5, 0.9}) {
        const double emp = draws[static_cast<std::size_t>(q * n)];
        // invert the CDF by bisection
        double lo = -100.0, hi = 100.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (p.cdf(mid) < q ? lo : hi) = mid;
        }
        REQUIRE(emp == Catch::Approx(0.5 * (lo + hi)).margin(0.02));
    }
}

TEST_CASE("reflective clamp keeps the step distribution symmetric") {
    NoiseModel m = NoiseModel::with_uniform_anchor({0.0, 3.47, 2.87, 0.0}, 1, 50.0, 21, 0.0);
    const auto s = synthesize(m, 2000000, 0);
    const auto d = difference(s);
    // empirical mass per 1-dB bin should be symmetric within 2%
    std::map<int, double> mass;
    for (double x : d) mass[static_cast<int>(std::llround(x))] += 1.0;
    for (auto& [k, v] : mass) v /= static_cast<double>(d.size());
    for (const auto& [k, v] : mass) {
        if (k <= 0) continue;
        const auto it = mass.find(-k);
        const double other = it == mass.end() ? 0.0 : it->second;
        REQUIRE(std::abs(v - other) <= 0.02);
    }
}

TEST_CASE("synthesis roundtrip recovers the step distribution") {
    const auto m = field_model(101);
    const auto s = synthesize(m, 1000000, 0);
    const auto d = difference(s);
    const auto fit = fit_t_location_scale(d);
    CHECK(fit.sigma == Catch::Approx(3.47).epsilon(0.05));
    CHECK(fit.nu == Catch::Approx(2.87).epsilon(0.10));
    CHECK(std::abs(fit.mu) < 0.05);
}

TEST_CASE("validate_roundtrip passes on a synthesized trace") {
    const auto m = field_model(300);
    const auto s = synthesize(m, 300000, 1);
    const auto rep = validate_roundtrip(s, m, 1);
    for (const auto& c : rep.checks) {
        INFO(c.name << ": " << c.detail);
        REQUIRE((c.pass || c.degenerate));
    }
    CHECK(rep.all_pass());
    // kappa > 0 induces correlation in the levels
    for (const auto& c : rep.checks)
        if (c.name == "ljung_box_levels") CHECK(c.pass);
}

TEST_CASE("validate_roundtrip flags a constant series degenerate") {
    const auto m = field_model(301);
    const std::vector<double> s(5000, 68.05);
    const auto rep = validate_roundtrip(s, m, 0);
    for (const auto& c : rep.checks) REQUIRE(c.degenerate);
}

TEST_CASE("model validation rejects bad shapes") {
    auto m = field_model(1);
    m.kappa = 1.0;
    CHECK_THROWS(m.validate());
    m = field_model(1);
    m.band_low[0] = m.band_high[0];
    CHECK_THROWS(m.validate());
    m = field_model(1);
    m.anchor[0] = m.band_high[0] + 1.0;
    CHECK_THROWS(m.validate());
}
