#include <catch2/catch_amalgamated.hpp>

#include "plnoise/dependence.hpp"
#include "plnoise/rng.hpp"

using namespace plnoise;

namespace {

// direct double-loop oracle for rho(k)
double acf_oracle(const std::vector<double>& x, int k) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        den += (x[i] - mean) * (x[i] - mean);
        if (i + static_cast<std::size_t>(k) < x.size())
            num += (x[i] - mean) * (x[i + static_cast<std::size_t>(k)] - mean);
    }
    return num / den;
}

} // namespace

TEST_CASE("acf of 1..5 at lag 1 is 0.4") {
    const std::vector<double> s{1, 2, 3, 4, 5};
    const auto r = acf(s, 2);
    CHECK(r.values[0] == Catch::Approx(0.4).margin(1e-15));
    CHECK(r.values[0] == Catch::Approx(acf_oracle(s, 1)).margin(1e-15));
}

TEST_CASE("acf matches the double-loop oracle on random data") {
    Rng rng(21);
    std::vector<double> s(500);
    for (auto& x : s) x = rng.normal() + 0.3;
    const auto r = acf(s, 20);
    for (int k = 1; k <= 20; ++k)
        REQUIRE(r.values[static_cast<std::size_t>(k - 1)] ==
                Catch::Approx(acf_oracle(s, k)).margin(1e-12));
}

TEST_CASE("fft path agrees with direct summation") {
    Rng rng(22);
    std::vector<double> s(4000);
    double x = 0.0;
    for (auto& v : s) {
        x = 0.6 * x + rng.normal();
        v = x;
    }
    const auto direct = acf(s, 64);
    const auto fft = acf(s, 200); // > 64 forces the spectral route
    for (int k = 1; k <= 64; ++k)
        REQUIRE(fft.values[static_cast<std::size_t>(k - 1)] ==
                Catch::Approx(direct.values[static_cast<std::size_t>(k - 1)]).margin(1e-9));
}

TEST_CASE("iid noise stays within the Bartlett band") {
    Rng rng(23);
    std::vector<double> s(100000);
    for (auto& x : s) x = rng.normal();
    const auto r = acf(s, 10);
    const double bound = 3.0 / std::sqrt(static_cast<double>(s.size()));
    int inside = 0;
    for (double v : r.values) inside += std::abs(v) < bound;
    CHECK(inside >= 9);
}

TEST_CASE("AR(1) autocorrelation decays as phi^k") {
    Rng rng(24);
    const double phi = 0.7;
    std::vector<double> s(100000);
    double x = 0.0;
    for (auto& v : s) {
        x = phi * x + rng.normal();
        v = x;
    }
    const auto r = acf(s, 5);
    for (int k = 1; k <= 5; ++k)
        CHECK(r.values[static_cast<std::size_t>(k - 1)] ==
              Catch::Approx(std::pow(phi, k)).margin(0.02));
}

TEST_CASE("acf invariance under affine transforms") {
    Rng rng(25);
    std::vector<double> s(2000);
    double x = 0.0;
    for (auto& v : s) {
        x = 0.5 * x + rng.normal();
        v = x;
    }
    std::vector<double> pos(s), neg(s);
    for (auto& v : pos) v = 3.0 * v + 11.0;
    for (auto& v : neg) v = -2.0 * v + 4.0;
    const auto base = acf(s, 8), p = acf(pos, 8), n = acf(neg, 8);
    for (int k = 0; k < 8; ++k) {
        REQUIRE(p.values[static_cast<std::size_t>(k)] ==
                Catch::Approx(base.values[static_cast<std::size_t>(k)]).margin(1e-12));
        REQUIRE(n.values[static_cast<std::size_t>(k)] ==
                Catch::Approx(base.values[static_cast<std::size_t>(k)]).margin(1e-12));
    }
}

TEST_CASE("acf error paths") {
    std::vector<double> konst(50, 2.0);
    CHECK_THROWS(acf(konst, 5));
    std::vector<double> tiny{1.0, 2.0};
    CHECK_THROWS(acf(tiny, 2));
}

TEST_CASE("bartlett bound values") {
    CHECK(bartlett_bound(639000, 0.05) == Catch::Approx(0.0024518).margin(1e-5));
    CHECK(bartlett_bound(10000, 0.05) == Catch::Approx(0.0196).margin(1e-4));
    CHECK_THROWS(bartlett_bound(1, 0.05));
}

TEST_CASE("ljung-box is zero on an orthogonal construction") {
    // period-4 cycle {1, 0, -1, 0}: every consecutive product is exactly 0,
    // so rho(1) = 0 and Q(L=1) = 0
    std::vector<double> s;
    const double pat[4] = {1.0, 0.0, -1.0, 0.0};
    for (int i = 0; i < 400; ++i) s.push_back(pat[i % 4]);
    const auto out = ljung_box(s, 1);
    CHECK(out.statistic == Catch::Approx(0.0).margin(1e-12));
    CHECK(out.decision == Decision::fail_to_reject);
}

TEST_CASE("ljung-box calibration and power") {
    Rng rng(26);
    const int reps = 500;
    int iid_rejects = 0, ar_rejects = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> s(2000);
        for (auto& x : s) x = rng.normal();
        iid_rejects += ljung_box(s, 10).decision == Decision::reject;
        double x = 0.0;
        for (auto& v : s) {
            x = 0.5 * x + rng.normal();
            v = x;
        }
        ar_rejects += ljung_box(s, 10).decision == Decision::reject;
    }
    CHECK(static_cast<double>(iid_rejects) / reps == Catch::Approx(0.05).margin(0.03));
    CHECK(ar_rejects == reps);
}

TEST_CASE("ljung-box Q is non-decreasing in L") {
    Rng rng(27);
    std::vector<double> s(3000);
    double x = 0.0;
    for (auto& v : s) {
        x = 0.3 * x + rng.normal();
        v = x;
    }
    double prev = 0.0;
    for (int L = 1; L <= 20; ++L) {
        const double q = ljung_box(s, L).statistic;
        REQUIRE(q >= prev - 1e-12);
        prev = q;
    }
}

TEST_CASE("ljung-box uses the chi-square critical value") {
    Rng rng(28);
    std::vector<double> s(500);
    for (auto& x : s) x = rng.normal();
    const auto out = ljung_box(s, 10);
    CHECK(out.critical_value == Catch::Approx(18.307).margin(1e-3));
    CHECK(out.test_id == TestId::ljung_box);
}
