#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "levycast/grid.hpp"
#include "levycast/mixture.hpp"
#include "levycast/rng.hpp"

using levycast::Complex;
using levycast::EffectiveParams;
using levycast::MixtureParams;
using levycast::RngStream;
using levycast::StableParams;

namespace {
MixtureParams random_mixture(RngStream& rng, std::size_t K) {
    MixtureParams m;
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double w = rng.uniform_open(0.1, 1.0);
        m.weights.push_back(w);
        s += w;
        m.components.push_back({rng.uniform_open(0.3, 1.95), rng.uniform_open(-0.9, 0.9),
                                rng.uniform_open(0.2, 2.0), rng.uniform_open(-1.5, 1.5)});
    }
    for (auto& w : m.weights) w /= s;
    return m;
}
}  // namespace

TEST_CASE("single-component mixture CF equals the component CF") {
    auto grid = levycast::make_grid();
    StableParams p{1.5, 0.5, 1.0, 0.2};
    MixtureParams m{{1.0}, {p}};
    auto phi = levycast::mixture_cf(m, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Complex want = levycast::cf(p, grid.points[i]);
        CHECK((phi[i] - want).abs() < 1e-15);
    }
}

TEST_CASE("identical components collapse to one component") {
    auto grid = levycast::make_grid(33, 10.0);
    StableParams p{1.2, -0.3, 0.8, 0.0};
    MixtureParams two{{0.5, 0.5}, {p, p}};
    MixtureParams one{{1.0}, {p}};
    auto a = levycast::mixture_cf(two, grid);
    auto b = levycast::mixture_cf(one, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK((a[i] - b[i]).abs() < 1e-15);
}

TEST_CASE("Gaussian plus Cauchy hand value") {
    auto grid = levycast::make_grid(3, 1.0);  // points -1, 0, 1
    MixtureParams m{{0.5, 0.5},
                    {StableParams{2.0, 0.0, 1.0, 0.0}, StableParams{1.0, 0.0, 1.0, 0.0}}};
    auto phi = levycast::mixture_cf(m, grid);
    CHECK(phi[2].re == Catch::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(phi[2].im == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("mixture CF modulus stays within one") {
    RngStream rng(21, 0);
    auto grid = levycast::make_grid();
    for (int rep = 0; rep < 50; ++rep) {
        auto m = random_mixture(rng, 3);
        REQUIRE(m.valid());
        for (auto& c : levycast::mixture_cf(m, grid)) REQUIRE(c.abs() <= 1.0 + 1e-12);
    }
}

TEST_CASE("effective parameters are the weighted averages") {
    MixtureParams a{{1.0, 0.0},
                    {StableParams{1.0, 0, 0.7, 0}, StableParams{1.5, 0, 9.0, 0}}};
    CHECK(levycast::effective_params(a).gamma_eff == Catch::Approx(0.7));

    MixtureParams b{{0.5, 0.5}, {StableParams{1.0, 0, 1.0, 0}, StableParams{1.5, 0, 3.0, 0}}};
    CHECK(levycast::effective_params(b).gamma_eff == Catch::Approx(2.0));

    MixtureParams c{{0.25, 0.75}, {StableParams{1.0, 0, 1.0, 0}, StableParams{1.8, 0, 1.0, 0}}};
    CHECK(levycast::effective_params(c).alpha_eff == Catch::Approx(1.6));
}

TEST_CASE("adaptive weights hand values and monotone decay") {
    auto grid = levycast::make_grid(5, 2.0);  // -2,-1,0,1,2
    auto w = levycast::adaptive_weights({1.0, 2.0}, grid);
    CHECK(w[2] == Catch::Approx(1.0));
    CHECK(w[3] == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(w[4] == Catch::Approx(std::exp(-4.0)).epsilon(1e-12));

    auto w1 = levycast::adaptive_weights({1.0, 1.0}, grid);
    CHECK(w1[3] == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));

    auto g = levycast::make_grid(129, 15.0);
    auto wd = levycast::adaptive_weights({0.7, 1.3}, g);
    for (std::size_t m = 65; m + 1 < g.size(); ++m) REQUIRE(wd[m + 1] < wd[m]);
}

TEST_CASE("empirical CF per observation") {
    auto grid = levycast::make_grid(5, levycast::numeric::pi);
    auto at_zero = levycast::empirical_cf(0.0, grid);
    for (auto& c : at_zero) {
        CHECK(c.re == Catch::Approx(1.0));
        CHECK(c.im == Catch::Approx(0.0).margin(1e-15));
    }
    auto y1 = levycast::empirical_cf(1.0, grid);
    CHECK(y1[4].re == Catch::Approx(-1.0).epsilon(1e-12));  // tau = pi
    CHECK(y1[4].im == Catch::Approx(0.0).margin(1e-12));

    auto grid2 = levycast::make_grid(9, levycast::numeric::pi);
    auto y2 = levycast::empirical_cf(2.0, grid2);
    // tau = pi/4 is point index 5: e^{i pi/2} = i.
    CHECK(y2[5].re == Catch::Approx(0.0).margin(1e-12));
    CHECK(y2[5].im == Catch::Approx(1.0).epsilon(1e-12));
    for (auto& c : y1) CHECK(c.abs() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ecf_batch_mean hand values and errors") {
    CHECK_THROWS(levycast::ecf_batch_mean({}, 1.0));
    Complex a = levycast::ecf_batch_mean({0.0, 0.0, 0.0}, 2.7);
    CHECK(a.re == Catch::Approx(1.0));
    CHECK(a.im == Catch::Approx(0.0).margin(1e-15));
    Complex b = levycast::ecf_batch_mean({1.0, -1.0}, levycast::numeric::pi);
    CHECK(b.re == Catch::Approx(-1.0).epsilon(1e-12));
    CHECK(b.im == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("ecf of Cauchy draws approaches the closed form") {
    RngStream rng(31, 0);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = levycast::sample_stable({1.0, 0.0, 1.0, 0.0}, rng);
    Complex e = levycast::ecf_batch_mean(xs, 1.0);
    double bound = 5.0 / std::sqrt(static_cast<double>(xs.size()));
    CHECK((e - Complex{std::exp(-1.0), 0.0}).abs() < bound);
}

TEST_CASE("ecf_batch_mean variance obeys the 1/B bound") {
    // Sum of the variances of re and im parts is (1 - |phi|^2)/B <= 1/B.
    // Tested at B in {128, 1024} over 1000 repetitions; the law's CF keeps
    // |phi| well away from 0 on the tested frequencies so the bound has
    // slack exceeding the estimator noise.
    StableParams p{1.5, 0.3, 0.05, 0.2};
    for (std::size_t B : {std::size_t{128}, std::size_t{1024}}) {
        for (double tau : {0.5, 3.0, 15.0}) {
            RngStream rng(1717, B);
            const int reps = 1000;
            std::vector<double> res(reps), ims(reps);
            std::vector<double> batch(B);
            for (int r = 0; r < reps; ++r) {
                for (auto& x : batch) x = levycast::sample_stable(p, rng);
                Complex e = levycast::ecf_batch_mean(batch, tau);
                res[r] = e.re;
                ims[r] = e.im;
            }
            auto var = [&](const std::vector<double>& v) {
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= v.size();
                double s = 0.0;
                for (double x : v) s += (x - mean) * (x - mean);
                return s / (v.size() - 1);
            };
            double total = var(res) + var(ims);
            INFO("B=" << B << " tau=" << tau << " var=" << total << " bound=" << 1.0 / B);
            REQUIRE(total <= 1.0 / static_cast<double>(B));
        }
    }
}

TEST_CASE("cf_loss degenerate hand value") {
    auto grid = levycast::make_grid(3, 1.0);
    // Degenerate mixture forced to Phi ~ 1: gamma at the floor makes
    // |gamma tau|^alpha ~ 3e-7; e^{-that} ~ 1 - 3e-7.
    MixtureParams m{{1.0}, {StableParams{1.8, 0.0, levycast::numeric::eps_gamma, 0.0}}};
    std::vector<std::vector<MixtureParams>> mixes{{m}};
    std::vector<std::vector<double>> targets{{levycast::numeric::pi}};
    double loss = levycast::cf_loss(mixes, targets, grid);
    // |1 - e^{+-i pi}|^2 = 4 at both included frequencies.
    CHECK(loss == Catch::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("cf_loss population value matches the closed-form expectation") {
    // For i.i.d. targets y ~ phi and a predicted CF Phi, each loss term has
    // expectation
    //   sum_m w (|Phi - phi|^2 + 1 - |phi|^2) / (sum_m w + eps)
    // since E|Phi - e^{i tau y}|^2 = |Phi - phi|^2 + (1 - |phi|^2). The
    // matching law therefore sits at the 1 - |phi|^2 floor and any
    // mismatched law strictly above it.
    RngStream rng(41, 0);
    StableParams truth{1.5, 0.5, 1.0, 0.0};
    auto grid = levycast::make_grid(33, 15.0);
    MixtureParams m{{1.0}, {truth}};
    MixtureParams wrong{{1.0}, {StableParams{1.1, -0.5, 2.0, 1.0}}};
    const std::size_t B = 4096;
    std::vector<std::vector<MixtureParams>> good(B), bad(B);
    std::vector<std::vector<double>> ys(B);
    for (std::size_t b = 0; b < B; ++b) {
        good[b] = {m};
        bad[b] = {wrong};
        ys[b] = {levycast::sample_stable(truth, rng)};
    }
    const double lg = levycast::cf_loss(good, ys, grid);
    const double lb = levycast::cf_loss(bad, ys, grid);

    auto expected = [&](const MixtureParams& pred) {
        const auto w = levycast::adaptive_weights(levycast::effective_params(pred), grid);
        const auto phi_pred = levycast::mixture_cf(pred, grid);
        const auto phi_true = levycast::mixture_cf(m, grid);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!grid.include_mask[i]) continue;
            const auto d = phi_pred[i] - phi_true[i];
            num += w[i] * (d.re * d.re + d.im * d.im + 1.0 -
                           phi_true[i].re * phi_true[i].re - phi_true[i].im * phi_true[i].im);
            den += w[i];
        }
        return num / (den + levycast::numeric::eps_w);
    };
    CHECK(lg == Catch::Approx(expected(m)).margin(0.1));
    CHECK(lb == Catch::Approx(expected(wrong)).margin(0.2));
    CHECK(lg < lb);
}

TEST_CASE("cf_loss batch-mean structure") {
    RngStream rng(42, 0);
    auto grid = levycast::make_grid(17, 8.0);
    std::vector<std::vector<MixtureParams>> mixes;
    std::vector<std::vector<double>> ys;
    for (int b = 0; b < 4; ++b) {
        mixes.push_back({random_mixture(rng, 2), random_mixture(rng, 2)});
        ys.push_back({rng.uniform_open(-2.0, 2.0), rng.uniform_open(-2.0, 2.0)});
    }
    double base = levycast::cf_loss(mixes, ys, grid);

    // Duplicating every sample leaves the batch mean unchanged.
    auto mixes2 = mixes;
    auto ys2 = ys;
    mixes2.insert(mixes2.end(), mixes.begin(), mixes.end());
    ys2.insert(ys2.end(), ys.begin(), ys.end());
    CHECK(levycast::cf_loss(mixes2, ys2, grid) == Catch::Approx(base).epsilon(1e-12));

    // Simultaneous permutation of components and weights changes nothing.
    auto mixes3 = mixes;
    for (auto& row : mixes3) {
        for (auto& mix : row) {
            std::swap(mix.weights[0], mix.weights[1]);
            std::swap(mix.components[0], mix.components[1]);
        }
    }
    CHECK(levycast::cf_loss(mixes3, ys, grid) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("uniform weighting reduces to the unweighted mean squared CF error") {
    RngStream rng(43, 0);
    auto grid = levycast::make_grid(9, 4.0);
    auto m = random_mixture(rng, 2);
    double y = 0.7;
    std::vector<std::vector<MixtureParams>> mixes{{m}};
    std::vector<std::vector<double>> ys{{y}};
    double got = levycast::cf_loss(mixes, ys, grid, /*uniform_weights=*/true);

    auto phi = levycast::mixture_cf(m, grid);
    double num = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!grid.include_mask[i]) continue;
        double dr = phi[i].re - std::cos(grid.points[i] * y);
        double di = phi[i].im - std::sin(grid.points[i] * y);
        num += dr * dr + di * di;
        ++cnt;
    }
    CHECK(got == Catch::Approx(num / (cnt + levycast::numeric::eps_w)).epsilon(1e-12));
}

TEST_CASE("entropy regularizer closed forms") {
    using W = std::vector<std::vector<std::vector<double>>>;
    CHECK(levycast::entropy_regularizer(W{{{1.0, 0.0, 0.0}}}) ==
          Catch::Approx(0.0).margin(1e-6));
    CHECK(levycast::entropy_regularizer(
              W{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}}) ==
          Catch::Approx(std::log(3.0)).margin(1e-6));
    CHECK(levycast::entropy_regularizer(W{{{1.0}}}) == Catch::Approx(0.0).margin(1e-6));
    // Mean over the (b, h) panel.
    W panel{{{0.5, 0.5}, {1.0, 0.0}}, {{0.5, 0.5}, {1.0, 0.0}}};
    CHECK(levycast::entropy_regularizer(panel) ==
          Catch::Approx(0.5 * std::log(2.0)).margin(1e-5));
}

TEST_CASE("cf_loss rejects mismatched shapes") {
    auto grid = levycast::make_grid(9, 4.0);
    RngStream rng(44, 0);
    std::vector<std::vector<MixtureParams>> mixes{{random_mixture(rng, 2)}};
    std::vector<std::vector<double>> ys{{0.1, 0.2}};
    CHECK_THROWS(levycast::cf_loss(mixes, ys, grid));
    CHECK_THROWS(levycast::cf_loss({}, {}, grid));
}
