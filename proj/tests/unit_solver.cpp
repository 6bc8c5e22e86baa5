#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "algomit/error_models.hpp"
#include "algomit/extrapolate.hpp"
#include "algomit/hamiltonian.hpp"
#include "algomit/pe_sim.hpp"

using namespace algomit;
using Catch::Approx;

namespace {

RMatrix row(std::initializer_list<double> v)
{
    RMatrix m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) m(0, k++) = x;
    return m;
}

std::vector<double> vec(const RVector &v) { return {v.data(), v.data() + v.size()}; }

void check_invariants(const MitigationWeights &w, const DesignSystem &sys)
{
    CHECK(w.sum() == Approx(1.0).margin(1e-10));
    CHECK((sys.matrix * w.lambda - sys.target).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(w.l2_norm <= w.l1_norm + 1e-15);
    CHECK(w.l1_norm <= std::sqrt(static_cast<double>(w.size())) * w.l2_norm + 1e-12);
}

// P(y) from the complex-exponential form, independent of the sine form used by the library.
double pe_oracle(double phi, int q, std::int64_t y)
{
    const double d = phi - static_cast<double>(y) / std::ldexp(1.0, q);
    const std::complex<double> one(1.0, 0.0);
    const auto num = one - std::polar(1.0, 2 * std::numbers::pi * d * std::ldexp(1.0, q));
    const auto den = one - std::polar(1.0, 2 * std::numbers::pi * d);
    if (std::abs(den) < 1e-300) return 1.0;
    return std::norm(num) / (std::ldexp(1.0, 2 * q) * std::norm(den));
}

} // namespace

// ---------------------------------------------------------------------------
// monomials and design matrices
// ---------------------------------------------------------------------------

TEST_CASE("count_monomials")
{
    for (int p = 0; p < 8; ++p) CHECK(count_monomials(1, p) == static_cast<std::uint64_t>(p + 1));
    CHECK(count_monomials(2, 2) == 6);
    CHECK(count_monomials(16, 1) == 17);
    CHECK(count_monomials(15, 2) == 136);
    CHECK_THROWS_AS(count_monomials(0, 1), InvalidArgument);
    CHECK_THROWS_AS(count_monomials(2, -1), InvalidArgument);
    CHECK_THROWS_AS(count_monomials(1000, 100), InvalidArgument);
}

TEST_CASE("monomial basis order")
{
    const MonomialBasis b(2, 2);
    const std::vector<std::vector<int>> expect{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    CHECK(b.tuples() == expect);
    const MonomialBasis b3(3, 3);
    CHECK(b3.size() == count_monomials(3, 3));
    int prev = 0;
    for (const auto &t : b3.tuples()) {
        CHECK(MonomialBasis::degree(t) >= prev);
        prev = MonomialBasis::degree(t);
    }
}

TEST_CASE("design matrix")
{
    const auto sys = design_matrix(row({-1, 1, 2}), 2);
    RMatrix expect(3, 3);
    expect << 1, 1, 1, -1, 1, 2, 1, 1, 4;
    CHECK(sys.matrix == expect);
    CHECK(sys.target == RVector::Unit(3, 0));

    RMatrix d(3, 4);
    d << 0.1, -0.2, 0.3, 0.0, 0.5, 0.5, -0.1, 0.2, -0.6, -0.3, -0.2, -0.2;
    const auto s0 = design_matrix(d, 0);
    CHECK(s0.matrix == RMatrix::Ones(1, 4));

    // Degree-1 rows of a zero-sum delta set add up to zero.
    const auto s1 = design_matrix(d, 1);
    CHECK(s1.matrix.bottomRows(3).colwise().sum().cwiseAbs().maxCoeff() < 1e-15);
    const auto s2 = design_matrix(d, 2);
    // Row for tuple (1,1,0) is delta_1 * delta_2.
    CHECK(s2.matrix(5, 1) == Approx(-0.2 * 0.5));
    CHECK_THROWS_AS(design_matrix(d, -1), InvalidArgument);
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

TEST_CASE("minimum-norm weights")
{
    const auto sys = design_matrix(row({-1, 1, 2}), 2);
    const auto w = solve_lambda_min_l2(sys);
    CHECK(w.lambda(0) == Approx(1.0 / 3));
    CHECK(w.lambda(1) == Approx(1.0));
    CHECK(w.lambda(2) == Approx(-1.0 / 3));
    CHECK(w.regime == Regime::min_l2);
    check_invariants(w, sys);

    const auto exact = solve_lambda_exact(sys.matrix, sys.target);
    CHECK((exact.lambda - w.lambda).norm() < 1e-12);

    const auto flat = solve_lambda_min_l2(design_matrix(row({0.1, 0.3, 0.7, 0.9, 1.3}), 0));
    for (int k = 0; k < 5; ++k) CHECK(flat.lambda(k) == Approx(0.2));

    CHECK_THROWS_AS(solve_lambda_min_l2(design_matrix(row({0.1, 0.2}), 2)), Infeasible);
    CHECK_THROWS_AS(solve_lambda_exact(design_matrix(row({0.1, 0.2}), 2).matrix, RVector::Unit(3, 0)),
                    InvalidArgument);
    CHECK_THROWS_AS(solve_lambda_min_l2(RMatrix::Ones(2, 2), RVector::Ones(3)), InvalidArgument);

    // Duplicated columns still give finite minimum-norm weights.
    const auto dup = solve_lambda_min_l2(design_matrix(row({-1, 1, 1, 2}), 2));
    CHECK(dup.lambda.allFinite());
    CHECK(dup.lambda(1) == Approx(dup.lambda(2)));
}

TEST_CASE("minimum-norm weights at tiny scales")
{
    // Row equilibration keeps p = 4 solvable with steps of 1e-3.
    const auto sys = design_matrix(row({-2e-3, -1e-3, 1e-3, 2e-3, 3e-3}), 4);
    const auto w = solve_lambda_min_l2(sys);
    check_invariants(w, sys);
    CHECK(w.rank == 5);
}

TEST_CASE("nonnegative weights")
{
    const auto pair = solve_lambda_nonnegative(design_matrix(row({-1, 1}), 1));
    CHECK(pair.lambda(0) == Approx(0.5));
    CHECK(pair.lambda(1) == Approx(0.5));
    CHECK(pair.l1_norm == Approx(1.0).margin(1e-12));

    RMatrix tri(2, 3);
    tri << 1, 0, -1, 0, 1, -1;
    const auto sys = design_matrix(tri, 1);
    const auto w = solve_lambda_nonnegative(sys);
    for (int k = 0; k < 3; ++k) CHECK(w.lambda(k) == Approx(1.0 / 3));
    CHECK(w.regime == Regime::nonnegative);
    check_invariants(w, sys);

    RMatrix half(2, 3);
    half << 1, 2, 0.5, 0.5, -0.5, 0.1;
    try {
        (void)solve_lambda_nonnegative(design_matrix(half, 1));
        FAIL("expected HullInfeasible");
    } catch (const HullInfeasible &e) {
        const auto &u = e.direction();
        REQUIRE(u.size() == 3);
        // Every column lies strictly on one side of the reported direction.
        for (int k = 0; k < 3; ++k) CHECK(half(0, k) * u[1] + half(1, k) * u[2] < 0.0);
    }
}

TEST_CASE("nonnegative weights never exceed the min-norm l1 norm")
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 50; ++rep) {
        RMatrix d(3, 12);
        for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = g(rng);
        const auto sys = design_matrix(d, 1);
        MitigationWeights nn;
        try {
            nn = solve_lambda_nonnegative(sys);
        } catch (const HullInfeasible &) {
            continue;
        }
        const auto ml2 = solve_lambda_min_l2(sys);
        CHECK(nn.l1_norm == Approx(1.0).margin(1e-10));
        CHECK(nn.l1_norm <= ml2.l1_norm + 1e-10);
        CHECK(ml2.l2_norm <= nn.l2_norm + 1e-10);
        CHECK(nn.lambda.minCoeff() >= 0.0);
    }
}

TEST_CASE("order feasibility and m_{p,min}")
{
    const RMatrix d = row({0.3, -0.2, 0.5, 0.1, -0.4, 0.7});
    for (int p = 0; p <= 4; ++p) CHECK(min_m_for_order(d, p) == p + 1);
    CHECK(highest_feasible_order(d.leftCols(3), 5) == 2);
    CHECK_THROWS_AS(min_m_for_order(d.leftCols(2), 3), Exhausted);

    const auto h = normalised(build_ising(3, 4));
    std::mt19937_64 rng(2);
    const auto draw = draw_offset_columns(h.coefficients(), 8, 40, rng);
    CHECK(min_m_for_order(draw.deltas, 1) == 6);
    CHECK(static_cast<std::uint64_t>(min_m_for_order(draw.deltas, 2)) == analytic_min_m(6, 2));
    const auto ls = design_matrix(draw.deltas, 1);
    CHECK(linalg::pinv_min_norm(ls.matrix).rank == static_cast<Eigen::Index>(ls.matrix.rows()) - 1);

    CHECK(recommended_m(16) == 26);
    CHECK(analytic_min_m(1, 4) == 5);
    CHECK(analytic_min_m(16, 1) == 16);
}

TEST_CASE("phase-estimation call budget")
{
    CHECK(pe_call_budget(1, 4, 1.0) == 15);
    CHECK(pe_call_budget(16, 1, 1.0) == 26);
    CHECK(pe_call_budget(16, 1, 0.5) == 52);
    CHECK(pe_call_budget(1, 4, 0.5) == 2 * pe_call_budget(1, 4, 1.0));
    CHECK_THROWS_AS(pe_call_budget(1, 1, 0.0), InvalidArgument);
    CHECK_THROWS_AS(pe_call_budget(1, 1, 1.5), InvalidArgument);
}

TEST_CASE("combine")
{
    MitigationWeights one;
    one.lambda = RVector::Ones(1);
    CHECK(combine(one, std::vector<double>{-0.7}).value == -0.7);

    const auto w = solve_lambda_min_l2(design_matrix(row({-1, 1, 2}), 2));
    const auto flat = combine(w, std::vector<double>{0.25, 0.25, 0.25});
    CHECK(flat.value == Approx(0.25));
    CHECK(flat.predicted_variance_factor == Approx(1.0 / 9 + 1 + 1.0 / 9));

    const double a = -1.3, alpha = 0.7, beta = -2.1;
    std::vector<double> e;
    for (double d : {-1.0, 1.0, 2.0}) e.push_back(a + alpha * d + beta * d * d);
    CHECK(combine(w, e).value == Approx(a).margin(1e-12));
    CHECK_THROWS_AS(combine(w, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST_CASE("truncation error follows the next-order term")
{
    // a'(d) = a + g d^{p+1}: the residual is g * sum_k lambda_k d_k^{p+1},
    // bounded by ||lambda||_1 g ||d||_inf^{p+1}.
    const double a = 0.4, g = 3.0;
    for (int p : {1, 2, 3}) {
        RMatrix d(1, p + 1);
        for (int k = 0; k <= p; ++k) d(0, k) = 0.01 * (k + 1) * (k % 2 ? -1 : 1);
        const auto w = solve_lambda_min_l2(design_matrix(d, p));
        std::vector<double> e;
        for (int k = 0; k <= p; ++k) e.push_back(a + g * std::pow(d(0, k), p + 1));
        const double err = std::abs(combine(w, e).value - a);
        CHECK(err <= w.l1_norm * g * std::pow(d.cwiseAbs().maxCoeff(), p + 1) + 1e-15);
        CHECK(err > 0.0);
    }
}

TEST_CASE("noise floor")
{
    CHECK(noise_floor(1.0, 0.0, -0.5, -0.5) == 0.0);
    CHECK(noise_floor(1.0, 0.1, 0.2, 0.2) == Approx(0.1));
    CHECK(noise_floor(2.0, 0.3, 0.4, 0.0) == Approx(std::sqrt(0.36 + 0.16)));
    CHECK_THROWS_AS(noise_floor(1.0, -0.1, 0.0, 0.0), InvalidArgument);
}

TEST_CASE("weights serialise with provenance")
{
    const RMatrix d = row({-1, 1, 2});
    const auto w = solve_lambda_min_l2(design_matrix(d, 2));
    const auto j = weights_json(w, &d, 2);
    CHECK(j.at("regime") == "min_l2");
    CHECK(j.at("lambda").size() == 3);
    CHECK(j.at("delta_hash") == delta_hash(d));
    CHECK(delta_hash(d) != delta_hash(row({-1, 1, 3})));
    const auto est = estimate_json(combine(w, std::vector<double>{1, 2, 3}), &d, 2);
    CHECK(est.at("weights").at("p") == 2);
}

// ---------------------------------------------------------------------------
// phase estimation
// ---------------------------------------------------------------------------

TEST_CASE("PE distribution")
{
    const auto half = pe_distribution(0.5, 1);
    CHECK(half[0] == 0.0);
    CHECK(half[1] == 1.0);

    for (double phi : {0.0, 0.1, 0.33, 0.75, 0.9}) {
        const auto p = pe_distribution(phi, 2);
        REQUIRE(p.size() == 4);
        double s = 0.0;
        for (double x : p) s += x;
        CHECK(s == Approx(1.0).margin(1e-12));
    }

    // phi = 1/3, q = 2, hand-evaluated: P(y) = sin^2(4 pi d) / (16 sin^2(pi d)), d = 1/3 - y/4.
    const auto third = pe_distribution(1.0 / 3.0, 2);
    for (int y = 0; y < 4; ++y) {
        const double d = 1.0 / 3.0 - y / 4.0;
        const double expect = std::pow(std::sin(4 * std::numbers::pi * d), 2) /
                              (16 * std::pow(std::sin(std::numbers::pi * d), 2));
        CHECK(third[static_cast<std::size_t>(y)] == Approx(expect).margin(1e-14));
    }

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const double phi = u(rng);
        for (int q : {3, 7, 12}) {
            const auto p = pe_distribution(phi, q);
            double s = 0.0;
            std::size_t mode = 0;
            for (std::size_t y = 0; y < p.size(); ++y) {
                s += p[y];
                if (p[y] > p[mode]) mode = y;
                CHECK(p[y] == Approx(pe_oracle(phi, q, static_cast<std::int64_t>(y))).margin(1e-12));
            }
            CHECK(s == Approx(1.0).margin(1e-12));
            const double dim = std::ldexp(1.0, q);
            const auto nearest = static_cast<std::size_t>(std::llround(phi * dim)) % p.size();
            CHECK(mode == nearest);
        }
    }
    CHECK_THROWS_AS(pe_distribution(1.0, 3), InvalidArgument);
    CHECK_THROWS_AS(pe_distribution(-0.1, 3), InvalidArgument);
    CHECK_THROWS_AS(pe_distribution(0.2, 0), InvalidArgument);
    CHECK_THROWS_AS(pe_distribution(0.2, 25), InvalidArgument);
}

TEST_CASE("PE sampling")
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) CHECK(pe_sample_energy(0.25, 4, rng) == Approx(std::cos(std::numbers::pi / 2)).margin(1e-15));

    std::mt19937_64 a(5), b(5);
    for (int i = 0; i < 50; ++i) CHECK(pe_sample_energy(0.3141, 10, a) == pe_sample_energy(0.3141, 10, b));

    for (int i = 0; i < 1000; ++i) {
        const double e = pe_sample_energy(0.777, 6, rng);
        CHECK(e >= -1.0);
        CHECK(e <= 1.0);
    }

    // Chi-square against the exact distribution, bins with expectation < 5 pooled.
    const double phi = 0.1234567;
    const int q = 6, draws = 100000;
    const auto p = pe_distribution(phi, q);
    std::vector<int> counts(p.size());
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(pe_sample_outcome(phi, q, rng))];
    double chi2 = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
    int bins = 0;
    for (std::size_t y = 0; y < p.size(); ++y) {
        const double expect = p[y] * draws;
        if (expect < 5.0) {
            pooled_obs += counts[y];
            pooled_exp += expect;
        } else {
            chi2 += std::pow(counts[y] - expect, 2) / expect;
            ++bins;
        }
    }
    if (pooled_exp > 0.0) {
        chi2 += std::pow(pooled_obs - pooled_exp, 2) / pooled_exp;
        ++bins;
    }
    const boost::math::chi_squared dist(bins - 1);
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("energy to phase")
{
    CHECK(energy_to_phase(1.0) == 0.0);
    CHECK(energy_to_phase(-1.0) == Approx(0.5));
    CHECK(energy_to_phase(0.0) == Approx(0.25));
    for (double e : {-0.93, -0.2, 0.41, 0.999}) CHECK(std::cos(2 * std::numbers::pi * energy_to_phase(e)) == Approx(e).margin(1e-12));
    CHECK_THROWS_AS(energy_to_phase(1.01), InvalidArgument);
    CHECK_THROWS_AS(energy_to_phase(std::nan("")), InvalidArgument);
}

TEST_CASE("noise table")
{
    std::istringstream in("noise_strength,E_bar,Delta_E\n0,exact,0\n0.001,-0.4,0.01\n# comment\n0.01,,0.05\n");
    const auto t = NoiseTable::parse(in);
    CHECK(t.rows().size() == 3);
    CHECK_FALSE(t.lookup(0.0).e_bar.has_value());
    CHECK(*t.lookup(0.001).e_bar == -0.4);
    CHECK(t.lookup(0.01).delta_e == 0.05);
    CHECK_THROWS_AS(t.lookup(0.5), InvalidArgument);

    std::istringstream bad_header("strength,mean,std\n0,0,0\n");
    CHECK_THROWS_AS(NoiseTable::parse(bad_header), IoError);
    std::istringstream bad_number("noise_strength,E_bar,Delta_E\n0,abc,0\n");
    CHECK_THROWS_AS(NoiseTable::parse(bad_number), IoError);
    std::istringstream negative("noise_strength,E_bar,Delta_E\n0,exact,-1\n");
    CHECK_THROWS_AS(NoiseTable::parse(negative), IoError);
    std::istringstream empty("");
    CHECK_THROWS_AS(NoiseTable::parse(empty), IoError);
    CHECK_THROWS_AS(NoiseTable::load("/nonexistent/table.csv"), IoError);
}

TEST_CASE("Gaussian noisy samples")
{
    std::mt19937_64 rng(11);
    PEConfig cfg;
    cfg.mode = GaussianNoise{0.0, 0.0};
    CHECK(noisy_energy_sample(-0.8, cfg, rng) == -0.8);

    const double e_true = -0.6, e_bar = -0.55, de = 0.02;
    cfg.mode = gaussian_from_entry(NoiseEntry{0.01, e_bar, de}, e_true);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = noisy_energy_sample(e_true, cfg, rng);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean - e_bar) <= 4 * de / std::sqrt(n));
    CHECK(std::sqrt(sq / n - mean * mean) == Approx(de).epsilon(0.02));

    // Larger strengths in the table move the mean toward 0.5.
    std::istringstream in("noise_strength,E_bar,Delta_E\n0.001,-0.5,0.01\n0.01,0.1,0.05\n0.1,0.45,0.2\n");
    const auto t = NoiseTable::parse(in);
    double prev = 1e9;
    for (double s : {0.001, 0.01, 0.1}) {
        const auto g = gaussian_from_entry(t.lookup(s), e_true);
        const double gap = std::abs(e_true + g.bias - 0.5);
        CHECK(gap < prev);
        prev = gap;
    }

    CHECK_THROWS_AS(noisy_energy_sample(0.0, PEConfig{}, rng), InvalidArgument);
}
