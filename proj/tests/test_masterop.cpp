#include <doctest.h>

#include <cmath>
#include <random>

#include "rmt/chebyshev.hpp"
#include "rmt/equilibrium.hpp"
#include "rmt/masterop.hpp"

using namespace rmt;
using masterop::GridFunction;
using masterop::MasterOperator;

namespace {

MasterOperator semicircle_op(int n = 128) {
    auto mu = equilibrium::EquilibriumMeasure::semicircle();
    return MasterOperator::make(mu, [](double x) { return x; }, n);
}

/// Independent evaluation of Xi f by direct quadrature of the defining
/// integral: Gauss-Chebyshev nodes against the density weight, with the
/// difference quotient regularized through the spectral derivative near
/// coincidence. Does not touch the closed-form Hilbert transforms the
/// solver is built on.
double xi_quadrature(const MasterOperator& op, const GridFunction& f, double x) {
    const auto& mu = op.mu;
    const double a = mu.a_end(), b = mu.b_end();
    const double c = 0.5 * (a + b), e = 0.5 * (b - a);
    const int m = 400;
    std::vector<double> tq, wq;
    cheb::gauss_chebyshev_u(m, tq, wq);
    GridFunction fd = f.derivative();
    double acc = 0.0;
    for (int q = 0; q < m; ++q) {
        const double y = c + e * tq[q];
        const double dq = (std::abs(x - y) < 1e-9) ? fd(x) : (f(x) - f(y)) / (x - y);
        acc += e * e * wq[q] * mu.dfactor(y) * dq;
    }
    return -op.beta * acc + op.weff_prime(x) * f(x);
}

/// Integral of psi against a kernel and the measure, by the same direct rule.
double kernel_quadrature(const equilibrium::EquilibriumMeasure& mu, const GridFunction& psi,
                         const masterop::Kernel2& K, double x) {
    const double c = 0.5 * (mu.a_end() + mu.b_end()), e = 0.5 * (mu.b_end() - mu.a_end());
    const int m = 400;
    std::vector<double> tq, wq;
    cheb::gauss_chebyshev_u(m, tq, wq);
    double acc = 0.0;
    for (int q = 0; q < m; ++q) {
        const double y = c + e * tq[q];
        acc += e * e * wq[q] * mu.dfactor(y) * psi(y) * K(y, x);
    }
    return acc;
}

}  // namespace

TEST_CASE("apply_xi on the semicircle: constants and linear functions") {
    auto op = semicircle_op();
    auto one = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid, [](double) { return 1.0; });
    auto id = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid, [](double x) { return x; });

    auto xi1 = apply_xi(op, one);
    auto xix = apply_xi(op, id);
    for (int j = 0; j < op.n_grid; ++j) {
        const double x = xi1.nodes()[j];
        CHECK(xi1.values()[j] == doctest::Approx(x).epsilon(1e-11));
        CHECK(xix.values()[j] == doctest::Approx(x * x - 2.0).epsilon(1e-11));
    }
}

TEST_CASE("apply_xi agrees with brute-force quadrature") {
    auto W = equilibrium::Potential::polynomial({0.0, 0.0, 0.5, 0.0, 0.01});
    auto mu = equilibrium::solve_onecut(W, 2, 6.0);
    auto op = MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 96);
    auto f = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid,
                                  [](double x) { return std::sin(1.3 * x) + 0.2 * x * x; });
    auto xif = apply_xi(op, f);
    for (double x : {-1.5, -0.4, 0.8, 1.7, 2.2}) {
        CHECK(xif(x) == doctest::Approx(xi_quadrature(op, f, x)).epsilon(1e-10));
    }
}

TEST_CASE("apply_xi linearity") {
    auto op = semicircle_op(64);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 5; ++rep) {
        const double a1 = u(gen), a2 = u(gen), w = u(gen);
        auto f = GridFunction::sample(op.grid_lo, op.grid_hi, 64,
                                      [&](double x) { return std::sin(a1 * x) + a2 * x; });
        auto g = GridFunction::sample(op.grid_lo, op.grid_hi, 64,
                                      [&](double x) { return std::cos(a2 * x); });
        GridFunction lhs = apply_xi(op, w * GridFunction(f) + g);
        GridFunction rhs = w * apply_xi(op, f) + apply_xi(op, g);
        lhs -= rhs;
        CHECK(lhs.max_abs() < 1e-10);
    }
}

TEST_CASE("invert_xi quadratic case: g = x^2 - 2 gives psi = x, c_g = 0") {
    auto op = semicircle_op();
    auto g = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid,
                                  [](double x) { return x * x - 2.0; });
    auto res = invert_xi(op, g);
    CHECK(std::abs(res.c_g) < 1e-11);
    for (int j = 0; j < op.n_grid; ++j)
        CHECK(res.psi.values()[j] == doctest::Approx(res.psi.nodes()[j]).epsilon(1e-10));
}

TEST_CASE("invert_xi round trip on a 50-function random smooth family") {
    auto W = equilibrium::Potential::polynomial({0.0, 0.1, 0.5, 0.02, 0.01});
    auto mu = equilibrium::solve_onecut(W, 2, 6.0);
    auto op = MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 128);
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const double a = u(gen), b = 2.0 * u(gen), c = u(gen);
        auto f = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid, [&](double x) {
            return std::sin(a + b * x) + c * x * x;
        });
        auto g = apply_xi(op, f);
        auto res = invert_xi(op, g);
        CHECK(std::abs(res.c_g) < 1e-9);
        GridFunction diff = res.psi;
        diff -= f;
        worst = std::max(worst, diff.max_abs());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("invert_xi round trip for beta = 1") {
    auto W = equilibrium::Potential::polynomial({0.0, 0.0, 0.25, 0.0, 0.005});
    auto mu = equilibrium::solve_onecut(W, 1, 6.0);
    auto op = MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 96);
    auto f = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid,
                                  [](double x) { return std::cos(0.9 * x) + 0.1 * x; });
    auto g = apply_xi(op, f);
    auto res = invert_xi(op, g);
    GridFunction diff = res.psi;
    diff -= f;
    CHECK(diff.max_abs() < 1e-8);
}

TEST_CASE("invert_xi: grid refinement stability") {
    auto W = equilibrium::Potential::polynomial({0.0, 0.0, 0.5, 0.0, 0.01});
    auto mu = equilibrium::solve_onecut(W, 2, 6.0);
    auto op1 = MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 96);
    auto op2 = MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 192);
    auto gfun = [](double x) { return std::exp(-0.3 * x * x) + 0.1 * x; };
    auto res1 = invert_xi(op1, GridFunction::sample(op1.grid_lo, op1.grid_hi, 96, gfun));
    auto res2 = invert_xi(op2, GridFunction::sample(op2.grid_lo, op2.grid_hi, 192, gfun));
    double diff = 0.0;
    for (double x = mu.a_end(); x <= mu.b_end(); x += 0.01)
        diff = std::max(diff, std::abs(res1.psi(x) - res2.psi(x)));
    CHECK(diff < 1e-7);
}

TEST_CASE("invert_xi: measured C1-from-C3 bound constant") {
    auto op = semicircle_op();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1, 1);
    double chat = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const double a = u(gen), b = 1.5 * u(gen);
        auto g = GridFunction::sample(op.grid_lo, op.grid_hi, op.n_grid,
                                      [&](double x) { return std::sin(a + b * x); });
        auto res = invert_xi(op, g);
        // C3 grid norm of g
        GridFunction g1 = g.derivative(), g2 = g1.derivative(), g3 = g2.derivative();
        const double gc3 = g.max_abs() + g1.max_abs() + g2.max_abs() + g3.max_abs();
        chat = std::max(chat, res.psi.c1_norm() / gc3);
    }
    MESSAGE("measured C1 <- C3 inversion constant: ", chat);
    CHECK(chat > 0.0);
    CHECK(chat < 1e3);
}

TEST_CASE("solve_coupled: zero coupling and t = 0 reduce to independent inversions") {
    auto W = equilibrium::Potential::quadratic(0.5);
    auto mu = equilibrium::solve_onecut(W, 2, 6.0);
    std::vector<MasterOperator> ops;
    ops.push_back(MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 64));
    ops.push_back(MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 64));
    std::vector<GridFunction> g;
    for (int k = 0; k < 2; ++k)
        g.push_back(GridFunction::sample(ops[k].grid_lo, ops[k].grid_hi, 64,
                                         [k](double x) { return std::sin(x + k); }));
    std::vector<std::vector<masterop::Kernel2>> zero(2, std::vector<masterop::Kernel2>(2));

    auto res = solve_coupled(ops, zero, 0.7, g);
    for (int k = 0; k < 2; ++k) {
        auto single = invert_xi(ops[k], g[k]);
        GridFunction diff = res.psi[k];
        diff -= single.psi;
        CHECK(diff.max_abs() < 1e-12);
    }

    std::vector<std::vector<masterop::Kernel2>> kern(2, std::vector<masterop::Kernel2>(2));
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
            kern[k][l] = [](double y, double x) { return std::cos(y) * std::sin(x); };
    auto res0 = solve_coupled(ops, kern, 0.0, g);
    for (int k = 0; k < 2; ++k) {
        auto single = invert_xi(ops[k], g[k]);
        GridFunction diff = res0.psi[k];
        diff -= single.psi;
        CHECK(diff.max_abs() < 1e-12);
    }
}

TEST_CASE("solve_coupled d=2 with small coupling: convergence and residual") {
    const double eps = 0.01;
    auto W = equilibrium::Potential::quadratic(0.5);
    auto mu = equilibrium::solve_onecut(W, 2, 6.0);
    std::vector<MasterOperator> ops;
    for (int k = 0; k < 2; ++k)
        ops.push_back(MasterOperator::make(mu, [&](double x) { return W.dW(x); }, 96));
    std::vector<GridFunction> g;
    g.push_back(GridFunction::sample(ops[0].grid_lo, ops[0].grid_hi, 96,
                                     [](double x) { return x * x - 2.0; }));
    g.push_back(GridFunction::sample(ops[1].grid_lo, ops[1].grid_hi, 96,
                                     [](double x) { return std::sin(x); }));
    std::vector<std::vector<masterop::Kernel2>> kern(2, std::vector<masterop::Kernel2>(2));
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
            kern[k][l] = [eps](double y, double x) { return eps * std::cos(y) * std::sin(x); };

    const double t = 1.0;
    auto res = solve_coupled(ops, kern, t, g);
    CHECK(res.iterations <= 25);
    CHECK(res.contraction < 0.5);

    // residual of the defining equation by independent quadrature
    for (int k = 0; k < 2; ++k) {
        for (double x : {-1.1, 0.3, 1.6}) {
            double xi = xi_quadrature(ops[k], res.psi[k], x);
            double cpl = 0.0;
            for (int l = 0; l < 2; ++l)
                cpl += kernel_quadrature(ops[l].mu, res.psi[l], kern[k][l], x);
            const double resid = xi - 2.0 * t * cpl - g[k](x) - res.c[k];
            CHECK(std::abs(resid) < 1e-8);
        }
    }
}

TEST_CASE("GridFunction2 evaluation and partial derivatives") {
    auto f2 = masterop::GridFunction2::sample(-2.0, 2.0, 48, [](double x, double y) {
        return std::sin(x) * std::cos(0.5 * y) + x * y;
    });
    CHECK(f2(0.3, -1.1) ==
          doctest::Approx(std::sin(0.3) * std::cos(-0.55) - 0.33).epsilon(1e-10));
    CHECK(f2.d1(0.3, -1.1) ==
          doctest::Approx(std::cos(0.3) * std::cos(-0.55) - 1.1).epsilon(1e-9));
    CHECK(f2.d2(0.3, -1.1) ==
          doctest::Approx(-0.5 * std::sin(0.3) * std::sin(-0.55) + 0.3).epsilon(1e-9));
}
