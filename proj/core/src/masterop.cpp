#include "rmt/masterop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmt/chebyshev.hpp"

namespace rmt::masterop {

GridFunction::GridFunction(double lo, double hi, std::vector<double> vals)
    : lo_(lo), hi_(hi), vals_(std::move(vals)) {
    xs_ = cheb::points(static_cast<int>(vals_.size()), lo_, hi_);
    bw_ = cheb::barycentric_weights(static_cast<int>(vals_.size()));
}

GridFunction GridFunction::zero(double lo, double hi, int n) {
    return GridFunction(lo, hi, std::vector<double>(n, 0.0));
}

GridFunction GridFunction::sample(double lo, double hi, int n,
                                  const std::function<double(double)>& f) {
    auto xs = cheb::points(n, lo, hi);
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[j] = f(xs[j]);
    return GridFunction(lo, hi, std::move(v));
}

double GridFunction::operator()(double x) const {
    return cheb::barycentric_eval(xs_, vals_, bw_, x);
}

GridFunction GridFunction::derivative() const {
    auto c = cheb_coeffs();
    auto d = cheb::derivative_coeffs(c);
    const double scale = 2.0 / (hi_ - lo_);
    const int n = size();
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) {
        const double t = -std::cos(M_PI * j / (n - 1));
        v[j] = cheb::eval_t_series(d, t) * scale;
    }
    return GridFunction(lo_, hi_, std::move(v));
}

std::vector<double> GridFunction::cheb_coeffs() const { return cheb::vals_to_coeffs(vals_); }

GridFunction& GridFunction::operator+=(const GridFunction& o) {
    for (int j = 0; j < size(); ++j) vals_[j] += o.vals_[j];
    return *this;
}
GridFunction& GridFunction::operator-=(const GridFunction& o) {
    for (int j = 0; j < size(); ++j) vals_[j] -= o.vals_[j];
    return *this;
}
GridFunction& GridFunction::operator*=(double s) {
    for (double& v : vals_) v *= s;
    return *this;
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::c1_norm() const { return max_abs() + derivative().max_abs(); }

GridFunction2::GridFunction2(double lo, double hi, int n)
    : lo_(lo), hi_(hi), n_(n), vals_(n * n, 0.0) {
    xs_ = cheb::points(n, lo, hi);
    bw_ = cheb::barycentric_weights(n);
}

GridFunction2 GridFunction2::sample(double lo, double hi, int n,
                                    const std::function<double(double, double)>& f) {
    GridFunction2 g(lo, hi, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g.at(i, j) = f(g.xs_[i], g.xs_[j]);
    return g;
}

double GridFunction2::operator()(double x, double y) const {
    std::vector<double> col(n_);
    for (int i = 0; i < n_; ++i) {
        std::vector<double> row(vals_.begin() + i * n_, vals_.begin() + (i + 1) * n_);
        col[i] = cheb::barycentric_eval(xs_, row, bw_, y);
    }
    return cheb::barycentric_eval(xs_, col, bw_, x);
}

GridFunction GridFunction2::column(int j) const {
    std::vector<double> v(n_);
    for (int i = 0; i < n_; ++i) v[i] = at(i, j);
    return GridFunction(lo_, hi_, std::move(v));
}

void GridFunction2::set_column(int j, const GridFunction& g) {
    for (int i = 0; i < n_; ++i) at(i, j) = g.values()[i];
}

double GridFunction2::d1(double x, double y) const {
    std::vector<double> col(n_);
    for (int i = 0; i < n_; ++i) {
        std::vector<double> row(vals_.begin() + i * n_, vals_.begin() + (i + 1) * n_);
        col[i] = cheb::barycentric_eval(xs_, row, bw_, y);
    }
    GridFunction gx(lo_, hi_, std::move(col));
    return gx.derivative()(x);
}

double GridFunction2::d2(double x, double y) const {
    std::vector<double> row(n_);
    for (int j = 0; j < n_; ++j) {
        std::vector<double> col(n_);
        for (int i = 0; i < n_; ++i) col[i] = at(i, j);
        row[j] = cheb::barycentric_eval(xs_, col, bw_, x);
    }
    GridFunction gy(lo_, hi_, std::move(row));
    return gy.derivative()(y);
}

std::vector<double> GridFunction2::cheb_coeffs2() const {
    std::vector<double> tmp(n_ * n_), out(n_ * n_);
    for (int i = 0; i < n_; ++i) {
        std::vector<double> row(vals_.begin() + i * n_, vals_.begin() + (i + 1) * n_);
        auto c = cheb::vals_to_coeffs(row);
        for (int q = 0; q < n_; ++q) tmp[i * n_ + q] = c[q];
    }
    for (int q = 0; q < n_; ++q) {
        std::vector<double> col(n_);
        for (int i = 0; i < n_; ++i) col[i] = tmp[i * n_ + q];
        auto c = cheb::vals_to_coeffs(col);
        for (int p = 0; p < n_; ++p) out[p * n_ + q] = c[p];
    }
    return out;
}

double GridFunction2::max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
}

MasterOperator MasterOperator::make(const equilibrium::EquilibriumMeasure& mu,
                                    const std::function<double(double)>& weff_prime,
                                    int n_grid) {
    MasterOperator op;
    op.mu = mu;
    op.beta = mu.beta();
    const double w = mu.b_end() - mu.a_end();
    op.grid_lo = mu.a_end() - 0.5 * w;
    op.grid_hi = mu.b_end() + 0.5 * w;
    op.n_grid = n_grid;
    op.weff_prime = GridFunction::sample(op.grid_lo, op.grid_hi, n_grid, weff_prime);
    return op;
}

namespace {

/// U-basis coefficients of h(t) = f(y(t)) d(y(t)) e on the measure's support.
std::vector<double> weighted_ucoeffs(const MasterOperator& op,
                                     const std::function<double(double)>& f) {
    const auto& mu = op.mu;
    const double c = 0.5 * (mu.a_end() + mu.b_end()), e = 0.5 * (mu.b_end() - mu.a_end());
    const int n = op.n_grid + static_cast<int>(mu.dcoef().size()) + 8;
    std::vector<double> vals(n);
    for (int j = 0; j < n; ++j) {
        const double t = -std::cos(M_PI * j / (n - 1));
        const double x = c + e * t;
        vals[j] = f(x) * mu.dfactor(x) * e;
    }
    return cheb::t_to_u_basis(cheb::vals_to_coeffs(vals));
}

/// PV int f(y) rho(y)/(x-y) dy from the U-coefficients of h = f d e;
/// s is the support-rescaled coordinate of x. Valid on and off the support.
double hilbert_weighted(const std::vector<double>& w, double s) {
    if (std::abs(s) <= 1.0) {
        std::vector<double> tk(w.size() + 1, 0.0);
        for (size_t k = 0; k < w.size(); ++k) tk[k + 1] = M_PI * w[k];
        return cheb::eval_t_series(tk, s);
    }
    const double J = cheb::joukowski_inverse(s);
    double acc = 0.0, Jk = 1.0;
    for (size_t k = 0; k < w.size(); ++k) {
        Jk *= J;
        acc += w[k] * Jk;
    }
    return M_PI * acc;
}

}  // namespace

GridFunction apply_xi(const MasterOperator& op, const GridFunction& f) {
    const auto& mu = op.mu;
    const double c = 0.5 * (mu.a_end() + mu.b_end()), e = 0.5 * (mu.b_end() - mu.a_end());
    auto w = weighted_ucoeffs(op, [&](double x) { return f(x); });
    const int n = f.size();
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
        const double x = f.nodes()[j];
        const double s = (x - c) / e;
        const double hrho = (std::abs(s) <= 1.0) ? mu.hilbert(x) : mu.stieltjes_real(x);
        const double hphi = hilbert_weighted(w, s);
        out[j] =
            -op.beta * (f.values()[j] * hrho - hphi) + op.weff_prime.values()[j] * f.values()[j];
    }
    return GridFunction(f.lo(), f.hi(), std::move(out));
}

namespace {

/// Single airfoil-style solve (no refinement): fills grid values and c_g.
void invert_core(const MasterOperator& op, const GridFunction& g,
                 std::vector<double>& psi_vals, double& c_g) {
    const auto& mu = op.mu;
    const double c = 0.5 * (mu.a_end() + mu.b_end()), e = 0.5 * (mu.b_end() - mu.a_end());
    const int beta = op.beta;
    const int nc = op.n_grid + static_cast<int>(mu.dcoef().size()) + 8;

    std::vector<double> gvals(nc);
    for (int j = 0; j < nc; ++j) {
        const double t = -std::cos(M_PI * j / (nc - 1));
        gvals[j] = g(c + e * t);
    }
    auto gh = cheb::vals_to_coeffs(gvals);
    c_g = -gh[0];
    std::vector<double> w(gh.size() - 1);
    for (size_t k = 1; k < gh.size(); ++k) w[k - 1] = gh[k] / (beta * M_PI);

    const auto& xs = g.nodes();
    const int n = g.size();
    psi_vals.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
        const double x = xs[j];
        const double s = (x - c) / e;
        if (std::abs(s) <= 1.0 + 1e-9) {
            const double sc = std::clamp(s, -1.0, 1.0);
            psi_vals[j] = cheb::eval_u_series(w, sc) / (e * mu.dfactor(c + e * sc));
        } else {
            const double num = g.values()[j] + c_g - beta * hilbert_weighted(w, s);
            const double den = op.weff_prime.values()[j] - beta * mu.stieltjes_real(x);
            if (std::abs(den) < 1e-13 * std::max(1.0, std::abs(op.weff_prime.values()[j])))
                psi_vals[j] = cheb::eval_u_series(w, s) / (e * mu.dfactor(x));
            else
                psi_vals[j] = num / den;
        }
    }
}

}  // namespace

InvertResult invert_xi(const MasterOperator& op, const GridFunction& g, double tol,
                       int max_refine) {
    std::vector<double> vals;
    double cg = 0.0;
    invert_core(op, g, vals, cg);
    GridFunction psi(g.lo(), g.hi(), vals);

    const double scale = std::max(1.0, g.max_abs());
    double resid = 0.0;
    for (int pass = 0; pass < max_refine; ++pass) {
        GridFunction r = apply_xi(op, psi);
        for (int j = 0; j < r.size(); ++j) r.values()[j] -= g.values()[j] + cg;
        resid = r.max_abs();
        if (resid < tol * scale) break;
        r *= -1.0;
        std::vector<double> dvals;
        double dc = 0.0;
        invert_core(op, r, dvals, dc);
        for (int j = 0; j < psi.size(); ++j) psi.values()[j] += dvals[j];
        cg += dc;
    }
    if (!(resid < 1e-6 * scale))
        throw std::runtime_error(
            "invert_xi: residual did not converge (is mu the equilibrium measure of W_eff?)");
    return {psi, cg, resid};
}

CoupledResult solve_coupled(const std::vector<MasterOperator>& ops,
                            const std::vector<std::vector<Kernel2>>& coupling, double t,
                            const std::vector<GridFunction>& g, double tol, int max_iter) {
    const int d = static_cast<int>(ops.size());
    if (static_cast<int>(g.size()) != d || static_cast<int>(coupling.size()) != d)
        throw std::invalid_argument("solve_coupled: size mismatch");

    const int m = 80;
    std::vector<double> tq, wq;
    cheb::gauss_chebyshev_u(m, tq, wq);
    std::vector<std::vector<double>> ynodes(d), yweights(d);
    for (int l = 0; l < d; ++l) {
        const auto& mu = ops[l].mu;
        const double c = 0.5 * (mu.a_end() + mu.b_end()), e = 0.5 * (mu.b_end() - mu.a_end());
        ynodes[l].resize(m);
        yweights[l].resize(m);
        for (int q = 0; q < m; ++q) {
            ynodes[l][q] = c + e * tq[q];
            yweights[l][q] = e * e * wq[q] * mu.dfactor(ynodes[l][q]);
        }
    }
    // kernel tables K[k][l][q*n+i] = coupling[k][l](y_q, x_i)
    std::vector<std::vector<std::vector<double>>> ktab(d);
    for (int k = 0; k < d; ++k) {
        ktab[k].resize(d);
        for (int l = 0; l < d; ++l) {
            if (!coupling[k][l]) continue;
            const int n = g[k].size();
            ktab[k][l].resize(m * n);
            for (int q = 0; q < m; ++q)
                for (int i = 0; i < n; ++i)
                    ktab[k][l][q * n + i] = coupling[k][l](ynodes[l][q], g[k].nodes()[i]);
        }
    }

    std::vector<GridFunction> psi(d), prev(d);
    for (int k = 0; k < d; ++k) psi[k] = GridFunction::zero(g[k].lo(), g[k].hi(), g[k].size());
    std::vector<double> cs(d, 0.0);

    double prev_delta = -1.0, contraction = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        prev = psi;
        double delta = 0.0;
        for (int k = 0; k < d; ++k) {
            GridFunction rhs = g[k];
            if (t != 0.0) {
                const int n = rhs.size();
                for (int l = 0; l < d; ++l) {
                    if (ktab[k][l].empty()) continue;
                    std::vector<double> pv(m);
                    for (int q = 0; q < m; ++q) pv[q] = prev[l](ynodes[l][q]);
                    for (int i = 0; i < n; ++i) {
                        double acc = 0.0;
                        for (int q = 0; q < m; ++q)
                            acc += yweights[l][q] * pv[q] * ktab[k][l][q * n + i];
                        rhs.values()[i] += 2.0 * t * acc;
                    }
                }
            }
            auto res = invert_xi(ops[k], rhs);
            psi[k] = res.psi;
            cs[k] = res.c_g;
            GridFunction diff = psi[k];
            diff -= prev[k];
            delta = std::max(delta, diff.c1_norm());
        }
        if (it > 1 && prev_delta > 0.0 && delta > 1e-14) {
            contraction = delta / prev_delta;
            if (contraction > 0.5 && it > 3)
                throw std::runtime_error("solve_coupled: contraction factor exceeds 1/2");
        }
        if (delta < tol || t == 0.0) return {psi, cs, it, contraction};
        prev_delta = delta;
    }
    throw std::runtime_error("solve_coupled: no convergence within max_iter");
}

}  // namespace rmt::masterop
