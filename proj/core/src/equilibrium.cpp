#include "rmt/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rmt/chebyshev.hpp"

namespace rmt::equilibrium {

namespace {

double horner(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (size_t k = 1; k < c.size(); ++k) d.push_back(k * c[k]);
    if (d.empty()) d.push_back(0.0);
    return d;
}

}  // namespace

void Potential::validate() {
    if (!W || !dW || !d2W) throw std::invalid_argument("Potential: missing callables");
    double floor = 1e300;
    for (int i = 0; i < 512; ++i) {
        const double x = -M + 2.0 * M * i / 511.0;
        floor = std::min(floor, d2W(x));
    }
    if (floor <= 0.0)
        throw std::invalid_argument("Potential: not uniformly convex on [-M, M]");
    c0 = floor;
}

Potential Potential::quadratic(double half_coeff, double M) {
    Potential p;
    const double q = half_coeff;
    p.W = [q](double x) { return q * x * x; };
    p.dW = [q](double x) { return 2.0 * q * x; };
    p.d2W = [q](double) { return 2.0 * q; };
    p.M = M;
    p.validate();
    return p;
}

Potential Potential::polynomial(std::vector<double> coeffs, double M) {
    Potential p;
    auto d1 = poly_derivative(coeffs);
    auto d2 = poly_derivative(d1);
    p.W = [c = std::move(coeffs)](double x) { return horner(c, x); };
    p.dW = [c = std::move(d1)](double x) { return horner(c, x); };
    p.d2W = [c = std::move(d2)](double x) { return horner(c, x); };
    p.M = M;
    p.validate();
    return p;
}

EquilibriumMeasure::EquilibriumMeasure(double a, double b, std::vector<double> ucoef,
                                       int beta)
    : a_(a), b_(b), beta_(beta), ucoef_(std::move(ucoef)) {
    finish_init();
}

void EquilibriumMeasure::finish_init() {
    if (b_ <= a_) throw std::invalid_argument("EquilibriumMeasure: b <= a");
    const double e = 0.5 * (b_ - a_);
    // d(s) = (1/(2 pi e)) sum_{k>=1} u_k U_{k-1}(s)
    std::vector<double> du(std::max<size_t>(ucoef_.size(), 2) - 1, 0.0);
    for (size_t k = 1; k < ucoef_.size(); ++k) du[k - 1] = ucoef_[k] / (2.0 * M_PI * e);
    ucoef_u_ = du;
    const int n = std::max<int>(8, static_cast<int>(du.size()) + 1);
    std::vector<double> vals(n);
    for (int j = 0; j < n; ++j) {
        const double t = -std::cos(M_PI * j / (n - 1));
        vals[j] = cheb::eval_u_series(du, t);
    }
    dcoef_ = cheb::vals_to_coeffs(vals);
}

EquilibriumMeasure EquilibriumMeasure::semicircle() {
    return EquilibriumMeasure(-2.0, 2.0, {0.0, 2.0}, 2);
}

EquilibriumMeasure EquilibriumMeasure::from_density_factor(
    double a, double b, const std::function<double(double)>& dval, int beta, int ncheb) {
    const double c = 0.5 * (a + b), e = 0.5 * (b - a);
    std::vector<double> vals(ncheb);
    for (int j = 0; j < ncheb; ++j) {
        const double t = -std::cos(M_PI * j / (ncheb - 1));
        vals[j] = dval(c + e * t);
    }
    auto dco = cheb::vals_to_coeffs(vals);
    auto w = cheb::t_to_u_basis(dco);  // d = sum w_j U_j
    std::vector<double> u(w.size() + 1, 0.0);
    for (size_t j = 0; j < w.size(); ++j) u[j + 1] = 2.0 * M_PI * e * w[j];
    EquilibriumMeasure mu(a, b, u, beta);
    if (std::abs(mu.mass() - 1.0) > 1e-8)
        throw std::invalid_argument("from_density_factor: density does not integrate to 1");
    return mu;
}

double EquilibriumMeasure::dfactor(double x) const {
    const double c = 0.5 * (a_ + b_), e = 0.5 * (b_ - a_);
    return cheb::eval_u_series(ucoef_u_, (x - c) / e);
}

double EquilibriumMeasure::density(double x) const {
    if (x <= a_ || x >= b_) return 0.0;
    return dfactor(x) * std::sqrt((x - a_) * (b_ - x));
}

double EquilibriumMeasure::mass() const {
    const double e = 0.5 * (b_ - a_);
    return ucoef_.size() > 1 ? e * ucoef_[1] / 4.0 : 0.0;
}

double EquilibriumMeasure::hilbert(double x) const {
    const double c = 0.5 * (a_ + b_), e = 0.5 * (b_ - a_);
    const double s = (x - c) / e;
    // PV int rho(y)/(x-y) dy = (1/2) sum_{k>=1} u_k T_k(s)
    std::vector<double> tk(ucoef_);
    if (!tk.empty()) tk[0] = 0.0;
    return 0.5 * cheb::eval_t_series(tk, s);
}

std::complex<double> EquilibriumMeasure::stieltjes(std::complex<double> z) const {
    const double c = 0.5 * (a_ + b_), e = 0.5 * (b_ - a_);
    const std::complex<double> zeta = (z - c) / e;
    const std::complex<double> J = cheb::joukowski_inverse(zeta);
    std::complex<double> acc = 0.0, Jk = 1.0;
    for (size_t k = 1; k < ucoef_.size(); ++k) {
        Jk *= J;
        acc += ucoef_[k] * Jk;
    }
    return 0.5 * acc;
}

double EquilibriumMeasure::stieltjes_real(double x) const {
    const double c = 0.5 * (a_ + b_), e = 0.5 * (b_ - a_);
    const double s = (x - c) / e;
    const double J = cheb::joukowski_inverse(s);
    double acc = 0.0, Jk = 1.0;
    for (size_t k = 1; k < ucoef_.size(); ++k) {
        Jk *= J;
        acc += ucoef_[k] * Jk;
    }
    return 0.5 * acc;
}

double EquilibriumMeasure::cdf(double x) const {
    if (x <= a_) return 0.0;
    if (x >= b_) return 1.0;
    const double c = 0.5 * (a_ + b_), e = 0.5 * (b_ - a_);
    double t = (x - c) / e;
    t = std::clamp(t, -1.0, 1.0);
    const double phi = std::acos(t);
    double acc = 0.0;
    for (size_t k = 1; k < ucoef_.size(); ++k) {
        double Ik;
        if (k == 1)
            Ik = 0.5 * (M_PI - phi) + 0.25 * std::sin(2.0 * phi);
        else
            Ik = 0.5 * (std::sin((k + 1) * phi) / (k + 1) - std::sin((k - 1) * phi) / (k - 1));
        acc += ucoef_[k] * Ik;
    }
    return e * acc / (2.0 * M_PI);
}

double EquilibriumMeasure::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("quantile: q must be in (0,1)");
    double lo = a_, hi = b_;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < q) lo = mid; else hi = mid;
        if (hi - lo < 1e-13 * (b_ - a_)) break;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> EquilibriumMeasure::quantiles(const std::vector<double>& qs) const {
    std::vector<double> out;
    out.reserve(qs.size());
    for (double q : qs) out.push_back(quantile(q));
    return out;
}

void EquilibriumMeasure::write_density_csv(std::ostream& os, int npoints) const {
    os << "x,rho\n";
    char buf[80];
    for (int i = 0; i < npoints; ++i) {
        const double x = a_ + (b_ - a_) * i / (npoints - 1);
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", x, density(x));
        os << buf;
    }
}

std::string EquilibriumMeasure::to_json() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "{\"a\":" << num(a_) << ",\"b\":" << num(b_) << ",\"beta\":" << beta_
       << ",\"dcoef\":[";
    for (size_t i = 0; i < dcoef_.size(); ++i)
        os << (i ? "," : "") << num(dcoef_[i]);
    os << "],\"ucoef\":[";
    for (size_t i = 0; i < ucoef_.size(); ++i)
        os << (i ? "," : "") << num(ucoef_[i]);
    os << "]}";
    return os.str();
}

namespace {

/// T-coefficients of v(x) = 2 W'(x)/beta on [c-e, c+e].
std::vector<double> vcoeffs(const Potential& W, int beta, double c, double e, int n) {
    std::vector<double> vals(n);
    for (int j = 0; j < n; ++j) {
        const double t = -std::cos(M_PI * j / (n - 1));
        vals[j] = 2.0 * W.dW(c + e * t) / beta;
    }
    return cheb::vals_to_coeffs(vals);
}

struct Resid {
    double r0, r1;
    double norm() const { return std::abs(r0) + std::abs(r1); }
};

Resid onecut_resid(const Potential& W, int beta, double c, double e, int n) {
    auto u = vcoeffs(W, beta, c, e, n);
    return {u[0], e * u[1] - 4.0};
}

}  // namespace

EquilibriumMeasure solve_onecut(const Potential& W, int beta, double M,
                                const OnecutOptions& opt) {
    if (beta != 1 && beta != 2) throw std::invalid_argument("solve_onecut: beta must be 1 or 2");
    // center seed: minimizer of W by Newton
    double c = 0.0;
    for (int it = 0; it < 100; ++it) {
        const double step = W.dW(c) / W.d2W(c);
        c -= step;
        if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(c))) break;
    }
    double e = 2.0 / std::sqrt(std::max(1e-12, 2.0 * W.d2W(c) / beta));

    int n = opt.ncheb_init;
    while (true) {
        // Newton on (c, e) for the two endpoint conditions
        bool converged = false;
        for (int it = 0; it < opt.newton_max_iter; ++it) {
            const Resid r = onecut_resid(W, beta, c, e, n);
            if (r.norm() < opt.newton_tol * std::max(1.0, std::abs(W.dW(c + e)))) {
                converged = true;
                break;
            }
            const double hc = 1e-7 * std::max(1.0, std::abs(c));
            const double he = 1e-7 * std::max(1.0, e);
            const Resid rc1 = onecut_resid(W, beta, c + hc, e, n);
            const Resid rc0 = onecut_resid(W, beta, c - hc, e, n);
            const Resid re1 = onecut_resid(W, beta, c, e + he, n);
            const Resid re0 = onecut_resid(W, beta, c, e - he, n);
            const double j00 = (rc1.r0 - rc0.r0) / (2 * hc), j01 = (re1.r0 - re0.r0) / (2 * he);
            const double j10 = (rc1.r1 - rc0.r1) / (2 * hc), j11 = (re1.r1 - re0.r1) / (2 * he);
            const double det = j00 * j11 - j01 * j10;
            if (std::abs(det) < 1e-300) throw std::runtime_error("solve_onecut: singular Jacobian");
            double dc = -(j11 * r.r0 - j01 * r.r1) / det;
            double de = -(-j10 * r.r0 + j00 * r.r1) / det;
            // backtracking line search
            double step = 1.0;
            const double base = r.norm();
            for (int bt = 0; bt < 50; ++bt) {
                const double cn = c + step * dc, en = e + step * de;
                if (en > 1e-8 && onecut_resid(W, beta, cn, en, n).norm() < base) {
                    c = cn;
                    e = en;
                    break;
                }
                step *= 0.5;
                if (bt == 49) throw std::runtime_error("solve_onecut: Newton stalled");
            }
        }
        if (!converged) throw std::runtime_error("solve_onecut: endpoint Newton did not converge");
        // resolution check on v
        auto u = vcoeffs(W, beta, c, e, n);
        double umax = 0.0;
        for (double x : u) umax = std::max(umax, std::abs(x));
        double tail = std::max(std::abs(u[n - 1]), std::abs(u[n - 2]));
        if (tail <= opt.tail_tol * std::max(umax, 1e-30) || n >= opt.ncheb_max) {
            // trim negligible trailing coefficients
            size_t keep = u.size();
            while (keep > 2 && std::abs(u[keep - 1]) < 1e-14 * std::max(umax, 1e-30)) --keep;
            u.resize(keep);
            u[0] = 0.0;  // enforce the solved condition exactly
            EquilibriumMeasure mu(c - e, c + e, u, beta);
            if (!(mu.a_end() > -M && mu.b_end() < M))
                throw std::runtime_error("solve_onecut: support escapes (-M, M)");
            // strict positivity of the analytic factor
            double dmin = 1e300;
            for (int i = 0; i <= 256; ++i) {
                const double x = mu.a_end() + (mu.b_end() - mu.a_end()) * i / 256.0;
                dmin = std::min(dmin, mu.dfactor(x));
            }
            if (dmin <= 0.0)
                throw std::runtime_error(
                    "solve_onecut: density factor vanishes (not a regular one-cut measure)");
            return mu;
        }
        n *= 2;
    }
}

SelfConsistentResult self_consistent(
    const Potential& W, int beta, double M,
    const std::function<std::function<double(double)>(const EquilibriumMeasure&)>&
        correction,
    double tol, int max_iter) {
    // corrections are carried as Chebyshev series on [-M, M] so that repeated
    // blending does not build nested callables
    const int n = 256;
    auto xs = cheb::points(n, -M, M);
    std::vector<double> corr_vals(n, 0.0);

    EquilibriumMeasure mu = solve_onecut(W, beta, M);
    double a_prev = mu.a_end(), b_prev = mu.b_end();
    const double damping = 0.5;

    for (int it = 1; it <= max_iter; ++it) {
        auto corr = correction(mu);
        std::vector<double> target(n);
        for (int j = 0; j < n; ++j) target[j] = corr(xs[j]);
        const double mix = (it == 1) ? 1.0 : damping;
        for (int j = 0; j < n; ++j)
            corr_vals[j] = (1.0 - mix) * corr_vals[j] + mix * target[j];

        auto cco = cheb::vals_to_coeffs(corr_vals);
        auto c1 = cheb::derivative_coeffs(cco);
        auto c2 = cheb::derivative_coeffs(c1);
        const double scale = 2.0 / (2.0 * M);

        // convexity guard: measured curvature of the correction must stay below c0
        double corr_d2max = 0.0;
        for (int j = 0; j < n; ++j)
            corr_d2max = std::max(corr_d2max,
                                  std::abs(cheb::eval_t_series(c2, -std::cos(M_PI * j / (n - 1))) *
                                           scale * scale));
        if (corr_d2max >= W.c0)
            throw std::runtime_error("self_consistent: correction curvature exceeds convexity floor");

        Potential Weff;
        Weff.M = W.M;
        Weff.c0 = W.c0 - corr_d2max;
        Weff.W = [&W, cco, M](double x) {
            return W.W(x) - cheb::eval_t_series(cco, x / M);
        };
        Weff.dW = [&W, c1, M, scale](double x) {
            return W.dW(x) - cheb::eval_t_series(c1, x / M) * scale;
        };
        Weff.d2W = [&W, c2, M, scale](double x) {
            return W.d2W(x) - cheb::eval_t_series(c2, x / M) * scale * scale;
        };

        mu = solve_onecut(Weff, beta, M);
        const double shift = std::abs(mu.a_end() - a_prev) + std::abs(mu.b_end() - b_prev);
        a_prev = mu.a_end();
        b_prev = mu.b_end();
        if (shift < tol) return {mu, it, shift};
    }
    throw std::runtime_error("self_consistent: no convergence within max_iter");
}

}  // namespace rmt::equilibrium
