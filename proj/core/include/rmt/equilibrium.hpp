#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rmt::equilibrium {

/// Confining potential with first and second derivatives and a convexity floor.
struct Potential {
    std::function<double(double)> W;
    std::function<double(double)> dW;
    std::function<double(double)> d2W;
    double c0 = 0.0;  ///< lower bound for W'' on the working interval
    double M = 6.0;   ///< working half-width: everything happens in [-M, M]

    /// Samples W'' on 512 points of [-M, M] and records the measured floor.
    /// Throws if the potential is not uniformly convex there.
    void validate();

    static Potential quadratic(double half_coeff = 0.5, double M = 6.0);
    /// Polynomial potential from monomial coefficients c[0] + c[1] x + ...
    static Potential polynomial(std::vector<double> coeffs, double M = 6.0);
};

/// One-cut equilibrium measure: density rho(x) = d(x) sqrt((x-a)(b-x)) on [a,b].
/// Internally carried by the Chebyshev-T coefficients of the rescaled effective
/// potential derivative v(x) = 2 W_eff'(x)/beta on [a,b] ("ucoef"), from which
/// the analytic factor d, the Stieltjes transform, and the CDF follow in closed form.
class EquilibriumMeasure {
public:
    EquilibriumMeasure() = default;
    EquilibriumMeasure(double a, double b, std::vector<double> ucoef, int beta);

    /// Builds the semicircle on [-2,2] (the beta-independent GVE limit law).
    static EquilibriumMeasure semicircle();

    /// Builds a measure from a density factor sampled on the support:
    /// dval(x) must be the analytic factor of rho = dval * sqrt((x-a)(b-x)).
    static EquilibriumMeasure from_density_factor(
        double a, double b, const std::function<double(double)>& dval, int beta,
        int ncheb = 128);

    double a_end() const { return a_; }
    double b_end() const { return b_; }
    int beta() const { return beta_; }
    const std::vector<double>& ucoef() const { return ucoef_; }
    /// Chebyshev-T coefficients of d(x) on [a,b].
    const std::vector<double>& dcoef() const { return dcoef_; }

    double density(double x) const;   ///< 0 outside [a,b]
    double dfactor(double x) const;   ///< analytic factor d(x), valid near [a,b]
    double mass() const;              ///< integral of the density (1 at equilibrium)

    /// Principal-value integral of rho(y)/(x-y) for x inside the support.
    double hilbert(double x) const;
    /// Stieltjes transform G(z) = int rho(y)/(z-y) dy, z off the support.
    std::complex<double> stieltjes(std::complex<double> z) const;
    double stieltjes_real(double x) const;  ///< real x strictly outside [a,b]

    double cdf(double x) const;
    double quantile(double q) const;  ///< q in (0,1), solved to 1e-10
    std::vector<double> quantiles(const std::vector<double>& qs) const;

    /// Writes "x,rho" pairs on a uniform grid (CSV export format).
    void write_density_csv(std::ostream& os, int npoints = 512) const;
    std::string to_json() const;

private:
    double a_ = -2.0, b_ = 2.0;
    int beta_ = 2;
    std::vector<double> ucoef_;   // T-coeffs of v(x) on [a,b]
    std::vector<double> dcoef_;   // T-coeffs of d(x) on [a,b]
    std::vector<double> ucoef_u_; // U-basis coefficients of v (derived)
    void finish_init();
};

struct OnecutOptions {
    int ncheb_init = 64;
    int ncheb_max = 2048;
    double tail_tol = 1e-12;     ///< relative tail threshold for resolving v
    double newton_tol = 1e-13;
    int newton_max_iter = 80;
};

/// Solves the two one-cut endpoint conditions for a uniformly convex potential
/// and returns the equilibrium measure. Throws on Newton failure, on support
/// escaping (-M, M), and on a density factor that is not strictly positive.
EquilibriumMeasure solve_onecut(const Potential& W, int beta, double M,
                                const OnecutOptions& opt = {});

/// Self-consistent equilibrium: fixed point of
///   mu -> solve_onecut(W - correction(mu)).
/// The correction factory receives the current measure and returns the additive
/// correction x -> corr(x) (to be subtracted from W). Damping 0.5 on the
/// correction between sweeps; convergence when endpoints move < tol.
struct SelfConsistentResult {
    EquilibriumMeasure measure;
    int iterations = 0;
    double final_shift = 0.0;
};
SelfConsistentResult self_consistent(
    const Potential& W, int beta, double M,
    const std::function<std::function<double(double)>(const EquilibriumMeasure&)>&
        correction,
    double tol = 1e-9, int max_iter = 200);

}  // namespace rmt::equilibrium
