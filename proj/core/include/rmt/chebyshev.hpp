#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace rmt::cheb {

/// Chebyshev points of the second kind on [lo,hi], ascending (x_0 = lo, x_{n-1} = hi).
std::vector<double> points(int n, double lo, double hi);

/// Gauss-Chebyshev quadrature of the second kind: nodes t_q in (-1,1) and weights w_q
/// such that  int_{-1}^{1} f(t) sqrt(1-t^2) dt ~ sum w_q f(t_q),  exact for deg f <= 2m-1.
void gauss_chebyshev_u(int m, std::vector<double>& t, std::vector<double>& w);

/// Chebyshev-T coefficients from values at points(n, -1, 1) (ascending order).
std::vector<double> vals_to_coeffs(const std::vector<double>& vals);

/// Values at points(n, -1, 1) from Chebyshev-T coefficients.
std::vector<double> coeffs_to_vals(const std::vector<double>& coef);

/// Clenshaw evaluation of sum c_k T_k(t).
double eval_t_series(const std::vector<double>& coef, double t);

/// Clenshaw evaluation of sum c_k U_k(t).
double eval_u_series(const std::vector<double>& coef, double t);

/// Coefficients of the derivative: if f = sum c_k T_k(t), returns coefficients of f'
/// with respect to t (apply 2/(hi-lo) chain factor for a mapped interval).
std::vector<double> derivative_coeffs(const std::vector<double>& coef);

/// Rewrites sum_{k>=0} c_k T_k as sum_{k>=0} w_k U_k.
std::vector<double> t_to_u_basis(const std::vector<double>& coef);

/// Joukowski-type map J(s) = s - sqrt(s^2-1) with the branch |J| <= 1 off [-1,1].
std::complex<double> joukowski_inverse(std::complex<double> s);
double joukowski_inverse(double s); // |s| >= 1

/// Barycentric weights for the second-kind grid (ascending), n >= 2.
std::vector<double> barycentric_weights(int n);

/// Barycentric interpolation at x given nodes xs (ascending second-kind grid on [lo,hi]).
double barycentric_eval(const std::vector<double>& xs, const std::vector<double>& vals,
                        const std::vector<double>& w, double x);

/// Fixed-order Gauss-Legendre rule on [lo,hi] (orders 8 and 16 supported).
void gauss_legendre(int m, double lo, double hi,
                    std::vector<double>& x, std::vector<double>& w);

}  // namespace rmt::cheb
