#include "rmt/chebyshev.hpp"

#include <cmath>
#include <stdexcept>

namespace rmt::cheb {

std::vector<double> points(int n, double lo, double hi) {
    if (n < 2) throw std::invalid_argument("cheb::points: need n >= 2");
    std::vector<double> x(n);
    const double c = 0.5 * (lo + hi), e = 0.5 * (hi - lo);
    for (int j = 0; j < n; ++j)
        x[j] = c - e * std::cos(M_PI * j / (n - 1));
    x[0] = lo;
    x[n - 1] = hi;
    return x;
}

void gauss_chebyshev_u(int m, std::vector<double>& t, std::vector<double>& w) {
    t.resize(m);
    w.resize(m);
    for (int q = 1; q <= m; ++q) {
        const double th = M_PI * q / (m + 1);
        t[q - 1] = std::cos(th);
        w[q - 1] = M_PI / (m + 1) * std::sin(th) * std::sin(th);
    }
}

std::vector<double> vals_to_coeffs(const std::vector<double>& vals) {
    const int n = static_cast<int>(vals.size());
    if (n == 1) return {vals[0]};
    const int m = n - 1;
    std::vector<double> c(n, 0.0);
    // vals[j] is at t_j = -cos(pi j / m); T_k(t_j) = (-1)^k cos(k pi j / m)
    for (int k = 0; k <= m; ++k) {
        double acc = 0.0;
        for (int j = 0; j <= m; ++j) {
            double vj = vals[j] * std::cos(M_PI * k * j / m);
            if (j == 0 || j == m) vj *= 0.5;
            acc += vj;
        }
        c[k] = ((k % 2) ? -1.0 : 1.0) * 2.0 * acc / m;
    }
    c[0] *= 0.5;
    c[m] *= 0.5;
    return c;
}

std::vector<double> coeffs_to_vals(const std::vector<double>& coef) {
    const int n = static_cast<int>(coef.size());
    std::vector<double> vals(n);
    const int m = n - 1;
    if (m == 0) return {coef[0]};
    for (int j = 0; j <= m; ++j) {
        const double t = -std::cos(M_PI * j / m);
        vals[j] = eval_t_series(coef, t);
    }
    return vals;
}

double eval_t_series(const std::vector<double>& coef, double t) {
    const int n = static_cast<int>(coef.size());
    if (n == 0) return 0.0;
    double b1 = 0.0, b2 = 0.0;
    for (int k = n - 1; k >= 1; --k) {
        const double b0 = 2.0 * t * b1 - b2 + coef[k];
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + coef[0];
}

double eval_u_series(const std::vector<double>& coef, double t) {
    const int n = static_cast<int>(coef.size());
    if (n == 0) return 0.0;
    double b1 = 0.0, b2 = 0.0;
    for (int k = n - 1; k >= 0; --k) {
        const double b0 = 2.0 * t * b1 - b2 + coef[k];
        b2 = b1;
        b1 = b0;
    }
    return b1;
}

std::vector<double> derivative_coeffs(const std::vector<double>& coef) {
    const int n = static_cast<int>(coef.size());
    if (n <= 1) return {0.0};
    std::vector<double> d(n + 1, 0.0);
    for (int k = n - 1; k >= 1; --k)
        d[k - 1] = d[k + 1] + 2.0 * k * coef[k];
    d[0] *= 0.5;
    d.resize(n - 1);
    return d;
}

std::vector<double> t_to_u_basis(const std::vector<double>& coef) {
    const int n = static_cast<int>(coef.size());
    std::vector<double> w(n, 0.0);
    if (n == 0) return w;
    // T_0 = U_0, T_1 = U_1/2, T_m = (U_m - U_{m-2})/2 for m >= 2
    for (int m = 0; m < n; ++m) {
        const double c = coef[m];
        if (m == 0) {
            w[0] += c;
        } else {
            w[m] += 0.5 * c;
            if (m >= 2) w[m - 2] -= 0.5 * c;
        }
    }
    return w;
}

std::complex<double> joukowski_inverse(std::complex<double> s) {
    // branch with |J| <= 1 for s off [-1,1]
    const std::complex<double> r = std::sqrt(s - 1.0) * std::sqrt(s + 1.0);
    std::complex<double> j = s - r;
    if (std::abs(j) > 1.0) j = s + r;
    return j;
}

double joukowski_inverse(double s) {
    const double as = std::abs(s);
    if (as < 1.0) throw std::invalid_argument("joukowski_inverse: |s| < 1");
    const double j = 1.0 / (as + std::sqrt(as * as - 1.0));
    return s > 0 ? j : -j;
}

std::vector<double> barycentric_weights(int n) {
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) {
        w[j] = (j % 2 == 0) ? 1.0 : -1.0;
        if (j == 0 || j == n - 1) w[j] *= 0.5;
    }
    return w;
}

double barycentric_eval(const std::vector<double>& xs, const std::vector<double>& vals,
                        const std::vector<double>& w, double x) {
    const int n = static_cast<int>(xs.size());
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
        const double diff = x - xs[j];
        if (diff == 0.0) return vals[j];
        const double q = w[j] / diff;
        num += q * vals[j];
        den += q;
    }
    return num / den;
}

namespace {
// 8- and 16-point Gauss-Legendre nodes/weights on [-1,1] (positive half; symmetric).
const double GL8_X[4] = {0.1834346424956498, 0.5255324099163290,
                         0.7966664774136267, 0.9602898564975363};
const double GL8_W[4] = {0.3626837833783620, 0.3137066458778873,
                         0.2223810344533745, 0.1012285362903763};
const double GL16_X[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                          0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                          0.9445750230732326, 0.9894009349916499};
const double GL16_W[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                          0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                          0.0622535239386479, 0.0271524594117541};
}  // namespace

void gauss_legendre(int m, double lo, double hi,
                    std::vector<double>& x, std::vector<double>& w) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    x.clear();
    w.clear();
    const double* X;
    const double* W;
    int half;
    if (m == 8) { X = GL8_X; W = GL8_W; half = 4; }
    else if (m == 16) { X = GL16_X; W = GL16_W; half = 8; }
    else throw std::invalid_argument("gauss_legendre: only orders 8 and 16");
    for (int i = half - 1; i >= 0; --i) { x.push_back(c - h * X[i]); w.push_back(h * W[i]); }
    for (int i = 0; i < half; ++i) { x.push_back(c + h * X[i]); w.push_back(h * W[i]); }
}

}  // namespace rmt::cheb
