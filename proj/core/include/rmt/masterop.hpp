#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rmt/equilibrium.hpp"

namespace rmt::masterop {

/// Function on a Chebyshev grid (second kind, ascending) over [lo,hi] with
/// barycentric evaluation and spectral differentiation.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(double lo, double hi, std::vector<double> vals);
    static GridFunction zero(double lo, double hi, int n);
    static GridFunction sample(double lo, double hi, int n,
                               const std::function<double(double)>& f);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    int size() const { return static_cast<int>(vals_.size()); }
    const std::vector<double>& values() const { return vals_; }
    std::vector<double>& values() { return vals_; }
    const std::vector<double>& nodes() const { return xs_; }

    double operator()(double x) const;
    GridFunction derivative() const;
    std::vector<double> cheb_coeffs() const;

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(double s);
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    double max_abs() const;
    /// C1 grid norm: max |f| + max |f'| over the nodes.
    double c1_norm() const;

private:
    double lo_ = -1.0, hi_ = 1.0;
    std::vector<double> vals_, xs_, bw_;
};

/// Bivariate function on a tensor Chebyshev grid.
class GridFunction2 {
public:
    GridFunction2() = default;
    GridFunction2(double lo, double hi, int n);  // zero, square grid
    static GridFunction2 sample(double lo, double hi, int n,
                                const std::function<double(double, double)>& f);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    int size() const { return n_; }
    double& at(int i, int j) { return vals_[i * n_ + j]; }
    double at(int i, int j) const { return vals_[i * n_ + j]; }
    const std::vector<double>& nodes() const { return xs_; }

    double operator()(double x, double y) const;
    /// Column x -> f(x, y_j) as a GridFunction in x.
    GridFunction column(int j) const;
    void set_column(int j, const GridFunction& g);
    /// Partial derivative in the first argument, evaluated at (x, y).
    double d1(double x, double y) const;
    /// Partial derivative in the second argument, evaluated at (x, y).
    double d2(double x, double y) const;
    /// Tensor Chebyshev coefficients c[p*n+q] with f = sum c_pq T_p(sx) T_q(sy).
    std::vector<double> cheb_coeffs2() const;
    double max_abs() const;

private:
    double lo_ = -1.0, hi_ = 1.0;
    int n_ = 0;
    std::vector<double> vals_, xs_, bw_;
};

/// The linearized stationarity operator
///   Xi f(x) = -beta int (f(x)-f(y))/(x-y) dmu(y) + W_eff'(x) f(x).
/// mu must be the (near-)equilibrium measure associated with W_eff.
struct MasterOperator {
    equilibrium::EquilibriumMeasure mu;
    GridFunction weff_prime;  ///< on the operator's grid interval
    int beta = 2;
    double grid_lo = 0.0, grid_hi = 0.0;
    int n_grid = 128;

    /// Builds the operator with the default grid [a - 0.5(b-a), b + 0.5(b-a)].
    static MasterOperator make(const equilibrium::EquilibriumMeasure& mu,
                               const std::function<double(double)>& weff_prime,
                               int n_grid = 128);
};

GridFunction apply_xi(const MasterOperator& op, const GridFunction& f);

struct InvertResult {
    GridFunction psi;
    double c_g = 0.0;
    double residual = 0.0;  ///< sup-norm of Xi psi - (g + c_g) over the grid
};

/// Solves Xi psi = g + c_g for the unique constant c_g making the singular
/// integral equation solvable; psi extended off the support by the asymptotic
/// pointwise formula psi(x) = (g + c_g - beta int psi rho /(x-y)) / (W_eff' - beta G).
InvertResult invert_xi(const MasterOperator& op, const GridFunction& g,
                       double tol = 1e-10, int max_refine = 6);

/// Coupled d-tuple system (the bold-Xi operator):
///   Xi_k psi_k - 2t sum_l int psi_l(y) K_{kl}(y, x) dmu_l(y) = g_k + c_k.
/// Solved by fixed-point iteration from 0; the measured contraction ratio must
/// stay below 1/2 or the solve aborts.
struct CoupledResult {
    std::vector<GridFunction> psi;
    std::vector<double> c;
    int iterations = 0;
    double contraction = 0.0;  ///< measured ratio of successive increments
};

using Kernel2 = std::function<double(double, double)>;

CoupledResult solve_coupled(const std::vector<MasterOperator>& ops,
                            const std::vector<std::vector<Kernel2>>& coupling,
                            double t, const std::vector<GridFunction>& g,
                            double tol = 1e-10, int max_iter = 500);

}  // namespace rmt::masterop
