#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "rmt/ncalg.hpp"

namespace rmt::ensemble {

/// Deterministic RNG: mt19937_64 (fully specified by the standard) with
/// uniforms mapped through the top 53 bits and Box-Muller normals. No
/// std::*_distribution, so streams are reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0);
    uint64_t next();
    double uniform();  ///< in [0, 1)
    double normal();

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives a child seed for an independent stream (splitmix64 mixing).
uint64_t derive_seed(uint64_t seed, uint64_t stream);

struct EigenConfig {
    int d = 1, N = 0, beta = 2;
    uint64_t seed = 0;
    std::string model;
    std::vector<std::vector<double>> lambdas;  ///< rows sorted ascending

    void write_csv(std::ostream& os) const;
    std::string meta_json() const;
};

/// Dense GUE (beta=2) / GOE (beta=1) with entry covariance 1/N.
Eigen::MatrixXcd gue_matrix(Rng& rng, int N);
Eigen::MatrixXd goe_matrix(Rng& rng, int N);

/// Eigenvalues of a Hermitian (complex) or symmetric (real) matrix, ascending.
std::vector<double> eigenvalues(const Eigen::MatrixXcd& A);
std::vector<double> eigenvalues(const Eigen::MatrixXd& A);

/// Haar unitary / orthogonal matrices via QR with phase correction.
Eigen::MatrixXcd haar_unitary(Rng& rng, int N);
Eigen::MatrixXd haar_orthogonal(Rng& rng, int N);

/// Independent GVE samples; deterministic for fixed (seed, index).
std::vector<EigenConfig> sample_gve(int N, int beta, int count, uint64_t seed);

/// Evaluates an NC polynomial in x-letters (Kind::A -> X_i, Kind::B -> B_j)
/// on concrete matrices.
Eigen::MatrixXcd eval_poly(const ncalg::NCPoly& P, const std::vector<Eigen::MatrixXcd>& X,
                           const std::vector<Eigen::MatrixXcd>& B);

struct ModelSpec {
    int d = 1, m = 0, N = 64, beta = 2;
    /// Per-matrix confining potentials as monomial coefficients; empty means
    /// the GVE normalization (x^2/2 for beta=2, x^2/4 for beta=1).
    std::vector<std::vector<double>> W;
    ncalg::NCPoly V = ncalg::NCPoly::zero(1);  ///< interaction, x-letters
    double a = 0.0;
    std::vector<ncalg::NCPoly> P;  ///< perturbation polynomials, x-letters
    double eps = 0.0;
    std::vector<Eigen::MatrixXcd> B;  ///< fixed external matrices, ||B|| <= 1
    double Mcut = 6.0;

    bool quadratic_gve_W() const;
    void validate() const;
};

/// Diagonal external matrix family: equispaced spectrum in [-1, 1].
Eigen::MatrixXcd builtin_b_matrix(int N);

/// Y_i = X_i + eps P_i(X_1..X_d, B_1..B_m) on fresh GVE input matrices.
/// eps = 0 reproduces sample_gve bit-for-bit for the same seed.
std::vector<EigenConfig> sample_polynomial_model(const ModelSpec& spec, int count,
                                                 uint64_t seed);

struct McmcOptions {
    long steps = 20000;
    long burn_in = 5000;
    int thin = 20;
    double target_accept = 0.3;
    int max_N = 128;  ///< cost guard for the generic proposal path
    bool allow_fast_path = true;
};

struct McmcResult {
    std::vector<EigenConfig> configs;
    /// traces[s][j] = (1/N) Re Tr probe_j at retained sample s
    std::vector<std::vector<double>> traces;
    double acceptance = 0.0;
    double proposal_scale = 0.0;
    std::string warning;
};

/// Metropolis sampler for the joint interacting matrix law
///   exp(N^{2-r} Tr^{(x)r} aV - N sum_k Tr W_k(X_k)) 1_{||X|| <= M}.
/// Generic path: full-matrix Gaussian proposals with Robbins-Monro tuned
/// scale. When every W_k is the GVE quadratic, a partial-refresh proposal
/// leaves the Gaussian factor invariant and the ratio involves only the
/// V term, which lifts the cost guard to larger N.
McmcResult mcmc_joint_law(const ModelSpec& spec, const McmcOptions& opt, uint64_t seed,
                          const std::vector<ncalg::NCPoly>& probes = {});

/// Exact sampler for the Gaussian bilinear model (d=2, W_k = x^2/2, beta=2,
/// V = (x1 x2 + x2 x1)/2, coupling a): X1, X2 are jointly Gaussian and can be
/// drawn directly. Returns per-sample probe traces (1/N) Re Tr p.
std::vector<std::vector<double>> sample_gaussian_bilinear(
    int N, double a, int count, uint64_t seed, const std::vector<ncalg::NCPoly>& probes);

/// Mean-field log-gas MCMC on eigenvalue configurations:
///   prod |l_i - l_j|^beta exp(-N sum W(l_i) + t sum_{ij} phi(l_i, l_j)).
/// Single-site Metropolis with exact energy differences.
struct LogGasOptions {
    int sweeps = 4000;
    int burn_in = 1000;
    int thin = 10;
    double step = 0.0;  ///< 0: auto, tuned toward ~30% acceptance in burn-in
};
std::vector<EigenConfig> sample_loggas_meanfield(
    const std::vector<double>& Wcoeffs, int beta, int N, double t,
    const std::function<double(double, double)>& phi, double Mcut,
    const LogGasOptions& opt, uint64_t seed);

}  // namespace rmt::ensemble
