#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rmt/ncalg.hpp"

namespace rmt::sdengine {

using ncalg::cplx;
using ncalg::NCPoly;
using ncalg::Word;

/// Smallness certificate delta_{xi,zeta}(V):
///   8/(xi-1) + sum |<V_beta,q>| (sum_j deg_u q_j) [sum_l xi^{deg_u q_l} zeta^{deg_ab q_l}]
/// with V_beta = (1 + 1_{beta=1}) V. Requires xi > 1.
double smallness_delta(const NCPoly& V, int beta, double xi, double zeta);

struct SDProblem {
    NCPoly V = NCPoly::zero(1);  ///< interaction, Laurent letters, self-adjoint
    int beta = 2;
    double a = 0.0;  ///< coupling in front of V
    ncalg::StateAB tau1;
    int d = 1;  ///< number of conjugated matrix letters
    int D_max = 8;
    int n_max = 12;
    double xi = 8.0, zeta = 1.0;
    /// Gauge for certifying the Neumann inversion: |tau(w)| <= zeta^deg_ab
    /// for any contraction state once zeta dominates the spectral radius of
    /// the a_i, so residuals measured at (1, psi_zeta) bound every downstream
    /// evaluation error.
    double psi_xi = 1.0, psi_zeta = 2.0;
    /// Degree cap for the Neumann iterates; 0 derives D_max + 2 max(2, deg V).
    /// The capped tail is certified by the residual check.
    int psi_deg_cap = 0;
    bool strict_delta = false;  ///< throw instead of warn when the certificate fails

    /// Validates self-adjointness, rank, tensor symmetry, and the smallness
    /// certificate. When strict_delta is false a failed certificate is recorded
    /// (delta_ok() on the solver) rather than fatal: the paper's bound is a
    /// sufficient condition only, and measured convergence governs in practice.
    void validate() const;
};

struct FreeEnergy {
    double F0 = 0.0, F1 = 0.0, F2 = 0.0;
    double err0 = 0.0, err1 = 0.0, err2 = 0.0;  ///< 16- vs 8-node quadrature gap
};

struct SDSolution {
    std::vector<ncalg::LinearForm> tau_series;
    ncalg::LinearForm tau10, tau11, tau12;
    std::map<std::pair<Word, Word>, cplx> tau20;
    /// Non-empty when the 1/N corrections could not be certified at the
    /// requested coupling (Neumann inversion outside its contract).
    std::string correction_warning;
    FreeEnergy free_energy;
    double delta = 0.0;
    bool delta_ok = false;
    double catalan_D = 0.0;
    bool series_warning = false;  ///< |a| * 4 * catalan_D >= 1
    std::string to_json() const;
};

/// Solver for the limiting Schwinger-Dyson equations: the state as a power
/// series in the coupling, the 1/N corrections, and the free energy terms.
/// Evaluations are memoized per order and per canonical word; words whose
/// cyclic deg_u exceeds D_max are truncated to zero (documented truncation
/// of the stored linear forms).
class SdSolver {
public:
    explicit SdSolver(SDProblem prob);

    const SDProblem& problem() const { return prob_; }
    int rank() const { return prob_.V.rank(); }
    bool delta_ok() const { return delta_ok_; }
    double delta() const { return delta_; }

    /// Coefficient tau_n of the coupling series, on a single word.
    cplx tau_n(int n, const Word& w);
    cplx tau_n(int n, const NCPoly& p);
    /// As tau_n but without canonicalizing the top-level word (children are
    /// still canonical): used to exercise traciality as a theorem, not a
    /// container property.
    cplx tau_n_raw(int n, const Word& w);

    /// tau_10^{uV}(w) = sum_n u^n tau_n(w); u defaults to the problem coupling.
    cplx tau10(const Word& w) { return tau10_at(prob_.a, w); }
    cplx tau10_at(double u, const Word& w);
    cplx tau10_at(double u, const NCPoly& p);

    /// Neumann inversion of Psi = Id + T-bar + P-bar + Q-bar at coupling u.
    /// Throws if 200 terms do not reach the tolerance or the residual exceeds
    /// 1e-9 relative.
    NCPoly invert_psi(const NCPoly& g, double u);
    NCPoly invert_psi(const NCPoly& g) { return invert_psi(g, prob_.a); }
    /// Norms of the successive Neumann increments of the last invert_psi call.
    const std::vector<double>& last_neumann_norms() const { return neumann_norms_; }

    /// Master operator applications at coupling u with state tau_10^{uV}
    /// (the building blocks of Psi; exposed for property tests).
    NCPoly apply_Tbar(const NCPoly& p, double u);
    NCPoly apply_Pbar(const NCPoly& p, double u);
    NCPoly apply_Qbar(const NCPoly& p, double u);
    NCPoly apply_Sbar(const NCPoly& p, double u);  ///< rank-2 output

    cplx tau11(const Word& w) { return tau11_at(prob_.a, w); }
    cplx tau11_at(double u, const Word& w);
    cplx tau20(const Word& p, const Word& q) { return tau20_at(prob_.a, p, q); }
    cplx tau20_at(double u, const Word& p, const Word& q);
    cplx tau12(const Word& w) { return tau12_at(prob_.a, w); }
    cplx tau12_at(double u, const Word& w);

    FreeEnergy free_energy();

    /// Fitted D with ||tau_n|| <= C_n D^n over the evaluated words.
    double catalan_D() const;
    /// Restricted dual norm of tau_n over the memoized words.
    double tau_n_norm(int n) const;

    /// Runs the series on the probe words and packages the solution.
    SDSolution solve(const std::vector<Word>& probes);

private:
    SDProblem prob_;
    double delta_ = 0.0;
    bool delta_ok_ = false;
    NCPoly Vbeta_;  // (1 + 1_{beta=1}) V
    struct VTerm {
        std::vector<Word> q;                // tensor factors
        cplx coeff;
        std::vector<std::vector<NCPoly>> dq;  // dq[i-1][l]: D_i q_l
    };
    std::vector<VTerm> vterms_;
    std::vector<std::map<Word, cplx>> memo_;            // per order
    std::map<Word, NCPoly> lap_cache_;                  // laplacian_bar per word
    std::map<std::pair<Word, double>, NCPoly> psi_cache_;
    std::vector<double> neumann_norms_;
    NCPoly invert_psi_cached(const Word& w, double u);

    const NCPoly& lap_bar(const Word& w);
    cplx eval_series_poly(double u, const NCPoly& p);
};

}  // namespace rmt::sdengine
