#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rmt/ensemble.hpp"
#include "rmt/sdengine.hpp"

using namespace rmt;
using ncalg::NCPoly;
using ncalg::StateAB;
using ncalg::Word;
using sdengine::SdSolver;
using sdengine::SDProblem;

namespace {

std::vector<double> semicircle_moments(int kmax) {
    // m_{2j} = Catalan(j), odd moments vanish
    std::vector<double> m(kmax, 0.0);
    std::vector<double> cat = {1};
    for (int j = 1; j <= kmax / 2 + 1; ++j)
        cat.push_back(cat.back() * 2.0 * (2.0 * j - 1.0) / (j + 1.0));
    for (int k = 1; k <= kmax; ++k)
        if (k % 2 == 0) m[k - 1] = cat[k / 2];
    return m;
}

std::vector<double> empirical_moments(const std::vector<double>& lam, int kmax) {
    std::vector<double> m(kmax, 0.0);
    for (double l : lam) {
        double p = 1.0;
        for (int k = 1; k <= kmax; ++k) {
            p *= l;
            m[k - 1] += p;
        }
    }
    for (double& v : m) v /= lam.size();
    return m;
}

/// V = (x1 x2 + x2 x1)/2 in Laurent letters.
NCPoly bilinear_V() {
    NCPoly V(1);
    V.add_term({Word::x_monomial({1, 2}), Word()}, 0.5);
    V.add_term({Word::x_monomial({2, 1}), Word()}, 0.5);
    return V;
}

SDProblem bilinear_problem(double a, int D_max = 8, int n_max = 6) {
    SDProblem prob;
    prob.V = bilinear_V();
    prob.beta = 2;
    prob.a = a;
    prob.d = 2;
    prob.D_max = D_max;
    prob.n_max = n_max;
    prob.tau1 = StateAB({semicircle_moments(48), semicircle_moments(48)});
    prob.xi = 8.0;
    prob.zeta = 2.0;  // spectral radius of the semicircle marginals
    return prob;
}

}  // namespace

TEST_CASE("smallness certificate values") {
    // V = 0: only the 8/(xi-1) term
    CHECK(sdengine::smallness_delta(NCPoly::zero(1), 2, 9.0, 1.0) == doctest::Approx(1.0));
    // hand evaluation: V = t u1 a1 u1^ b1, r=1, beta=1, xi=9, zeta=1
    const double t = 0.07;
    NCPoly V(1);
    V.add_term({Word::parse("u1 a1 u1^ b1"), Word()}, t);
    CHECK(sdengine::smallness_delta(V, 1, 9.0, 1.0) == doctest::Approx(1.0 + 324.0 * t));
    // the constant summand 8/(xi-1) decreases in xi (the interaction summand
    // carries xi^{deg_u} and grows; trading them off is what picking xi means)
    CHECK(sdengine::smallness_delta(NCPoly::zero(1), 2, 12.0, 1.0) <
          sdengine::smallness_delta(NCPoly::zero(1), 2, 9.0, 1.0));
    CHECK_THROWS(sdengine::smallness_delta(V, 1, 1.0, 1.0));
}

TEST_CASE("tau_0 is the law of free Haar unitaries") {
    auto prob = bilinear_problem(0.0);
    prob.V = NCPoly::zero(1);
    std::vector<std::vector<double>> mom = {{0.3, 1.2, 0.5, 2.0, 0.9, 3.1, 1.0, 4.0},
                                            {-0.2, 0.8, 0.1, 1.5, -0.3, 2.0, 0.2, 3.0}};
    prob.tau1 = StateAB(mom);
    SdSolver s(prob);
    CHECK(std::abs(s.tau_n(0, Word::parse("u1"))) < 1e-14);
    CHECK(std::abs(s.tau_n(0, Word::parse("u1 u2"))) < 1e-14);
    CHECK(s.tau_n(0, Word::x_monomial({1})).real() == doctest::Approx(0.3));
    // tau_0(u1 a1 u1^ a1) = tau_1(a1)^2 by freeness
    CHECK(s.tau_n(0, Word::parse("u1 a1 u1^ a1")).real() ==
          doctest::Approx(0.3 * 0.3).epsilon(1e-13));
    // x-words of a single letter reduce to plain moments
    CHECK(s.tau_n(0, Word::x_monomial({1, 1})).real() == doctest::Approx(1.2));
}

TEST_CASE("tau_0 against Haar-unitary Monte Carlo") {
    const int N = 200, samples = 40;
    // fixed diagonal A_i; tau_1 carries their exact empirical moments
    std::vector<double> a1(N), a2(N);
    for (int i = 0; i < N; ++i) {
        a1[i] = -1.0 + 2.0 * (i + 0.5) / N;
        a2[i] = std::cos(M_PI * (i + 0.5) / N);
    }
    SDProblem prob;
    prob.V = NCPoly::zero(1);
    prob.d = 2;
    prob.beta = 2;
    prob.tau1 = StateAB({empirical_moments(a1, 48), empirical_moments(a2, 48)});
    SdSolver s(prob);

    Eigen::MatrixXcd A1 = Eigen::MatrixXcd::Zero(N, N), A2 = A1;
    for (int i = 0; i < N; ++i) {
        A1(i, i) = a1[i];
        A2(i, i) = a2[i];
    }
    ensemble::Rng rng(20240517);
    const Word w = Word::x_monomial({1, 2, 1, 2});
    std::vector<double> vals(samples);
    for (int sI = 0; sI < samples; ++sI) {
        auto U1 = ensemble::haar_unitary(rng, N);
        auto U2 = ensemble::haar_unitary(rng, N);
        Eigen::MatrixXcd X1 = U1 * A1 * U1.adjoint();
        Eigen::MatrixXcd X2 = U2 * A2 * U2.adjoint();
        vals[sI] = ((X1 * X2 * X1 * X2).trace().real()) / N;
    }
    double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / samples;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (samples - 1);
    const double se = std::sqrt(var / samples) + 1e-3;  // 1e-3 floor for 1/N bias
    const double pred = s.tau_n(0, w).real();
    CHECK(std::abs(mean - pred) < 3.0 * se + 3.0 / N);
}

TEST_CASE("V = 0 gives a vanishing series beyond order zero") {
    auto prob = bilinear_problem(0.0);
    prob.V = NCPoly::zero(1);
    SdSolver s(prob);
    for (int n = 1; n <= 4; ++n) {
        CHECK(std::abs(s.tau_n(n, Word::x_monomial({1, 2}))) < 1e-14);
        CHECK(std::abs(s.tau_n(n, Word::x_monomial({1, 1, 2, 2}))) < 1e-14);
    }
}

TEST_CASE("bilinear model: hand-checked series coefficient") {
    // At fixed input state tau_1 the first-order coefficient on the x1 x2
    // word is exactly 1 (hand expansion of the recursion).
    auto prob = bilinear_problem(0.05, 12, 4);
    SdSolver s(prob);
    const Word w = Word::x_monomial({1, 2});
    CHECK(std::abs(s.tau_n(0, w)) < 1e-14);
    CHECK(s.tau_n(1, w).real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(s.tau_n(2, w)) < 1e-13);
}

TEST_CASE("bilinear model at fixed spectra vs importance-sampled Haar MC") {
    // The solved state is the unitary-integral limit at FIXED spectra. An
    // independent check: tilt Haar samples by exp(a N Tr V) via importance
    // sampling at moderate N and compare the reweighted trace.
    const int N = 32, samples = 30000;
    std::vector<double> a1(N), a2(N);
    for (int i = 0; i < N; ++i) {
        a1[i] = -1.0 + 2.0 * (i + 0.5) / N;
        a2[i] = std::cos(M_PI * (i + 0.5) / N);
    }
    SDProblem prob;
    prob.V = bilinear_V();
    prob.beta = 2;
    prob.d = 2;
    prob.D_max = 10;
    prob.n_max = 5;
    prob.tau1 = StateAB({empirical_moments(a1, 48), empirical_moments(a2, 48)});
    SdSolver s(prob);
    const Word w = Word::x_monomial({1, 2});

    Eigen::MatrixXcd A1 = Eigen::MatrixXcd::Zero(N, N), A2 = A1;
    for (int i = 0; i < N; ++i) {
        A1(i, i) = a1[i];
        A2(i, i) = a2[i];
    }
    ensemble::Rng rng(31415);
    std::vector<double> trv(samples);
    for (int sI = 0; sI < samples; ++sI) {
        auto U1 = ensemble::haar_unitary(rng, N);
        auto U2 = ensemble::haar_unitary(rng, N);
        Eigen::MatrixXcd X1 = U1 * A1 * U1.adjoint();
        Eigen::MatrixXcd X2 = U2 * A2 * U2.adjoint();
        trv[sI] = (X1 * X2).trace().real();
    }
    for (double a : {0.03, 0.06}) {
        double wsum = 0.0, vsum = 0.0, v2sum = 0.0;
        for (int sI = 0; sI < samples; ++sI) {
            const double wgt = std::exp(a * N * trv[sI]);
            wsum += wgt;
            vsum += wgt * trv[sI] / N;
            v2sum += wgt * trv[sI] * trv[sI] / (N * N);
        }
        const double mc = vsum / wsum;
        const double var = std::max(v2sum / wsum - mc * mc, 0.0);
        // effective sample size accounts for the weight spread
        double wsq = 0.0;
        for (int sI = 0; sI < samples; ++sI) {
            const double wgt = std::exp(a * N * trv[sI]);
            wsq += wgt * wgt;
        }
        const double ess = wsum * wsum / wsq;
        const double se = std::sqrt(var / std::max(ess, 1.0));
        const double pred = s.tau10_at(a, w).real();
        MESSAGE("a=", a, " IS-MC ", mc, " +- ", se, " (ess ", ess, ") vs series ", pred);
        CHECK(std::abs(pred - mc) < 4.0 * se + 6.0 / (N * N));
    }
}

TEST_CASE("exact Gaussian bilinear sampler matches its closed-form moment") {
    // Full-model check of the sampler itself: (1/N) E Tr X1 X2 = a/(1-a^2)
    // at every N for the jointly Gaussian pair.
    const double a = 0.04;
    const int N = 96, count = 400;
    std::vector<NCPoly> probes;
    probes.push_back(NCPoly::monomial(Word::parse("a1 a2")));  // matrix x-letters
    auto traces = ensemble::sample_gaussian_bilinear(N, a, count, 99, probes);
    double mean = 0.0;
    for (const auto& t : traces) mean += t[0];
    mean /= count;
    double var = 0.0;
    for (const auto& t : traces) var += (t[0] - mean) * (t[0] - mean);
    var /= (count - 1);
    const double se = std::sqrt(var / count);
    CHECK(std::abs(mean - a / (1.0 - a * a)) < 4.0 * se + 1e-4);
}

TEST_CASE("traciality of tau_n as a theorem") {
    auto prob = bilinear_problem(0.05, 10, 3);
    SdSolver s(prob);
    // rotations of the same cyclic word, evaluated without top canonicalization
    const Word w1 = Word::parse("u1 a1 u1^ u2 a2 u2^");
    const Word w2 = Word::parse("a1 u1^ u2 a2 u2^ u1");
    const Word w3 = Word::parse("u2 a2 u2^ u1 a1 u1^");
    for (int n = 0; n <= 3; ++n) {
        const auto v1 = s.tau_n_raw(n, w1), v2 = s.tau_n_raw(n, w2), v3 = s.tau_n_raw(n, w3);
        CHECK(std::abs(v1 - v2) < 1e-12);
        CHECK(std::abs(v1 - v3) < 1e-12);
    }
}

TEST_CASE("restriction to P depends only on single-letter moments") {
    auto prob = bilinear_problem(0.05, 8, 4);
    SdSolver s1(prob);
    // perturb the state off the P-relevant moments: override a mixed word
    auto prob2 = bilinear_problem(0.05, 8, 4);
    prob2.tau1.set_override(Word::parse("a1 a2"), 0.37);
    prob2.tau1.set_override(Word::parse("a1 a2 a1 a2"), -0.11);
    SdSolver s2(prob2);
    for (const auto& idx :
         std::vector<std::vector<int>>{{1, 2}, {1, 1, 2, 2}, {1, 2, 1, 2}}) {
        const Word w = Word::x_monomial(idx);
        for (int n = 0; n <= 3; ++n)
            CHECK(std::abs(s1.tau_n(n, w) - s2.tau_n(n, w)) < 1e-13);
    }
}

TEST_CASE("T-bar norm bound from the paper") {
    auto prob = bilinear_problem(0.0);
    prob.V = NCPoly::zero(1);
    std::vector<std::vector<double>> mom(2, std::vector<double>(48));
    for (int k = 1; k <= 48; ++k) {
        mom[0][k - 1] = (k % 2 == 0) ? 1.0 / (k + 1.0) : 0.0;  // uniform on [-1,1]
        mom[1][k - 1] = (k % 2 == 0) ? 1.0 / (k + 1.0) : 0.0;
    }
    prob.tau1 = StateAB(mom);
    SdSolver s(prob);
    const double xi = 9.0, zeta = 1.0;
    for (const char* ws : {"u1 a1 u1^ u2 a2 u2^", "u1 a1 a1 u1^ u2 a2 u2^ u1 a1 u1^",
                           "u1 u2 a2 u2^ a1 u1^"}) {
        NCPoly p = NCPoly::monomial(Word::parse(ws));
        const double lhs = ncalg::norm_xi_zeta(s.apply_Tbar(p, 0.0), xi, zeta);
        const double rhs = 8.0 / (xi - 1.0) * ncalg::norm_xi_zeta(p, xi, zeta);
        CHECK(lhs < rhs);
    }
}

TEST_CASE("invert_psi round trips and Neumann decay") {
    // V = 0: Psi = Id + T-bar, the chain dies after finitely many steps and
    // the round trip is exact to rounding
    SDProblem prob0;
    prob0.V = NCPoly::zero(1);
    prob0.beta = 2;
    prob0.d = 2;
    prob0.tau1 = StateAB({semicircle_moments(48), semicircle_moments(48)});
    SdSolver s0(prob0);
    NCPoly g(1);
    g.add_term({Word::x_monomial({1, 2, 1, 2}), Word()}, 1.0);
    g.add_term({Word::x_monomial({1, 1, 2}), Word()}, 0.4);
    NCPoly h = s0.invert_psi(g);
    NCPoly back = s0.apply_Tbar(h, 0.0);
    back = ncalg::proj(back);
    back += h;
    back -= ncalg::proj(g);
    CHECK(ncalg::norm_xi_zeta(back, 1.0, 2.5) < 1e-10 * ncalg::norm_xi_zeta(g, 1.0, 2.5));

    // probe whose Laplacian vanishes: Psi^{-1} g = g
    NCPoly ga = NCPoly::monomial(Word::parse("u1 a1"));
    NCPoly h0 = s0.invert_psi(ga);
    h0 -= ga;
    CHECK(h0.is_zero());

    // small-coupling interacting regime: geometric decay of the Neumann
    // increments; the certified round trip is the internal residual check
    auto prob = bilinear_problem(0.002, 8, 3);
    SdSolver s(prob);
    NCPoly gw = NCPoly::monomial(Word::x_monomial({1, 2}).cyclic_canonical());
    NCPoly hw = s.invert_psi(gw);
    const auto& norms = s.last_neumann_norms();
    REQUIRE(norms.size() >= 3);
    for (size_t j = 1; j + 1 < norms.size(); ++j) {
        if (norms[j - 1] < 1e-12) break;
        CHECK(norms[j] / norms[j - 1] < 0.5);
    }

    // outside the certified regime the inversion fails loudly instead of
    // returning an uncertified value
    auto probbig = bilinear_problem(0.2, 8, 3);
    SdSolver sbig(probbig);
    CHECK_THROWS(sbig.invert_psi(gw));
}

TEST_CASE("tau_11 vanishes at beta 2 and matches GOE Monte Carlo at beta 1") {
    auto prob = bilinear_problem(0.05, 8, 3);
    SdSolver s(prob);
    CHECK(s.tau11(Word::x_monomial({1, 2, 1, 2})) == ncalg::cplx(0.0));

    // beta = 1, V = 0: E Tr w(O_i A_i O_i^T) = N tau_0(w) + tau_11(w) + O(1/N)
    const int N = 128, samples = 1500;
    std::vector<double> a1(N), a2(N);
    for (int i = 0; i < N; ++i) {
        a1[i] = -1.0 + 2.0 * (i + 0.5) / N;
        a2[i] = std::cos(M_PI * (i + 0.5) / N);
    }
    SDProblem p1;
    p1.V = NCPoly::zero(1);
    p1.beta = 1;
    p1.d = 2;
    p1.tau1 = StateAB({empirical_moments(a1, 48), empirical_moments(a2, 48)});
    SdSolver sd(p1);
    const Word w = Word::x_monomial({1, 2, 1, 2});
    const double tau0 = sd.tau_n(0, w).real();
    const double t11 = sd.tau11(w).real();

    Eigen::MatrixXd A1 = Eigen::MatrixXd::Zero(N, N), A2 = A1;
    for (int i = 0; i < N; ++i) {
        A1(i, i) = a1[i];
        A2(i, i) = a2[i];
    }
    ensemble::Rng rng(777);
    std::vector<double> vals(samples);
    for (int sI = 0; sI < samples; ++sI) {
        Eigen::MatrixXd O1 = ensemble::haar_orthogonal(rng, N);
        Eigen::MatrixXd O2 = ensemble::haar_orthogonal(rng, N);
        Eigen::MatrixXd X1 = O1 * A1 * O1.transpose();
        Eigen::MatrixXd X2 = O2 * A2 * O2.transpose();
        vals[sI] = (X1 * X2 * X1 * X2).trace() - N * tau0;
    }
    double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / samples;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (samples - 1);
    const double se = std::sqrt(var / samples);
    MESSAGE("tau11 prediction ", t11, " vs MC ", mean, " +- ", se);
    CHECK(std::abs(mean - t11) < 4.0 * se + 10.0 / N);
}

TEST_CASE("tau_20 equals the trace covariance: exact Gaussian oracle") {
    // V = 0, beta = 2, p = q = x1 x2 word: Var(Tr X1 X2) = 1 exactly for
    // independent GUE; the engine must reproduce it through
    // -(1+1_{beta=1}) tau_0(P-bar^q Psi^{-1} p).
    SDProblem prob;
    prob.V = NCPoly::zero(1);
    prob.beta = 2;
    prob.d = 2;
    prob.tau1 = StateAB({semicircle_moments(48), semicircle_moments(48)});
    SdSolver s(prob);
    const Word w = Word::x_monomial({1, 2});
    CHECK(s.tau20(w, w).real() == doctest::Approx(1.0).epsilon(1e-10));

    // and against sampled covariance over Haar conjugations at fixed spectra
    const int N = 96, samples = 1200;
    std::vector<double> a1(N), a2(N);
    for (int i = 0; i < N; ++i) {
        a1[i] = std::cos(M_PI * (i + 0.5) / N);
        a2[i] = -1.0 + 2.0 * (i + 0.5) / N;
    }
    SDProblem ph;
    ph.V = NCPoly::zero(1);
    ph.beta = 2;
    ph.d = 2;
    ph.tau1 = StateAB({empirical_moments(a1, 48), empirical_moments(a2, 48)});
    SdSolver sh(ph);
    Eigen::MatrixXcd A1 = Eigen::MatrixXcd::Zero(N, N), A2 = A1;
    for (int i = 0; i < N; ++i) {
        A1(i, i) = a1[i];
        A2(i, i) = a2[i];
    }
    ensemble::Rng rng(5150);
    std::vector<double> tp(samples);
    for (int sI = 0; sI < samples; ++sI) {
        auto U1 = ensemble::haar_unitary(rng, N);
        auto U2 = ensemble::haar_unitary(rng, N);
        Eigen::MatrixXcd X1 = U1 * A1 * U1.adjoint();
        Eigen::MatrixXcd X2 = U2 * A2 * U2.adjoint();
        tp[sI] = (X1 * X2).trace().real();
    }
    double mean = std::accumulate(tp.begin(), tp.end(), 0.0) / samples;
    double var = 0.0;
    for (double v : tp) var += (v - mean) * (v - mean);
    var /= (samples - 1);
    const double se_var = var * std::sqrt(2.0 / (samples - 1));
    const double pred = sh.tau20(w, w).real();
    MESSAGE("tau20 ", pred, " vs sample variance ", var);
    CHECK(std::abs(var - pred) < 4.0 * se_var + 20.0 / N);
}

TEST_CASE("tau_12 reduces to the tau_20 pairing at beta 2") {
    SDProblem prob;
    prob.V = NCPoly::zero(1);
    prob.beta = 2;
    prob.d = 2;
    prob.tau1 = StateAB({semicircle_moments(48), semicircle_moments(48)});
    SdSolver s(prob);
    const Word w = Word::x_monomial({1, 2, 1, 2});
    const auto v = s.tau12(w);
    CHECK(std::isfinite(v.real()));
    CHECK(std::abs(v.imag()) < 1e-12);
    // r=1 has no S term; tau12 = -[tau20](Delta-bar Psi^{-1} p)
    NCPoly h = s.invert_psi(NCPoly::monomial(w.cyclic_canonical()));
    NCPoly pair2 = ncalg::laplacian_bar(h, 2);
    ncalg::cplx expect = 0.0;
    for (const auto& [k, c] : pair2.terms()) expect -= c * s.tau20(k.w1, k.w2);
    CHECK(std::abs(v - expect) < 1e-12);
}

TEST_CASE("free energy: zero coupling, parity, and small-a expansion") {
    auto prob0 = bilinear_problem(0.0);
    SdSolver s0(prob0);
    auto fe0 = s0.free_energy();
    CHECK(fe0.F0 == 0.0);
    CHECK(fe0.F1 == 0.0);
    CHECK(fe0.F2 == 0.0);

    // F_0^{a, -V} = F_0^{-a, V}
    auto probp = bilinear_problem(0.05, 8, 6);
    auto probm = bilinear_problem(-0.05, 8, 6);
    probm.V *= -1.0;
    probm.a = 0.05;
    auto probm2 = bilinear_problem(-0.05, 8, 6);
    SdSolver sp(probm);    // (a, -V)
    SdSolver sm(probm2);   // (-a, V)
    CHECK(sp.free_energy().F0 == doctest::Approx(sm.free_energy().F0).epsilon(1e-12));

    // r=1 small-a: F0 = a tau_0(V) + a^2/2 tau_1(V) + O(a^3)
    auto prob = bilinear_problem(0.01, 10, 4);
    SdSolver s(prob);
    const auto fe = s.free_energy();
    double series = 0.0;
    for (int n = 0; n <= 4; ++n) {
        const double tn = s.tau_n(n, s.problem().V).real();
        series += std::pow(0.01, n + 1) / (n + 1) * tn;
    }
    CHECK(fe.F0 == doctest::Approx(series).epsilon(1e-10));
    // closed form for this model: F0 = -log(1 - a^2)/2
    CHECK(fe.F0 == doctest::Approx(-0.5 * std::log(1.0 - 0.01 * 0.01)).epsilon(1e-7));
    CHECK(fe.err0 < 1e-10);
}

TEST_CASE("rank-2 commuting interaction has an exactly flat series") {
    // V = x1^2 (x) x1^2: Tr V(X) depends only on the spectrum, the unitary
    // integral is constant, and F0 = a m2^2 exactly.
    SDProblem prob;
    prob.V = NCPoly(2);
    prob.V.add_term({Word::x_monomial({1, 1}), Word::x_monomial({1, 1})}, 1.0);
    prob.beta = 2;
    prob.a = 0.07;
    prob.d = 1;
    prob.n_max = 6;
    prob.tau1 = StateAB({semicircle_moments(48)});
    SdSolver s(prob);
    const Word w2 = Word::x_monomial({1, 1});
    for (int n = 1; n <= 4; ++n) CHECK(std::abs(s.tau_n(n, w2)) < 1e-14);
    const auto fe = s.free_energy();
    CHECK(fe.F0 == doctest::Approx(0.07 * 1.0 * 1.0).epsilon(1e-12));  // m2 = 1
    CHECK(s.tau20(w2, w2) == ncalg::cplx(0.0));
}

TEST_CASE("catalan fit and solution packaging") {
    auto prob = bilinear_problem(0.03, 8, 8);
    SdSolver s(prob);
    std::vector<Word> probes = {Word::x_monomial({1, 2}), Word::x_monomial({1, 1}),
                                Word::x_monomial({1, 2, 1, 2})};
    auto sol = s.solve(probes);
    CHECK(sol.catalan_D > 0.0);
    const double cat[] = {1, 1, 2, 5, 14, 42, 132, 429, 1430};
    for (int n = 1; n <= 8; ++n)
        CHECK(s.tau_n_norm(n) <= cat[n] * std::pow(sol.catalan_D, n) * (1 + 1e-9));
    CHECK_FALSE(sol.series_warning);  // 0.03 * 4 * D stays below 1 here
    CHECK(sol.tau10.value(Word::x_monomial({1, 2})).real() ==
          doctest::Approx(s.tau10_at(0.03, Word::x_monomial({1, 2})).real())
              .epsilon(1e-12));
    // this coupling sits outside the certified inversion regime for a
    // degree-4 rank-1 interaction: the solution records the honest warning
    // instead of uncertified corrections
    CHECK_FALSE(sol.correction_warning.empty());
    CHECK(sol.tau20.empty());
    // at a certified coupling the corrections are delivered
    auto prob2 = bilinear_problem(0.002, 8, 4);
    SdSolver s2(prob2);
    auto sol2 = s2.solve({Word::x_monomial({1, 2})});
    CHECK(sol2.correction_warning.empty());
    CHECK_FALSE(sol2.tau20.empty());
    // JSON export is well-formed enough to contain the key sections
    const auto js = sol.to_json();
    CHECK(js.find("\"tau10\"") != std::string::npos);
    CHECK(js.find("\"free_energy\"") != std::string::npos);
}
