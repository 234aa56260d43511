#include "rmt/ensemble.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rmt::ensemble {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double horner(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

}  // namespace

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0xa5a5a5a55a5a5a5aULL + stream * 0x9e3779b97f4a7c15ULL);
    splitmix64(x);
    return splitmix64(x);
}

Rng::Rng(uint64_t seed, uint64_t stream) : gen_(derive_seed(seed, stream)) {}

uint64_t Rng::next() { return gen_(); }

double Rng::uniform() { return (gen_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

void EigenConfig::write_csv(std::ostream& os) const {
    char buf[40];
    for (const auto& row : lambdas) {
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            os << (i ? "," : "") << buf;
        }
        os << "\n";
    }
}

std::string EigenConfig::meta_json() const {
    std::ostringstream os;
    os << "{\"d\":" << d << ",\"N\":" << N << ",\"beta\":" << beta << ",\"seed\":" << seed
       << ",\"model\":\"" << model << "\"}";
    return os.str();
}

Eigen::MatrixXcd gue_matrix(Rng& rng, int N) {
    Eigen::MatrixXcd X(N, N);
    const double od = 1.0 / std::sqrt(2.0 * N), dg = 1.0 / std::sqrt(static_cast<double>(N));
    for (int i = 0; i < N; ++i) {
        X(i, i) = dg * rng.normal();
        for (int j = i + 1; j < N; ++j) {
            const std::complex<double> v(od * rng.normal(), od * rng.normal());
            X(i, j) = v;
            X(j, i) = std::conj(v);
        }
    }
    return X;
}

Eigen::MatrixXd goe_matrix(Rng& rng, int N) {
    Eigen::MatrixXd X(N, N);
    const double od = 1.0 / std::sqrt(static_cast<double>(N));
    const double dg = std::sqrt(2.0) * od;
    for (int i = 0; i < N; ++i) {
        X(i, i) = dg * rng.normal();
        for (int j = i + 1; j < N; ++j) {
            const double v = od * rng.normal();
            X(i, j) = v;
            X(j, i) = v;
        }
    }
    return X;
}

std::vector<double> eigenvalues(const Eigen::MatrixXcd& A) {
    const int N = static_cast<int>(A.rows());
    std::vector<std::complex<double>> buf(A.data(), A.data() + N * N);
    std::vector<double> w(N);
    const int info = LAPACKE_zheev(LAPACK_COL_MAJOR, 'N', 'L', N,
                                   reinterpret_cast<lapack_complex_double*>(buf.data()), N,
                                   w.data());
    if (info != 0) throw std::runtime_error("zheev failed");
    return w;
}

std::vector<double> eigenvalues(const Eigen::MatrixXd& A) {
    const int N = static_cast<int>(A.rows());
    std::vector<double> buf(A.data(), A.data() + N * N);
    std::vector<double> w(N);
    const int info = LAPACKE_dsyev(LAPACK_COL_MAJOR, 'N', 'L', N, buf.data(), N, w.data());
    if (info != 0) throw std::runtime_error("dsyev failed");
    return w;
}

Eigen::MatrixXcd haar_unitary(Rng& rng, int N) {
    Eigen::MatrixXcd G(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) G(i, j) = std::complex<double>(rng.normal(), rng.normal());
    std::vector<std::complex<double>> a(G.data(), G.data() + N * N);
    std::vector<std::complex<double>> tau(N);
    LAPACKE_zgeqrf(LAPACK_COL_MAJOR, N, N, reinterpret_cast<lapack_complex_double*>(a.data()),
                   N, reinterpret_cast<lapack_complex_double*>(tau.data()));
    std::vector<std::complex<double>> phases(N);
    for (int j = 0; j < N; ++j) {
        const std::complex<double> r = a[j * N + j];
        phases[j] = (std::abs(r) == 0.0) ? 1.0 : r / std::abs(r);
    }
    LAPACKE_zungqr(LAPACK_COL_MAJOR, N, N, N,
                   reinterpret_cast<lapack_complex_double*>(a.data()), N,
                   reinterpret_cast<lapack_complex_double*>(tau.data()));
    Eigen::MatrixXcd U(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) U(i, j) = a[j * N + i] * phases[j];
    return U;
}

Eigen::MatrixXd haar_orthogonal(Rng& rng, int N) {
    Eigen::MatrixXd G(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) G(i, j) = rng.normal();
    std::vector<double> a(G.data(), G.data() + N * N);
    std::vector<double> tau(N);
    LAPACKE_dgeqrf(LAPACK_COL_MAJOR, N, N, a.data(), N, tau.data());
    std::vector<double> signs(N);
    for (int j = 0; j < N; ++j) signs[j] = a[j * N + j] >= 0 ? 1.0 : -1.0;
    LAPACKE_dorgqr(LAPACK_COL_MAJOR, N, N, N, a.data(), N, tau.data());
    Eigen::MatrixXd U(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) U(i, j) = a[j * N + i] * signs[j];
    return U;
}

std::vector<EigenConfig> sample_gve(int N, int beta, int count, uint64_t seed) {
    if (N < 2) throw std::invalid_argument("sample_gve: N >= 2 required");
    if (beta != 1 && beta != 2) throw std::invalid_argument("sample_gve: beta in {1,2}");
    std::vector<EigenConfig> out(count);
    for (int c = 0; c < count; ++c) {
        Rng rng(seed, static_cast<uint64_t>(c));
        EigenConfig cfg;
        cfg.d = 1;
        cfg.N = N;
        cfg.beta = beta;
        cfg.seed = seed;
        cfg.model = beta == 2 ? "gue" : "goe";
        cfg.lambdas.resize(1);
        cfg.lambdas[0] = (beta == 2) ? eigenvalues(gue_matrix(rng, N))
                                     : eigenvalues(goe_matrix(rng, N));
        out[c] = std::move(cfg);
    }
    return out;
}

Eigen::MatrixXcd eval_poly(const ncalg::NCPoly& P, const std::vector<Eigen::MatrixXcd>& X,
                           const std::vector<Eigen::MatrixXcd>& B) {
    if (P.rank() != 1) throw std::invalid_argument("eval_poly: rank-1 polynomial expected");
    if (X.empty()) throw std::invalid_argument("eval_poly: no matrices");
    const int N = static_cast<int>(X[0].rows());
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(N, N);
    for (const auto& [k, c] : P.terms()) {
        Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(N, N);
        for (size_t pos = 0; pos < k.w1.length(); ++pos) {
            const auto l = k.w1.letter(pos);
            if (l.kind == ncalg::Kind::A) {
                if (l.index > static_cast<int>(X.size()))
                    throw std::invalid_argument("eval_poly: x index out of range");
                term *= X[l.index - 1];
            } else if (l.kind == ncalg::Kind::B) {
                if (l.index > static_cast<int>(B.size()))
                    throw std::invalid_argument("eval_poly: b index out of range");
                term *= B[l.index - 1];
            } else {
                throw std::invalid_argument("eval_poly: unitary letter in an x-polynomial");
            }
        }
        out += c * term;
    }
    return out;
}

bool ModelSpec::quadratic_gve_W() const {
    const double half = (beta == 2) ? 0.5 : 0.25;
    if (W.empty()) return true;
    for (const auto& wk : W) {
        if (wk.size() != 3) return false;
        if (wk[0] != 0.0 || wk[1] != 0.0 || wk[2] != half) return false;
    }
    return true;
}

void ModelSpec::validate() const {
    if (beta != 1 && beta != 2) throw std::invalid_argument("ModelSpec: beta in {1,2}");
    if (d < 1) throw std::invalid_argument("ModelSpec: d >= 1");
    if (static_cast<int>(B.size()) != m) throw std::invalid_argument("ModelSpec: m/B mismatch");
    for (const auto& Bj : B) {
        const auto ev = eigenvalues(Bj);
        if (std::abs(ev.front()) > 1.0 + 1e-12 || std::abs(ev.back()) > 1.0 + 1e-12)
            throw std::invalid_argument("ModelSpec: ||B_j|| must be <= 1");
    }
}

Eigen::MatrixXcd builtin_b_matrix(int N) {
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(N, N);
    for (int i = 0; i < N; ++i) B(i, i) = N == 1 ? 0.0 : -1.0 + 2.0 * i / (N - 1.0);
    return B;
}

std::vector<EigenConfig> sample_polynomial_model(const ModelSpec& spec, int count,
                                                 uint64_t seed) {
    spec.validate();
    if (!spec.P.empty() && static_cast<int>(spec.P.size()) != spec.d)
        throw std::invalid_argument("sample_polynomial_model: need one P_i per matrix");
    std::vector<EigenConfig> out(count);
    for (int c = 0; c < count; ++c) {
        Rng rng(seed, static_cast<uint64_t>(c));
        std::vector<Eigen::MatrixXcd> X(spec.d);
        for (int i = 0; i < spec.d; ++i)
            X[i] = (spec.beta == 2)
                       ? gue_matrix(rng, spec.N)
                       : goe_matrix(rng, spec.N).cast<std::complex<double>>();
        EigenConfig cfg;
        cfg.d = spec.d;
        cfg.N = spec.N;
        cfg.beta = spec.beta;
        cfg.seed = seed;
        cfg.model = "polynomial";
        cfg.lambdas.resize(spec.d);
        for (int i = 0; i < spec.d; ++i) {
            Eigen::MatrixXcd Y = X[i];
            if (spec.eps != 0.0 && !spec.P.empty()) {
                Y += spec.eps * eval_poly(spec.P[i], X, spec.B);
                const double herm = (Y - Y.adjoint()).cwiseAbs().maxCoeff();
                if (herm > 1e-10 * std::max(1.0, Y.cwiseAbs().maxCoeff()))
                    throw std::runtime_error(
                        "sample_polynomial_model: P_i evaluation is not self-adjoint");
            }
            cfg.lambdas[i] = eigenvalues(Y);
        }
        out[c] = std::move(cfg);
    }
    return out;
}

namespace {

/// Trace of a single x-word without forming the full product when avoidable.
std::complex<double> trace_word(const ncalg::Word& w, const std::vector<Eigen::MatrixXcd>& X,
                                const std::vector<Eigen::MatrixXcd>& B) {
    const int N = static_cast<int>(X[0].rows());
    const size_t L = w.length();
    if (L == 0) return static_cast<double>(N);
    auto mat = [&](size_t pos) -> const Eigen::MatrixXcd& {
        const auto l = w.letter(pos);
        if (l.kind == ncalg::Kind::A) return X.at(l.index - 1);
        if (l.kind == ncalg::Kind::B) return B.at(l.index - 1);
        throw std::invalid_argument("trace_word: unitary letter in an x-polynomial");
    };
    if (L == 1) return mat(0).trace();
    // Tr(A B) as an O(N^2) contraction
    auto tr2 = [](const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
        return A.cwiseProduct(B.transpose()).sum();
    };
    if (L == 2) return tr2(mat(0), mat(1));
    Eigen::MatrixXcd acc = mat(0);
    for (size_t pos = 1; pos + 1 < L; ++pos) acc *= mat(pos);
    return tr2(acc, mat(L - 1));
}

std::complex<double> trace_poly(const ncalg::NCPoly& P, const std::vector<Eigen::MatrixXcd>& X,
                                const std::vector<Eigen::MatrixXcd>& B) {
    std::complex<double> acc = 0.0;
    for (const auto& [k, c] : P.terms()) acc += c * trace_word(k.w1, X, B);
    return acc;
}

}  // namespace

namespace {

/// Tr^{(x)r} of the interaction: r=1 gives N * a * (1/N)Tr V, normalized so
/// that the log-density term is N^{2-r} Tr^{(x)r}(aV).
double interaction_exponent(const ModelSpec& spec, const std::vector<Eigen::MatrixXcd>& X) {
    if (spec.a == 0.0 || spec.V.is_zero()) return 0.0;
    const int r = spec.V.rank();
    double acc = 0.0;
    if (r == 1) {
        acc = spec.N * spec.a * trace_poly(spec.V, X, spec.B).real();  // N^{2-1} Tr
    } else {
        for (const auto& [k, c] : spec.V.terms()) {
            const double t1 = trace_word(k.w1, X, spec.B).real();
            const double t2 = trace_word(k.w2, X, spec.B).real();
            acc += spec.a * c.real() * t1 * t2;
        }
    }
    return acc;
}

double trw_exponent(const ModelSpec& spec, const std::vector<std::vector<double>>& evals) {
    double acc = 0.0;
    for (int k = 0; k < spec.d; ++k) {
        const std::vector<double> wk =
            spec.W.empty() ? std::vector<double>{0.0, 0.0, spec.beta == 2 ? 0.5 : 0.25}
                           : spec.W[k < static_cast<int>(spec.W.size()) ? k : 0];
        for (double l : evals[k]) acc += horner(wk, l);
    }
    return spec.N * acc;
}

}  // namespace

McmcResult mcmc_joint_law(const ModelSpec& spec, const McmcOptions& opt, uint64_t seed,
                          const std::vector<ncalg::NCPoly>& probes) {
    spec.validate();
    const bool fast = opt.allow_fast_path && spec.quadratic_gve_W();
    if (!fast && spec.N > opt.max_N)
        throw std::invalid_argument("mcmc_joint_law: N exceeds the cost guard for the "
                                    "generic proposal path");
    if (fast && spec.N > 512)
        throw std::invalid_argument("mcmc_joint_law: N exceeds the fast-path guard");

    Rng rng(seed, 0x4d434d43ULL);
    const int N = spec.N;
    std::vector<Eigen::MatrixXcd> X(spec.d);
    for (int i = 0; i < spec.d; ++i)
        X[i] = (spec.beta == 2) ? gue_matrix(rng, N)
                                : goe_matrix(rng, N).cast<std::complex<double>>();

    auto spectral_radius_ok = [&](const std::vector<std::vector<double>>& ev) {
        for (const auto& row : ev)
            if (std::abs(row.front()) > spec.Mcut || std::abs(row.back()) > spec.Mcut)
                return false;
        return true;
    };
    auto all_evals = [&](const std::vector<Eigen::MatrixXcd>& M) {
        std::vector<std::vector<double>> ev(spec.d);
        for (int i = 0; i < spec.d; ++i) ev[i] = eigenvalues(M[i]);
        return ev;
    };

    auto evals = all_evals(X);
    double logv = interaction_exponent(spec, X);
    double logw = trw_exponent(spec, evals);

    McmcResult res;
    double scale = fast ? 0.05 : 0.3;  // gamma for partial refresh / s for random walk
    long accepted = 0, proposed = 0;
    const long total = opt.burn_in + opt.steps;
    for (long step = 0; step < total; ++step) {
        std::vector<Eigen::MatrixXcd> Xp(spec.d);
        if (fast) {
            // autoregressive refresh: reversible for the Gaussian factor, so
            // the Metropolis ratio reduces to the interaction change
            const double g = std::min(scale, 0.999);
            const double keep = std::sqrt(1.0 - g * g);
            for (int i = 0; i < spec.d; ++i)
                Xp[i] = keep * X[i] + g * ((spec.beta == 2)
                                               ? gue_matrix(rng, N)
                                               : goe_matrix(rng, N).cast<std::complex<double>>());
        } else {
            for (int i = 0; i < spec.d; ++i) {
                Eigen::MatrixXcd H = (spec.beta == 2)
                                         ? gue_matrix(rng, N)
                                         : goe_matrix(rng, N).cast<std::complex<double>>();
                Xp[i] = X[i] + (scale / std::sqrt(static_cast<double>(N))) * H;
            }
        }
        const double logv_p = interaction_exponent(spec, Xp);
        double log_ratio;
        std::vector<std::vector<double>> evals_p;
        if (fast) {
            log_ratio = logv_p - logv;  // the Gaussian factor is exactly invariant
        } else {
            evals_p = all_evals(Xp);
            const double logw_p = trw_exponent(spec, evals_p);
            log_ratio = (logv_p - logv) - (logw_p - logw);
        }
        if (!std::isfinite(log_ratio))
            throw std::runtime_error("mcmc_joint_law: non-finite log-density");
        ++proposed;
        bool accept = std::log(std::max(rng.uniform(), 1e-300)) < log_ratio;
        if (accept) {
            // cutoff by rejection
            if (fast) evals_p = all_evals(Xp);
            if (!spectral_radius_ok(evals_p)) accept = false;
        }
        if (accept) {
            X = std::move(Xp);
            evals = std::move(evals_p);
            logv = logv_p;
            if (!fast) logw = trw_exponent(spec, evals);
            ++accepted;
        }
        // Robbins-Monro during burn-in, frozen after
        if (step < opt.burn_in) {
            const double acc = accept ? 1.0 : 0.0;
            scale *= std::exp(0.5 * (acc - opt.target_accept) / std::sqrt(step + 1.0));
            scale = std::clamp(scale, 1e-4, fast ? 0.999 : 10.0);
        }
        if (step >= opt.burn_in && (step - opt.burn_in) % opt.thin == 0) {
            EigenConfig cfg;
            cfg.d = spec.d;
            cfg.N = N;
            cfg.beta = spec.beta;
            cfg.seed = seed;
            cfg.model = "mcmc";
            cfg.lambdas = evals;
            res.configs.push_back(std::move(cfg));
            if (!probes.empty()) {
                std::vector<double> tr(probes.size());
                for (size_t j = 0; j < probes.size(); ++j)
                    tr[j] = trace_poly(probes[j], X, spec.B).real() / N;
                res.traces.push_back(std::move(tr));
            }
        }
    }
    res.acceptance = proposed ? static_cast<double>(accepted) / proposed : 0.0;
    res.proposal_scale = scale;
    if (res.acceptance < 0.05 || res.acceptance > 0.8)
        res.warning = "acceptance outside [0.05, 0.8] after tuning";
    return res;
}

std::vector<std::vector<double>> sample_gaussian_bilinear(
    int N, double a, int count, uint64_t seed, const std::vector<ncalg::NCPoly>& probes) {
    if (std::abs(a) >= 1.0)
        throw std::invalid_argument("sample_gaussian_bilinear: |a| < 1 required");
    std::vector<std::vector<double>> out(count);
    const double sp = 1.0 / std::sqrt(1.0 - a), sm = 1.0 / std::sqrt(1.0 + a);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int c = 0; c < count; ++c) {
        Rng rng(seed, static_cast<uint64_t>(c));
        const Eigen::MatrixXcd Yp = sp * gue_matrix(rng, N);
        const Eigen::MatrixXcd Ym = sm * gue_matrix(rng, N);
        std::vector<Eigen::MatrixXcd> X(2);
        X[0] = inv_sqrt2 * (Yp + Ym);
        X[1] = inv_sqrt2 * (Yp - Ym);
        std::vector<double> tr(probes.size());
        for (size_t j = 0; j < probes.size(); ++j)
            tr[j] = trace_poly(probes[j], X, {}).real() / N;
        out[c] = std::move(tr);
    }
    return out;
}

std::vector<EigenConfig> sample_loggas_meanfield(
    const std::vector<double>& Wcoeffs, int beta, int N, double t,
    const std::function<double(double, double)>& phi, double Mcut,
    const LogGasOptions& opt, uint64_t seed) {
    Rng rng(seed, 0x106a5ULL);
    // start from equally spaced quantile-ish positions
    std::vector<double> lam(N);
    for (int i = 0; i < N; ++i) lam[i] = -1.5 + 3.0 * (i + 0.5) / N;

    double step = opt.step > 0 ? opt.step : 3.0 / N;
    long acc = 0, prop = 0;
    std::vector<EigenConfig> out;
    const int total = opt.burn_in + opt.sweeps;
    for (int sweep = 0; sweep < total; ++sweep) {
        for (int i = 0; i < N; ++i) {
            const double x = lam[i] + step * rng.normal();
            ++prop;
            if (std::abs(x) > Mcut) continue;
            double dlog = -N * (horner(Wcoeffs, x) - horner(Wcoeffs, lam[i]));
            bool overlap = false;
            for (int j = 0; j < N && !overlap; ++j) {
                if (j == i) continue;
                const double dx = std::abs(x - lam[j]);
                if (dx == 0.0) overlap = true;
                dlog += beta * (std::log(dx) - std::log(std::abs(lam[i] - lam[j])));
            }
            if (overlap) continue;
            if (t != 0.0 && phi) {
                double dphi = phi(x, x) - phi(lam[i], lam[i]);
                for (int j = 0; j < N; ++j) {
                    if (j == i) continue;
                    dphi += 2.0 * (phi(x, lam[j]) - phi(lam[i], lam[j]));
                }
                dlog += t * dphi;
            }
            if (std::log(std::max(rng.uniform(), 1e-300)) < dlog) {
                lam[i] = x;
                ++acc;
            }
        }
        if (sweep < opt.burn_in) {
            const double rate = static_cast<double>(acc) / std::max<long>(prop, 1);
            step *= std::exp(0.5 * (rate - 0.3) / std::sqrt(sweep + 1.0));
        }
        if (sweep >= opt.burn_in && (sweep - opt.burn_in) % opt.thin == 0) {
            EigenConfig cfg;
            cfg.d = 1;
            cfg.N = N;
            cfg.beta = beta;
            cfg.seed = seed;
            cfg.model = "loggas";
            cfg.lambdas.resize(1);
            cfg.lambdas[0] = lam;
            std::sort(cfg.lambdas[0].begin(), cfg.lambdas[0].end());
            out.push_back(std::move(cfg));
        }
    }
    return out;
}

}  // namespace rmt::ensemble
