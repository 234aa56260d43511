#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rmt::ncalg {

using cplx = std::complex<double>;

enum class Kind : uint8_t { U = 0, Ustar = 1, A = 2, B = 3 };

struct Letter {
    Kind kind;
    int index;  ///< 1-based
    bool operator==(const Letter&) const = default;
};

/// Reduced word in the Laurent letters u_i, u_i^{-1}, a_i, b_j. Adjacent
/// u_i u_i^{-1} and u_i^{-1} u_i pairs are cancelled on construction.
class Word {
public:
    Word() = default;
    static Word from_letters(const std::vector<Letter>& ls);
    /// Parses space-separated tokens: "u1 a1 u1^ b2" (^ marks the inverse).
    static Word parse(const std::string& tokens);
    /// The conjugated letter x_i = u_i a_i u_i^{-1}.
    static Word x(int i);
    /// Word for a monomial x_{i1} x_{i2} ... in the conjugated letters.
    static Word x_monomial(const std::vector<int>& idx);

    size_t length() const { return s_.size(); }
    bool empty() const { return s_.empty(); }
    Letter letter(size_t i) const;
    int deg_u() const;
    int deg_ab() const;
    bool balanced() const;  ///< equal u_i / u_i^{-1} counts for every i

    Word adjoint() const;                 ///< reverse and star every letter
    Word concat(const Word& o) const;     ///< product with reduction
    /// Reduces across the wrap point and rotates to the lexicographically
    /// minimal representative: the canonical label of the cyclic class.
    Word cyclic_canonical() const;

    std::string str() const;  ///< token text ("u1 a1 u1^"); "1" for the unit

    auto operator<=>(const Word& o) const { return s_ <=> o.s_; }
    bool operator==(const Word& o) const { return s_ == o.s_; }
    const std::u16string& key() const { return s_; }

private:
    std::u16string s_;
    explicit Word(std::u16string s) : s_(std::move(s)) {}
    friend struct WordHash;
};

struct WordHash {
    size_t operator()(const Word& w) const { return std::hash<std::u16string>()(w.s_); }
};

/// Non-commutative Laurent polynomial, tensor rank 1 or 2.
/// Coefficients below 1e-15 (relative) are pruned.
class NCPoly {
public:
    struct Key {
        Word w1, w2;  // w2 unused at rank 1
        auto operator<=>(const Key&) const = default;
    };
    using TermMap = std::map<Key, cplx>;

    explicit NCPoly(int rank = 1);
    static NCPoly zero(int rank = 1) { return NCPoly(rank); }
    static NCPoly one();
    static NCPoly monomial(const Word& w, cplx coeff = 1.0);
    static NCPoly tensor(const Word& w1, const Word& w2, cplx coeff = 1.0);

    int rank() const { return rank_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    size_t term_count() const { return terms_.size(); }

    void add_term(const Key& k, cplx c);
    NCPoly& operator+=(const NCPoly& o);
    NCPoly& operator-=(const NCPoly& o);
    NCPoly& operator*=(cplx s);
    friend NCPoly operator+(NCPoly a, const NCPoly& b) { return a += b; }
    friend NCPoly operator-(NCPoly a, const NCPoly& b) { return a -= b; }
    friend NCPoly operator*(cplx s, NCPoly a) { return a *= s; }

    NCPoly& prune(double eps = 1e-15);
    /// Drops terms whose contribution bound |c| xi^deg_u zeta^deg_ab falls
    /// below the absolute threshold.
    NCPoly& prune_weighted(double abs_eps, double xi, double zeta);

    /// Maximal deg_u over stored words (per factor summed for rank 2).
    int max_deg_u() const;

    /// Text serialization: one term per line, "coeff  tokens [| tokens]".
    std::string to_text() const;
    static NCPoly from_text(const std::string& text, int rank = 1);

private:
    int rank_;
    TermMap terms_;
};

/// Free-monoid product with unitary reduction (rank-wise for equal ranks;
/// rank-2 times rank-1 multiplies into the matching slots is not needed).
NCPoly mul(const NCPoly& p, const NCPoly& q);

NCPoly adjoint(const NCPoly& p);

/// The weighted l1 norm sum |c| xi^{sum deg_u} zeta^{sum deg_ab}.
double norm_xi_zeta(const NCPoly& p, double xi, double zeta);

/// Non-commutative derivative with respect to u_i (rank-1 -> rank-2).
NCPoly nc_derivative(const NCPoly& p, int i);

/// Cyclic derivative D_i = m o d_i with m(p (x) q) = q p.
NCPoly cyclic_derivative(const NCPoly& p, int i);

/// Reduced Laplacian Delta_i p = d_i D_i p minus the two boundary terms.
/// Output tensor factors are cyclically canonicalized; every factor has
/// deg_u strictly smaller than the input word's (asserted).
NCPoly reduced_laplacian(const NCPoly& p, int i);

/// Sum over i of the reduced Laplacians, divided by deg_u (the bar operator).
/// Input must have no deg_u = 0 component.
NCPoly laplacian_bar(const NCPoly& p, int d);

/// tilde-Delta = sum_i m~ o d_i D_i D^{-1} with m~(p (x) q) = q* p;
/// the beta = 1 correction operator. Output words cyclically canonicalized.
NCPoly tilde_delta_bar(const NCPoly& p, int d);

/// Degree operator D (scales each word by deg_u), its inverse on (AB)^perp,
/// and the projections onto (AB)^perp (proj) and AB (proj_ab).
NCPoly degree_scale(const NCPoly& p);
NCPoly degree_inverse(const NCPoly& p);  ///< throws on a deg_u = 0 component
NCPoly proj(const NCPoly& p);
NCPoly proj_ab(const NCPoly& p);

/// Truncated tracial linear form: values stored on canonical words.
struct LinearForm {
    std::map<Word, cplx> values;
    int max_degree = 8;
    bool tracial = true;

    cplx value(const Word& w) const;  ///< canonical lookup, 0 if absent
    void set(const Word& w, cplx v);
    /// Dual norm restricted to the stored words:
    /// max |tau(w)| / (xi^deg_u zeta^deg_ab).
    double dual_norm(double xi, double zeta) const;
    std::string to_json() const;
};

/// Tracial state on the AB subalgebra: per-letter a_i moment sequences, a
/// b-word functional, explicit overrides, and a free-product evaluation for
/// mixed words (the a_i and the b algebra are free from each other).
class StateAB {
public:
    StateAB() = default;
    /// moments[i][k] = tau(a_{i+1}^{k+1}); tau_b maps pure-b canonical words.
    StateAB(std::vector<std::vector<double>> a_moments,
            std::map<Word, cplx> tau_b = {});

    cplx value(const Word& w) const;  ///< w must have deg_u = 0
    void set_override(const Word& w, cplx v);
    double a_moment(int i, int k) const;  ///< tau(a_i^k), i 1-based
    int d() const { return static_cast<int>(a_moments_.size()); }

private:
    std::vector<std::vector<double>> a_moments_;
    std::map<Word, cplx> tau_b_;
    std::map<Word, cplx> overrides_;

    struct GBlock;  // algebra-tagged linear combination of single-algebra words
    cplx eval_blocks(std::vector<GBlock> blocks) const;
    cplx marginal(const GBlock& b) const;
};

}  // namespace rmt::ncalg
