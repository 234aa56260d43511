#include "rmt/ncalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rmt::ncalg {

namespace {

constexpr char16_t encode(Kind k, int index) {
    return static_cast<char16_t>((static_cast<int>(k) << 12) | (index & 0x0fff));
}
constexpr Kind kind_of(char16_t c) { return static_cast<Kind>((c >> 12) & 3); }
constexpr int index_of(char16_t c) { return c & 0x0fff; }

bool inverse_pair(char16_t x, char16_t y) {
    const Kind kx = kind_of(x), ky = kind_of(y);
    if (index_of(x) != index_of(y)) return false;
    return (kx == Kind::U && ky == Kind::Ustar) || (kx == Kind::Ustar && ky == Kind::U);
}

std::u16string reduce(const std::u16string& in) {
    std::u16string out;
    out.reserve(in.size());
    for (char16_t c : in) {
        if (!out.empty() && inverse_pair(out.back(), c))
            out.pop_back();
        else
            out.push_back(c);
    }
    return out;
}

}  // namespace

Word Word::from_letters(const std::vector<Letter>& ls) {
    std::u16string s;
    s.reserve(ls.size());
    for (const auto& l : ls) {
        if (l.index < 1 || l.index > 0x0fff)
            throw std::invalid_argument("Word: letter index out of range");
        s.push_back(encode(l.kind, l.index));
    }
    return Word(reduce(s));
}

Word Word::parse(const std::string& tokens) {
    std::istringstream is(tokens);
    std::string tok;
    std::vector<Letter> ls;
    while (is >> tok) {
        if (tok == "1") continue;
        bool star = false;
        if (tok.size() > 1 && tok.back() == '^') {
            star = true;
            tok.pop_back();
        }
        if (tok.size() < 2) throw std::invalid_argument("Word::parse: bad token " + tok);
        const char c = tok[0];
        const int idx = std::stoi(tok.substr(1));
        Kind k;
        if (c == 'u')
            k = star ? Kind::Ustar : Kind::U;
        else if (c == 'a' && !star)
            k = Kind::A;
        else if (c == 'b' && !star)
            k = Kind::B;
        else
            throw std::invalid_argument("Word::parse: bad token " + tok);
        ls.push_back({k, idx});
    }
    return from_letters(ls);
}

Word Word::x(int i) {
    return from_letters({{Kind::U, i}, {Kind::A, i}, {Kind::Ustar, i}});
}

Word Word::x_monomial(const std::vector<int>& idx) {
    std::vector<Letter> ls;
    for (int i : idx) {
        ls.push_back({Kind::U, i});
        ls.push_back({Kind::A, i});
        ls.push_back({Kind::Ustar, i});
    }
    return from_letters(ls);
}

Letter Word::letter(size_t i) const { return {kind_of(s_[i]), index_of(s_[i])}; }

int Word::deg_u() const {
    int n = 0;
    for (char16_t c : s_)
        if (kind_of(c) == Kind::U || kind_of(c) == Kind::Ustar) ++n;
    return n;
}

int Word::deg_ab() const {
    int n = 0;
    for (char16_t c : s_)
        if (kind_of(c) == Kind::A || kind_of(c) == Kind::B) ++n;
    return n;
}

bool Word::balanced() const {
    std::map<int, int> bal;
    for (char16_t c : s_) {
        if (kind_of(c) == Kind::U) bal[index_of(c)]++;
        if (kind_of(c) == Kind::Ustar) bal[index_of(c)]--;
    }
    for (auto& [i, v] : bal)
        if (v != 0) return false;
    return true;
}

Word Word::adjoint() const {
    std::u16string s(s_.rbegin(), s_.rend());
    for (char16_t& c : s) {
        const Kind k = kind_of(c);
        if (k == Kind::U)
            c = encode(Kind::Ustar, index_of(c));
        else if (k == Kind::Ustar)
            c = encode(Kind::U, index_of(c));
    }
    return Word(reduce(s));
}

Word Word::concat(const Word& o) const { return Word(reduce(s_ + o.s_)); }

Word Word::cyclic_canonical() const {
    std::u16string s = s_;  // already linearly reduced
    while (s.size() >= 2 && inverse_pair(s.back(), s.front())) {
        s.pop_back();
        s.erase(s.begin());
        s = reduce(s);
    }
    if (s.size() <= 1) return Word(s);
    std::u16string best = s;
    for (size_t r = 1; r < s.size(); ++r) {
        std::u16string rot = s.substr(r) + s.substr(0, r);
        if (rot < best) best = rot;
    }
    return Word(best);
}

std::string Word::str() const {
    if (s_.empty()) return "1";
    std::string out;
    for (size_t i = 0; i < s_.size(); ++i) {
        if (i) out += ' ';
        const Kind k = kind_of(s_[i]);
        const int idx = index_of(s_[i]);
        switch (k) {
            case Kind::U: out += "u" + std::to_string(idx); break;
            case Kind::Ustar: out += "u" + std::to_string(idx) + "^"; break;
            case Kind::A: out += "a" + std::to_string(idx); break;
            case Kind::B: out += "b" + std::to_string(idx); break;
        }
    }
    return out;
}

NCPoly::NCPoly(int rank) : rank_(rank) {
    if (rank != 1 && rank != 2)
        throw std::invalid_argument("NCPoly: only tensor ranks 1 and 2 are supported");
}

NCPoly NCPoly::one() {
    NCPoly p(1);
    p.terms_[{Word(), Word()}] = 1.0;
    return p;
}

NCPoly NCPoly::monomial(const Word& w, cplx coeff) {
    NCPoly p(1);
    if (coeff != 0.0) p.terms_[{w, Word()}] = coeff;
    return p;
}

NCPoly NCPoly::tensor(const Word& w1, const Word& w2, cplx coeff) {
    NCPoly p(2);
    if (coeff != 0.0) p.terms_[{w1, w2}] = coeff;
    return p;
}

void NCPoly::add_term(const Key& k, cplx c) {
    auto it = terms_.find(k);
    if (it == terms_.end()) {
        if (c != 0.0) terms_[k] = c;
    } else {
        it->second += c;
        if (std::abs(it->second) == 0.0) terms_.erase(it);
    }
}

NCPoly& NCPoly::operator+=(const NCPoly& o) {
    if (rank_ != o.rank_) throw std::invalid_argument("NCPoly: rank mismatch");
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
}

NCPoly& NCPoly::operator-=(const NCPoly& o) {
    if (rank_ != o.rank_) throw std::invalid_argument("NCPoly: rank mismatch");
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
}

NCPoly& NCPoly::operator*=(cplx s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    return *this;
}

NCPoly& NCPoly::prune(double eps) {
    double scale = 0.0;
    for (auto& [k, c] : terms_) scale = std::max(scale, std::abs(c));
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < eps * std::max(scale, 1.0))
            it = terms_.erase(it);
        else
            ++it;
    }
    return *this;
}

NCPoly& NCPoly::prune_weighted(double abs_eps, double xi, double zeta) {
    for (auto it = terms_.begin(); it != terms_.end();) {
        const double wgt = std::pow(xi, it->first.w1.deg_u() + it->first.w2.deg_u()) *
                           std::pow(zeta, it->first.w1.deg_ab() + it->first.w2.deg_ab());
        if (std::abs(it->second) * wgt < abs_eps)
            it = terms_.erase(it);
        else
            ++it;
    }
    return *this;
}

int NCPoly::max_deg_u() const {
    int m = 0;
    for (const auto& [k, c] : terms_) m = std::max(m, k.w1.deg_u() + k.w2.deg_u());
    return m;
}

std::string NCPoly::to_text() const {
    std::ostringstream os;
    char buf[96];
    for (const auto& [k, c] : terms_) {
        if (c.imag() == 0.0)
            std::snprintf(buf, sizeof(buf), "%.17g", c.real());
        else
            std::snprintf(buf, sizeof(buf), "(%.17g,%.17g)", c.real(), c.imag());
        os << buf << " " << k.w1.str();
        if (rank_ == 2) os << " | " << k.w2.str();
        os << "\n";
    }
    return os.str();
}

NCPoly NCPoly::from_text(const std::string& text, int rank) {
    NCPoly p(rank);
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ctok;
        ls >> ctok;
        cplx coeff;
        if (ctok.front() == '(') {
            const auto comma = ctok.find(',');
            coeff = {std::stod(ctok.substr(1, comma - 1)),
                     std::stod(ctok.substr(comma + 1, ctok.size() - comma - 2))};
        } else {
            coeff = std::stod(ctok);
        }
        std::string rest;
        std::getline(ls, rest);
        if (rank == 1) {
            p.add_term({Word::parse(rest), Word()}, coeff);
        } else {
            const auto bar = rest.find('|');
            if (bar == std::string::npos)
                throw std::invalid_argument("NCPoly::from_text: rank-2 line missing '|'");
            p.add_term({Word::parse(rest.substr(0, bar)), Word::parse(rest.substr(bar + 1))},
                       coeff);
        }
    }
    return p;
}

NCPoly mul(const NCPoly& p, const NCPoly& q) {
    if (p.rank() != q.rank()) throw std::invalid_argument("mul: rank mismatch");
    NCPoly out(p.rank());
    for (const auto& [kp, cp] : p.terms())
        for (const auto& [kq, cq] : q.terms())
            out.add_term({kp.w1.concat(kq.w1), kp.w2.concat(kq.w2)}, cp * cq);
    out.prune();
    return out;
}

NCPoly adjoint(const NCPoly& p) {
    NCPoly out(p.rank());
    for (const auto& [k, c] : p.terms())
        out.add_term({k.w1.adjoint(), k.w2.adjoint()}, std::conj(c));
    return out;
}

double norm_xi_zeta(const NCPoly& p, double xi, double zeta) {
    if (xi < 1.0 || zeta < 1.0)
        throw std::invalid_argument("norm_xi_zeta: parameters must be >= 1");
    double acc = 0.0;
    for (const auto& [k, c] : p.terms())
        acc += std::abs(c) * std::pow(xi, k.w1.deg_u() + k.w2.deg_u()) *
               std::pow(zeta, k.w1.deg_ab() + k.w2.deg_ab());
    return acc;
}

namespace {

struct Split {
    Word prefix, suffix;
    int sign;
};

/// Positions of u_i (sign +1) and u_i^{-1} (sign -1) with their flanks.
std::vector<Split> splits(const Word& w, int i) {
    std::vector<Split> out;
    const size_t n = w.length();
    for (size_t pos = 0; pos < n; ++pos) {
        const Letter l = w.letter(pos);
        if (l.index != i) continue;
        if (l.kind != Kind::U && l.kind != Kind::Ustar) continue;
        std::vector<Letter> pre, suf;
        for (size_t j = 0; j < pos; ++j) pre.push_back(w.letter(j));
        for (size_t j = pos + 1; j < n; ++j) suf.push_back(w.letter(j));
        out.push_back({Word::from_letters(pre), Word::from_letters(suf),
                       l.kind == Kind::U ? +1 : -1});
    }
    return out;
}

Word u_word(int i, bool star) {
    return Word::from_letters({{star ? Kind::Ustar : Kind::U, i}});
}

void nc_derivative_word(const Word& w, int i, cplx coeff, NCPoly& out) {
    for (const auto& s : splits(w, i)) {
        if (s.sign > 0)
            out.add_term({s.prefix.concat(u_word(i, false)), s.suffix}, coeff);
        else
            out.add_term({s.prefix, u_word(i, true).concat(s.suffix)}, -coeff);
    }
}

/// Terms of D_i w before summation, as (word, sign) pairs.
std::vector<std::pair<Word, int>> cyclic_terms(const Word& w, int i) {
    std::vector<std::pair<Word, int>> out;
    for (const auto& s : splits(w, i)) {
        if (s.sign > 0)
            out.push_back({s.suffix.concat(s.prefix).concat(u_word(i, false)), +1});
        else
            out.push_back({u_word(i, true).concat(s.suffix).concat(s.prefix), -1});
    }
    return out;
}

}  // namespace

NCPoly nc_derivative(const NCPoly& p, int i) {
    if (p.rank() != 1) throw std::invalid_argument("nc_derivative: rank-1 input required");
    NCPoly out(2);
    for (const auto& [k, c] : p.terms()) nc_derivative_word(k.w1, i, c, out);
    out.prune();
    return out;
}

NCPoly cyclic_derivative(const NCPoly& p, int i) {
    if (p.rank() != 1) throw std::invalid_argument("cyclic_derivative: rank-1 input required");
    NCPoly out(1);
    for (const auto& [k, c] : p.terms())
        for (const auto& [w, sign] : cyclic_terms(k.w1, i))
            out.add_term({w, Word()}, static_cast<double>(sign) * c);
    out.prune();
    return out;
}

NCPoly reduced_laplacian(const NCPoly& p, int i) {
    if (p.rank() != 1) throw std::invalid_argument("reduced_laplacian: rank-1 input required");
    NCPoly out(2);
    for (const auto& [k, c] : p.terms()) {
        const int degu = k.w1.deg_u();
        NCPoly acc(2);
        for (const auto& [w, sign] : cyclic_terms(k.w1, i)) {
            nc_derivative_word(w, i, static_cast<double>(sign), acc);
            if (sign > 0)
                acc.add_term({w, Word()}, -1.0);
            else
                acc.add_term({Word(), w}, -1.0);
        }
        for (const auto& [kk, cc] : acc.terms()) {
            const Word f1 = kk.w1.cyclic_canonical(), f2 = kk.w2.cyclic_canonical();
            if (f1.deg_u() >= degu || f2.deg_u() >= degu)
                throw std::logic_error("reduced_laplacian: factor degree did not decrease");
            out.add_term({f1, f2}, c * cc);
        }
    }
    out.prune();
    return out;
}

NCPoly laplacian_bar(const NCPoly& p, int d) {
    NCPoly out(2);
    for (const auto& [k, c] : p.terms()) {
        const int degu = k.w1.deg_u();
        if (degu == 0) throw std::invalid_argument("laplacian_bar: deg_u = 0 component");
        NCPoly single = NCPoly::monomial(k.w1, c / static_cast<double>(degu));
        for (int i = 1; i <= d; ++i) out += reduced_laplacian(single, i);
    }
    out.prune();
    return out;
}

NCPoly tilde_delta_bar(const NCPoly& p, int d) {
    if (p.rank() != 1) throw std::invalid_argument("tilde_delta_bar: rank-1 input required");
    NCPoly out(1);
    for (const auto& [k, c] : p.terms()) {
        const int degu = k.w1.deg_u();
        if (degu == 0) throw std::invalid_argument("tilde_delta_bar: deg_u = 0 component");
        const cplx cc = c / static_cast<double>(degu);
        for (int i = 1; i <= d; ++i) {
            for (const auto& [w, sign] : cyclic_terms(k.w1, i)) {
                NCPoly dw(2);
                nc_derivative_word(w, i, static_cast<double>(sign) * cc, dw);
                for (const auto& [kk, c2] : dw.terms())
                    out.add_term({kk.w2.adjoint().concat(kk.w1).cyclic_canonical(), Word()}, c2);
            }
        }
    }
    out.prune();
    return out;
}

NCPoly degree_scale(const NCPoly& p) {
    NCPoly out(p.rank());
    for (const auto& [k, c] : p.terms())
        out.add_term(k, c * static_cast<double>(k.w1.deg_u() + k.w2.deg_u()));
    return out;
}

NCPoly degree_inverse(const NCPoly& p) {
    NCPoly out(p.rank());
    for (const auto& [k, c] : p.terms()) {
        const int degu = k.w1.deg_u() + k.w2.deg_u();
        if (degu == 0)
            throw std::invalid_argument("degree_inverse: applied to a deg_u = 0 word");
        out.add_term(k, c / static_cast<double>(degu));
    }
    return out;
}

NCPoly proj(const NCPoly& p) {
    NCPoly out(p.rank());
    for (const auto& [k, c] : p.terms())
        if (k.w1.deg_u() + k.w2.deg_u() > 0) out.add_term(k, c);
    return out;
}

NCPoly proj_ab(const NCPoly& p) {
    NCPoly out(p.rank());
    for (const auto& [k, c] : p.terms())
        if (k.w1.deg_u() + k.w2.deg_u() == 0) out.add_term(k, c);
    return out;
}

cplx LinearForm::value(const Word& w) const {
    const Word key = tracial ? w.cyclic_canonical() : w;
    auto it = values.find(key);
    return it == values.end() ? cplx(0.0) : it->second;
}

void LinearForm::set(const Word& w, cplx v) {
    values[tracial ? w.cyclic_canonical() : w] = v;
}

double LinearForm::dual_norm(double xi, double zeta) const {
    double m = 0.0;
    for (const auto& [w, v] : values)
        m = std::max(m, std::abs(v) / (std::pow(xi, w.deg_u()) * std::pow(zeta, w.deg_ab())));
    return m;
}

std::string LinearForm::to_json() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    char buf[96];
    for (const auto& [w, v] : values) {
        if (!first) os << ",";
        first = false;
        std::snprintf(buf, sizeof(buf), "[%.17g,%.17g]", v.real(), v.imag());
        os << "\"" << w.str() << "\":" << buf;
    }
    os << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// StateAB: free product of the a_i marginals and the b algebra.
// ---------------------------------------------------------------------------

struct StateAB::GBlock {
    int alg;  // i >= 1 for the a_i algebra, 0 for the b algebra
    std::vector<std::pair<Word, cplx>> terms;  // single-algebra words
};

StateAB::StateAB(std::vector<std::vector<double>> a_moments, std::map<Word, cplx> tau_b)
    : a_moments_(std::move(a_moments)) {
    for (auto& [w, v] : tau_b) tau_b_[w.cyclic_canonical()] = v;
}

double StateAB::a_moment(int i, int k) const {
    if (k == 0) return 1.0;
    if (i < 1 || i > static_cast<int>(a_moments_.size()))
        throw std::out_of_range("StateAB: a index");
    const auto& m = a_moments_[i - 1];
    if (k > static_cast<int>(m.size()))
        throw std::out_of_range("StateAB: moment order " + std::to_string(k) +
                                " beyond stored range");
    return m[k - 1];
}

void StateAB::set_override(const Word& w, cplx v) { overrides_[w.cyclic_canonical()] = v; }

cplx StateAB::marginal(const GBlock& b) const {
    cplx acc = 0.0;
    for (const auto& [w, c] : b.terms) {
        if (w.empty()) {
            acc += c;
        } else if (b.alg >= 1) {
            acc += c * a_moment(b.alg, static_cast<int>(w.length()));
        } else {
            auto it = tau_b_.find(w.cyclic_canonical());
            acc += (it == tau_b_.end()) ? 0.0 : c * it->second;
        }
    }
    return acc;
}

cplx StateAB::eval_blocks(std::vector<GBlock> blocks) const {
    std::vector<GBlock> merged;
    for (auto& b : blocks) {
        if (!merged.empty() && merged.back().alg == b.alg) {
            std::vector<std::pair<Word, cplx>> prod;
            for (const auto& [w1, c1] : merged.back().terms)
                for (const auto& [w2, c2] : b.terms) prod.push_back({w1.concat(w2), c1 * c2});
            merged.back().terms = std::move(prod);
        } else {
            merged.push_back(std::move(b));
        }
    }
    const int n = static_cast<int>(merged.size());
    if (n == 0) return 1.0;
    if (n == 1) return marginal(merged[0]);
    if (n > 20) throw std::invalid_argument("StateAB: word has too many blocks");

    // tau(prod) over traced subsets; fully centered alternating products
    // vanish by freeness
    cplx total = 0.0;
    std::vector<cplx> tr(n);
    std::vector<GBlock> centered(n);
    for (int i = 0; i < n; ++i) {
        tr[i] = marginal(merged[i]);
        centered[i] = merged[i];
        centered[i].terms.push_back({Word(), -tr[i]});
    }
    for (uint32_t mask = 1; mask < (1u << n); ++mask) {
        cplx tprod = 1.0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) tprod *= tr[i];
        if (tprod == 0.0) continue;
        std::vector<GBlock> rest;
        for (int i = 0; i < n; ++i)
            if (!(mask & (1u << i))) rest.push_back(centered[i]);
        if (rest.empty()) {
            total += tprod;
            continue;
        }
        bool merges = false;
        for (size_t i = 0; i + 1 < rest.size(); ++i)
            if (rest[i].alg == rest[i + 1].alg) merges = true;
        if (!merges) continue;  // alternating centered product: 0 by freeness
        total += tprod * eval_blocks(rest);
    }
    return total;
}

cplx StateAB::value(const Word& w) const {
    if (w.deg_u() != 0) throw std::invalid_argument("StateAB: word has u letters");
    const Word canon = w.cyclic_canonical();
    if (auto it = overrides_.find(canon); it != overrides_.end()) return it->second;
    if (canon.empty()) return 1.0;
    std::vector<GBlock> blocks;
    for (size_t i = 0; i < canon.length(); ++i) {
        const Letter l = canon.letter(i);
        const int alg = (l.kind == Kind::A) ? l.index : 0;
        if (blocks.empty() || blocks.back().alg != alg) {
            blocks.push_back({alg, {{Word::from_letters({l}), 1.0}}});
        } else {
            auto& t = blocks.back().terms[0];
            t.first = t.first.concat(Word::from_letters({l}));
        }
    }
    return eval_blocks(std::move(blocks));
}

}  // namespace rmt::ncalg
