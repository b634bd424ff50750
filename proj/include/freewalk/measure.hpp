#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freewalk/errors.hpp"
#include "freewalk/rational.hpp"
#include "freewalk/rng.hpp"
#include "freewalk/stallings.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

struct MomentReport {
    double first_moment = 0.0;
    double p = 1.0;
    double p_moment = 0.0;
    bool divergent = false; // never set for finite support; empirical scans report separately
};

/// A finitely supported probability measure on F_k.  The probability type is
/// either `double` (Monte Carlo aggregation) or `Rational` (exact convolution
/// powers and coset measures).  Immutable after construction; entries are
/// kept in shortlex order so serialization is canonical.
template <class P>
class StepDistribution {
public:
    StepDistribution(const Alphabet& alpha, std::vector<std::pair<Word, P>> entries)
        : alpha_(alpha) {
        std::map<Word, P> merged;
        for (auto& [w, p] : entries) {
            if (p < P(0)) throw InputError("negative probability in step distribution");
            if (p == P(0)) continue;
            merged[w] += p;
        }
        entries_.assign(merged.begin(), merged.end());
        if (entries_.empty()) throw InputError("step distribution has empty support");
        for (auto& [w, p] : entries_)
            for (Letter x : w.letters())
                if (!alpha_.valid(x)) throw InputError("support word uses letter outside alphabet");
    }

    /// Named presets over F_k.  "nn-uniform": uniform on the 2k one-letter
    /// steps.  "lazy-nn": mass 1/2 at the identity, rest uniform nearest-
    /// neighbor.  "squares": uniform on the squared generators and inverses.
    static StepDistribution preset(std::string_view name, int rank = 2) {
        Alphabet alpha(rank);
        std::vector<std::pair<Word, P>> entries;
        auto letter_word = [&](Letter x) {
            Letter ls[1] = {x};
            return Word::reduced(ls);
        };
        auto frac = [](long num, long den) {
            if constexpr (std::is_same_v<P, Rational>) return Rational(num, den);
            else return static_cast<double>(num) / static_cast<double>(den);
        };
        if (name == "nn-uniform") {
            for (int i = 1; i <= rank; ++i) {
                entries.emplace_back(letter_word(static_cast<Letter>(i)), frac(1, 2 * rank));
                entries.emplace_back(letter_word(static_cast<Letter>(-i)), frac(1, 2 * rank));
            }
        } else if (name == "lazy-nn") {
            entries.emplace_back(Word(), frac(1, 2));
            for (int i = 1; i <= rank; ++i) {
                entries.emplace_back(letter_word(static_cast<Letter>(i)), frac(1, 4 * rank));
                entries.emplace_back(letter_word(static_cast<Letter>(-i)), frac(1, 4 * rank));
            }
        } else if (name == "squares") {
            for (int i = 1; i <= rank; ++i) {
                Letter pos[2] = {static_cast<Letter>(i), static_cast<Letter>(i)};
                Letter neg[2] = {static_cast<Letter>(-i), static_cast<Letter>(-i)};
                entries.emplace_back(Word::reduced(pos), frac(1, 2 * rank));
                entries.emplace_back(Word::reduced(neg), frac(1, 2 * rank));
            }
        } else {
            throw InputError("unknown measure preset '" + std::string(name) + "'");
        }
        return StepDistribution(alpha, std::move(entries));
    }

    const Alphabet& alphabet() const { return alpha_; }
    std::span<const std::pair<Word, P>> entries() const { return entries_; }
    std::size_t support_size() const { return entries_.size(); }

    P total_mass() const {
        P s(0);
        for (auto& [w, p] : entries_) s += p;
        return s;
    }

    P mass(const Word& w) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), w,
                                   [](const auto& e, const Word& key) { return e.first < key; });
        if (it != entries_.end() && it->first == w) return it->second;
        return P(0);
    }

    bool is_symmetric() const {
        for (auto& [w, p] : entries_)
            if (mass(w.inverse()) != p) return false;
        return true;
    }

    int max_word_length() const {
        int m = 0;
        for (auto& [w, p] : entries_) m = std::max(m, w.size());
        return m;
    }

    /// The step law of the backward walk: reflect(m)(g) = m(g^{-1}).
    /// Involutive; fixed points are exactly the symmetric measures.
    StepDistribution reflect() const {
        std::vector<std::pair<Word, P>> entries;
        entries.reserve(entries_.size());
        for (auto& [w, p] : entries_) entries.emplace_back(w.inverse(), p);
        return StepDistribution(alpha_, std::move(entries));
    }

    /// Exact law of the product g h with g ~ a, h ~ b.
    static StepDistribution convolve(const StepDistribution& a, const StepDistribution& b,
                                     std::size_t support_cap = 1'000'000) {
        if (!(a.alpha_ == b.alpha_)) throw InputError("convolving measures over different alphabets");
        std::map<Word, P> acc;
        for (auto& [u, p] : a.entries_)
            for (auto& [v, q] : b.entries_) {
                acc[u * v] += p * q;
                if (acc.size() > support_cap)
                    throw ResourceError("convolution support exceeded the cap of " +
                                        std::to_string(support_cap) + " entries");
            }
        std::vector<std::pair<Word, P>> entries(acc.begin(), acc.end());
        return StepDistribution(a.alpha_, std::move(entries));
    }

    MomentReport moments(double p = 0.5) const {
        MomentReport rep;
        rep.p = p;
        for (auto& [w, prob] : entries_) {
            double pr;
            if constexpr (std::is_same_v<P, Rational>) pr = to_double(prob);
            else pr = prob;
            rep.first_moment += w.size() * pr;
            rep.p_moment += std::pow(static_cast<double>(w.size()), p) * pr;
        }
        return rep;
    }

    StepDistribution<double> to_double() const {
        std::vector<std::pair<Word, double>> entries;
        entries.reserve(entries_.size());
        for (auto& [w, p] : entries_) {
            if constexpr (std::is_same_v<P, Rational>) entries.emplace_back(w, freewalk::to_double(p));
            else entries.emplace_back(w, p);
        }
        return StepDistribution<double>(alpha_, std::move(entries));
    }

private:
    Alphabet alpha_;
    std::vector<std::pair<Word, P>> entries_; // shortlex-sorted, positive masses
};

using StepD = StepDistribution<double>;
using StepQ = StepDistribution<Rational>;

struct ValidationReport {
    bool mass_ok = false;
    double mass = 0.0;
    bool symmetric = false;
    bool generates_full_group = false;
    std::optional<long long> support_subgroup_index; // nullopt = infinite
    int support_core_vertices = 0;
};

/// Diagnostics for a step distribution: total mass, symmetry, and whether the
/// support generates all of F_k as a group (decided on the folded graph of
/// the support).  Throws InputError when the mass is off.
template <class P>
ValidationReport validate(const StepDistribution<P>& m) {
    ValidationReport rep;
    if constexpr (std::is_same_v<P, Rational>) {
        rep.mass = to_double(m.total_mass());
        rep.mass_ok = m.total_mass() == Rational(1);
    } else {
        rep.mass = m.total_mass();
        rep.mass_ok = std::abs(rep.mass - 1.0) <= 1e-12;
    }
    if (!rep.mass_ok)
        throw InputError("step distribution mass is " + std::to_string(rep.mass) + ", not 1");
    rep.symmetric = m.is_symmetric();

    std::vector<Word> gens;
    for (auto& [w, p] : m.entries())
        if (!w.empty()) gens.push_back(w);
    if (gens.empty()) {
        // Point mass at the identity generates the trivial subgroup.
        rep.generates_full_group = false;
        rep.support_core_vertices = 1;
        return rep;
    }
    StallingsGraph g = StallingsGraph::fold(m.alphabet(), gens);
    rep.support_core_vertices = g.vertex_count();
    rep.support_subgroup_index = g.index();
    rep.generates_full_group = rep.support_subgroup_index.has_value() &&
                               *rep.support_subgroup_index == 1;
    return rep;
}

/// Inverse-CDF sampler over the support; deterministic given the rng state.
class Sampler {
public:
    explicit Sampler(const StepD& m) {
        double acc = 0.0;
        for (auto& [w, p] : m.entries()) {
            acc += p;
            cdf_.push_back(acc);
            words_.push_back(w);
        }
        cdf_.back() = 1.0; // guard against rounding in the last bin
    }

    const Word& operator()(Xoshiro256ss& rng) const {
        double u = rng.uniform01();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = std::min(static_cast<std::size_t>(it - cdf_.begin()), words_.size() - 1);
        return words_[i];
    }

private:
    std::vector<double> cdf_;
    std::vector<Word> words_;
};

inline Word sample(const StepD& m, Xoshiro256ss& rng) { return Sampler(m)(rng); }

} // namespace freewalk
