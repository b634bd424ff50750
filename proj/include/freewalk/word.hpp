#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "freewalk/errors.hpp"

namespace freewalk {

/// A letter of the free group F_k: +i is the i-th generator (1-based),
/// -i its inverse.  0 is not a letter.
using Letter = std::int8_t;

constexpr Letter inverse_letter(Letter x) { return static_cast<Letter>(-x); }

/// Total order on letters used for shortlex comparisons and canonical
/// serialization: a < A < b < B < ...
constexpr int letter_rank(Letter x) {
    int idx = x > 0 ? x : -x;
    return 2 * (idx - 1) + (x < 0 ? 1 : 0);
}

/// The generating alphabet of F_k.  Generators print as a,b,c,... and
/// inverses as A,B,C,..., which caps the rank at 26.
struct Alphabet {
    int rank = 2;

    explicit Alphabet(int k = 2) : rank(k) {
        if (k < 1 || k > 26)
            throw InputError("alphabet rank must be in [1, 26], got " + std::to_string(k));
    }

    bool valid(Letter x) const {
        int idx = x > 0 ? x : -x;
        return idx >= 1 && idx <= rank;
    }

    char to_char(Letter x) const {
        if (!valid(x)) throw InputError("letter outside alphabet");
        return x > 0 ? static_cast<char>('a' + x - 1) : static_cast<char>('A' - x - 1);
    }

    Letter from_char(char c) const {
        Letter x = 0;
        if (c >= 'a' && c <= 'z') x = static_cast<Letter>(c - 'a' + 1);
        else if (c >= 'A' && c <= 'Z') x = static_cast<Letter>(-(c - 'A' + 1));
        else throw InputError(std::string("invalid word character '") + c + "'");
        if (!valid(x))
            throw InputError(std::string("letter '") + c + "' outside alphabet of rank " +
                             std::to_string(rank));
        return x;
    }

    friend bool operator==(const Alphabet&, const Alphabet&) = default;
};

/// A freely reduced word over some alphabet: simultaneously a group element
/// of F_k and a vertex of its Cayley tree (basepoint = identity = empty word).
///
/// The class owns the reducedness invariant: every constructor reduces.
class Word {
public:
    Word() = default;

    /// Free reduction of an arbitrary letter sequence.
    static Word reduced(std::span<const Letter> raw) {
        Word w;
        w.ls_.reserve(raw.size());
        for (Letter x : raw) w.push_reduce(x);
        return w;
    }

    /// Parse the ASCII form ("abA" etc.); reduces.  Letters must lie in `alpha`.
    static Word parse(std::string_view s, const Alphabet& alpha) {
        Word w;
        w.ls_.reserve(s.size());
        for (char c : s) w.push_reduce(alpha.from_char(c));
        return w;
    }

    int size() const { return static_cast<int>(ls_.size()); }
    bool empty() const { return ls_.empty(); }
    Letter operator[](int i) const { return ls_[static_cast<std::size_t>(i)]; }
    std::span<const Letter> letters() const { return ls_; }

    Word inverse() const {
        Word w;
        w.ls_.reserve(ls_.size());
        for (auto it = ls_.rbegin(); it != ls_.rend(); ++it)
            w.ls_.push_back(inverse_letter(*it));
        return w;
    }

    /// Reduced product.  |u*v| <= |u| + |v|, with equality iff no cancellation.
    friend Word operator*(const Word& u, const Word& v) {
        std::size_t i = u.ls_.size(), j = 0;
        while (i > 0 && j < v.ls_.size() && u.ls_[i - 1] == inverse_letter(v.ls_[j])) {
            --i;
            ++j;
        }
        Word w;
        w.ls_.reserve(i + v.ls_.size() - j);
        w.ls_.insert(w.ls_.end(), u.ls_.begin(), u.ls_.begin() + static_cast<std::ptrdiff_t>(i));
        w.ls_.insert(w.ls_.end(), v.ls_.begin() + static_cast<std::ptrdiff_t>(j), v.ls_.end());
        return w;
    }

    Word prefix(int len) const {
        Word w;
        len = std::min(len, size());
        w.ls_.assign(ls_.begin(), ls_.begin() + len);
        return w;
    }

    bool is_prefix_of(const Word& other) const {
        return size() <= other.size() &&
               std::equal(ls_.begin(), ls_.end(), other.ls_.begin());
    }

    /// Length of the longest common prefix (= Gromov product in the tree).
    static int common_prefix_length(const Word& u, const Word& v) {
        int n = std::min(u.size(), v.size());
        int i = 0;
        while (i < n && u.ls_[static_cast<std::size_t>(i)] == v.ls_[static_cast<std::size_t>(i)]) ++i;
        return i;
    }

    /// Cyclic reduction: strips matching inverse pairs from the two ends.
    Word cyclically_reduced() const {
        std::size_t lo = 0, hi = ls_.size();
        while (hi - lo >= 2 && ls_[lo] == inverse_letter(ls_[hi - 1])) {
            ++lo;
            --hi;
        }
        Word w;
        w.ls_.assign(ls_.begin() + static_cast<std::ptrdiff_t>(lo),
                     ls_.begin() + static_cast<std::ptrdiff_t>(hi));
        return w;
    }

    std::string str(const Alphabet& alpha) const {
        std::string s;
        s.reserve(ls_.size());
        for (Letter x : ls_) s.push_back(alpha.to_char(x));
        return s;
    }

    bool operator==(const Word& o) const = default;

    /// Shortlex: by length, then by letter_rank.
    std::strong_ordering operator<=>(const Word& o) const {
        if (auto c = ls_.size() <=> o.ls_.size(); c != 0) return c;
        for (std::size_t i = 0; i < ls_.size(); ++i)
            if (auto c = letter_rank(ls_[i]) <=> letter_rank(o.ls_[i]); c != 0) return c;
        return std::strong_ordering::equal;
    }

private:
    void push_reduce(Letter x) {
        if (x == 0) throw InputError("0 is not a letter");
        if (!ls_.empty() && ls_.back() == inverse_letter(x)) ls_.pop_back();
        else ls_.push_back(x);
    }

    std::vector<Letter> ls_;
};

/// Word metric: d(u, v) = |u^{-1} v|.  d(identity, g) = |g|.
inline int word_distance(const Word& u, const Word& v) {
    // |u^{-1} v| = |u| + |v| - 2 <u, v>.
    return u.size() + v.size() - 2 * Word::common_prefix_length(u, v);
}

/// Gromov product at the basepoint.  In the Cayley tree this is exactly the
/// common prefix length; the defining formula with the word metric agrees
/// with no additive error.
inline int gromov_product(const Word& x, const Word& y) {
    return Word::common_prefix_length(x, y);
}

/// All reduced words of length <= radius, in shortlex order.
inline std::vector<Word> reduced_ball(const Alphabet& alpha, int radius) {
    std::vector<Word> out;
    out.emplace_back();
    std::size_t level_begin = 0;
    std::vector<Letter> order;
    for (int i = 1; i <= alpha.rank; ++i) {
        order.push_back(static_cast<Letter>(i));
        order.push_back(static_cast<Letter>(-i));
    }
    for (int len = 1; len <= radius; ++len) {
        std::size_t level_end = out.size();
        for (std::size_t i = level_begin; i < level_end; ++i) {
            for (Letter x : order) {
                const Word& w = out[i];
                if (!w.empty() && w[w.size() - 1] == inverse_letter(x)) continue;
                std::vector<Letter> ls(w.letters().begin(), w.letters().end());
                ls.push_back(x);
                out.push_back(Word::reduced(ls));
            }
        }
        level_begin = level_end;
    }
    return out;
}

} // namespace freewalk
