#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: brute-force graph searches, exact absorbing-chain solves, and
// arithmetic membership tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "freewalk/rational.hpp"
#include "freewalk/word.hpp"

namespace oracles {

using freewalk::Alphabet;
using freewalk::BigInt;
using freewalk::Letter;
using freewalk::Rational;
using freewalk::Word;

// Breadth-first distance from `start` to the nearest vertex of `targets`,
// walking the Cayley tree edge by edge (never using the distance formula).
inline int bfs_distance(const Alphabet& alpha, const Word& start,
                        const std::set<Word>& targets, int max_radius) {
    std::set<Word> seen;
    std::queue<std::pair<Word, int>> q;
    q.push({start, 0});
    seen.insert(start);
    while (!q.empty()) {
        auto [w, d] = q.front();
        q.pop();
        if (targets.count(w)) return d;
        if (d == max_radius) continue;
        for (int i = 1; i <= alpha.rank; ++i) {
            for (Letter x : {static_cast<Letter>(i), static_cast<Letter>(-i)}) {
                Letter ls[1] = {x};
                Word next = w * Word::reduced(ls);
                if (seen.insert(next).second) q.push({next, d + 1});
            }
        }
    }
    return -1;
}

// Exact rational solve of A x = b by Gaussian elimination.
inline std::vector<Rational> solve_linear(std::vector<std::vector<Rational>> a,
                                          std::vector<Rational> b) {
    std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && a[piv][col] == 0) ++piv;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col || a[row][col] == 0) continue;
            Rational f = a[row][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
            b[row] -= f * b[col];
        }
    }
    std::vector<Rational> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

// Exact exit distribution of the uniform nearest-neighbor walk on the
// 2k-regular tree, aggregated to one depth-L cylinder: the probability that
// the walk, started at the root, first reaches the sphere of radius r inside
// the cylinder of a fixed length-L word.
//
// States classify vertices by (d, b) = (distance from root, progress along
// the cylinder's spine); every vertex in a class has the same absorption
// probability, so the chain lumps exactly and the system is tiny.
inline Rational exit_cylinder_mass(int k, int r, int L) {
    struct Key {
        int d, b;
        bool operator<(const Key& o) const { return d != o.d ? d < o.d : b < o.b; }
    };
    std::map<Key, int> id;
    std::vector<Key> keys;
    for (int d = 0; d < r; ++d)
        for (int b = 0; b <= std::min(d, L); ++b) {
            id[{d, b}] = static_cast<int>(keys.size());
            keys.push_back({d, b});
        }
    std::size_t n = keys.size();
    std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n, Rational(0)));
    std::vector<Rational> rhs(n, Rational(0));
    Rational step(1, 2 * k);
    auto absorb = [&](int d, int b) { return d == r ? (b == L ? Rational(1) : Rational(0))
                                                    : Rational(-1); };
    auto add = [&](std::size_t row, int d, int b, const Rational& p) {
        Rational val = absorb(d, b);
        if (val >= 0) rhs[row] += p * val;
        else a[row][static_cast<std::size_t>(id.at({d, b}))] -= p;
    };
    for (std::size_t i = 0; i < n; ++i) {
        auto [d, b] = keys[i];
        a[i][i] += 1;
        if (d == 0) {
            add(i, 1, std::min(1, L), step);          // the spine child
            add(i, 1, 0, Rational(2 * k - 1, 2 * k)); // everything else
        } else if (b == d && d < L) {
            add(i, d - 1, d - 1, step);                   // parent, on the spine
            add(i, d + 1, d + 1, step);                   // spine child
            add(i, d + 1, d, Rational(2 * k - 2, 2 * k)); // off-spine children
        } else if (b == L && d >= L) {
            add(i, d - 1, d == L ? L - 1 : L, step);      // parent
            add(i, d + 1, L, Rational(2 * k - 1, 2 * k)); // stays inside the cylinder
        } else {
            add(i, d - 1, b, step);                       // parent (possibly the spine)
            add(i, d + 1, b, Rational(2 * k - 1, 2 * k)); // children keep the branch point
        }
    }
    std::vector<Rational> x = solve_linear(std::move(a), std::move(rhs));
    return x[static_cast<std::size_t>(id.at({0, 0}))];
}

// Exact mean of |w_N| for the uniform nearest-neighbor walk on the 2k-regular
// tree, via dynamic programming on the birth-death distance chain.
inline double distance_chain_mean(int k, int steps) {
    std::vector<double> p(static_cast<std::size_t>(steps) + 1, 0.0);
    p[0] = 1.0;
    double up = static_cast<double>(2 * k - 1) / (2 * k);
    double down = 1.0 / (2 * k);
    std::vector<double> q(p.size());
    for (int n = 0; n < steps; ++n) {
        std::fill(q.begin(), q.end(), 0.0);
        q[1] += p[0];
        for (int d = 1; d <= n; ++d) {
            if (p[static_cast<std::size_t>(d)] == 0.0) continue;
            q[static_cast<std::size_t>(d) + 1] += up * p[static_cast<std::size_t>(d)];
            q[static_cast<std::size_t>(d) - 1] += down * p[static_cast<std::size_t>(d)];
        }
        std::swap(p, q);
    }
    double mean = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) mean += static_cast<double>(d) * p[d];
    return mean;
}

// Same for the walk uniform on {a, A}: |w_n| is the reflected simple random
// walk on the nonnegative integers.
inline double reflected_srw_mean(int steps) {
    std::vector<double> p(static_cast<std::size_t>(steps) + 1, 0.0);
    p[0] = 1.0;
    std::vector<double> q(p.size());
    for (int n = 0; n < steps; ++n) {
        std::fill(q.begin(), q.end(), 0.0);
        q[1] += p[0];
        for (int d = 1; d <= n; ++d) {
            if (p[static_cast<std::size_t>(d)] == 0.0) continue;
            q[static_cast<std::size_t>(d) + 1] += 0.5 * p[static_cast<std::size_t>(d)];
            q[static_cast<std::size_t>(d) - 1] += 0.5 * p[static_cast<std::size_t>(d)];
        }
        std::swap(p, q);
    }
    double mean = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) mean += static_cast<double>(d) * p[d];
    return mean;
}

// Membership in <a^2, b^2>: every maximal syllable of the reduced word must
// have even length (the subgroup is the free product of <a^2> and <b^2>, and
// alternating blocks never cancel).
inline bool in_squares_subgroup(const Word& w) {
    int i = 0;
    while (i < w.size()) {
        int j = i;
        while (j < w.size() && w[j] == w[i]) ++j;
        if ((j - i) % 2 != 0) return false;
        i = j;
    }
    return true;
}

// Exponent sum of one generator (the coset-enumeration oracle for kernels of
// F_k -> Z and F_k -> Z/q).
inline long long exponent_sum(const Word& w, int generator) {
    long long s = 0;
    for (Letter x : w.letters()) {
        if (x == generator) ++s;
        if (x == -generator) --s;
    }
    return s;
}

// Depth-L prefixes of the limit set of <a^2, b^2>: prefixes of infinite
// reduced concatenations of the blocks aa, AA, bb, BB.  Enumerated directly
// from the block structure.
inline std::set<Word> squares_limit_set_prefixes(const Alphabet& alpha, int depth) {
    std::set<Word> out;
    struct State {
        std::vector<Letter> word;
        bool mid_block; // an odd half-block is pending
    };
    std::vector<State> frontier{{{}, false}};
    for (int step = 0; step < depth; ++step) {
        std::vector<State> next;
        for (auto& st : frontier) {
            if (st.mid_block) {
                auto w = st.word;
                w.push_back(w.back()); // complete the block
                next.push_back({std::move(w), false});
            } else {
                for (int i = 1; i <= alpha.rank; ++i) {
                    for (Letter x : {static_cast<Letter>(i), static_cast<Letter>(-i)}) {
                        if (!st.word.empty() && st.word.back() == freewalk::inverse_letter(x))
                            continue;
                        auto w = st.word;
                        w.push_back(x);
                        next.push_back({std::move(w), true});
                    }
                }
            }
        }
        frontier = std::move(next);
    }
    for (auto& st : frontier) out.insert(Word::reduced(st.word));
    return out;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double stat = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        stat = std::max(stat, std::abs(fa - fb));
    }
    return stat;
}

} // namespace oracles
