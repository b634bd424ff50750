#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "freewalk/errors.hpp"
#include "freewalk/stallings.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

/// Lazily completed Schreier graph of H\F_k, seeded with the folded core of H.
///
/// The full Schreier graph is the core plus hanging trees (a reduced path
/// that leaves a folded core never folds back), so on-demand completion just
/// attaches fresh vertices; distances from the base coset are assigned at
/// creation time and are exact.  A vertex budget bounds growth; exceeding it
/// raises ResourceError unless the caller opts into frontier absorption.
///
/// Single-owner mutable object: concurrent queries need one coordinator.
class SchreierBall {
public:
    explicit SchreierBall(const StallingsGraph& core, long long vertex_budget = 1'000'000)
        : alpha_(core.alphabet()), budget_(vertex_budget) {
        int n = core.vertex_count();
        next_.assign(static_cast<std::size_t>(n),
                     std::vector<std::int64_t>(static_cast<std::size_t>(core.dirs()), -1));
        for (int v = 0; v < n; ++v)
            for (int d = 0; d < core.dirs(); ++d)
                next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)] = core.next_dir(v, d);
        // Exact distances on the core by BFS; hanging trees are dead ends, so
        // core-internal shortest paths never leave the core.
        dist_.assign(static_cast<std::size_t>(n), -1);
        parent_.assign(static_cast<std::size_t>(n), -1);
        parent_letter_.assign(static_cast<std::size_t>(n), 0);
        std::queue<int> q;
        dist_[0] = 0;
        q.push(0);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int d = 0; d < core.dirs(); ++d) {
                auto w = next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)];
                if (w != -1 && dist_[static_cast<std::size_t>(w)] == -1) {
                    dist_[static_cast<std::size_t>(w)] = dist_[static_cast<std::size_t>(v)] + 1;
                    parent_[static_cast<std::size_t>(w)] = v;
                    parent_letter_[static_cast<std::size_t>(w)] = detail::letter_of_dir(d);
                    q.push(static_cast<int>(w));
                }
            }
        }
    }

    int base() const { return 0; }
    long long size() const { return static_cast<long long>(next_.size()); }
    int dirs() const { return 2 * alpha_.rank; }
    const Alphabet& alphabet() const { return alpha_; }

    /// Graph distance of a materialized coset from the base coset.
    int distance(long long v) const { return dist_[static_cast<std::size_t>(v)]; }

    /// Existing neighbor or -1 (does not extend).
    long long neighbor(long long v, Letter x) const {
        return next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(detail::dir_of(x))];
    }

    /// Neighbor, creating it if missing.  Throws ResourceError at the budget.
    long long trace_letter(long long v, Letter x) {
        auto t = try_trace_letter(v, x);
        if (!t)
            throw ResourceError("Schreier extension budget exceeded (budget " +
                                std::to_string(budget_) + " vertices)");
        return *t;
    }

    /// Like trace_letter but reports budget exhaustion as nullopt.
    std::optional<long long> try_trace_letter(long long v, Letter x) {
        int d = detail::dir_of(x);
        auto& slot = next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)];
        if (slot != -1) return slot;
        if (size() >= budget_) return std::nullopt;
        long long w = size();
        next_.emplace_back(static_cast<std::size_t>(dirs()), -1);
        dist_.push_back(dist_[static_cast<std::size_t>(v)] + 1);
        parent_.push_back(v);
        parent_letter_.push_back(x);
        slot = w;
        next_[static_cast<std::size_t>(w)][static_cast<std::size_t>(detail::inv_dir(d))] = v;
        return w;
    }

    long long trace(long long v, const Word& w) {
        for (Letter x : w.letters()) v = trace_letter(v, x);
        return v;
    }

    /// d_X(g o, H o): the Schreier distance of the coset Hg from the base.
    long long coset_distance(const Word& g) {
        return distance(trace(base(), g));
    }

    /// A shortest representative word of the coset (read off the BFS tree).
    Word representative(long long v) const {
        std::vector<Letter> rev;
        while (v != base()) {
            rev.push_back(parent_letter_[static_cast<std::size_t>(v)]);
            v = parent_[static_cast<std::size_t>(v)];
        }
        std::reverse(rev.begin(), rev.end());
        return Word::reduced(rev);
    }

private:
    Alphabet alpha_;
    long long budget_;
    std::vector<std::vector<std::int64_t>> next_;
    std::vector<std::int32_t> dist_;
    std::vector<std::int64_t> parent_;
    std::vector<Letter> parent_letter_;
};

} // namespace freewalk
