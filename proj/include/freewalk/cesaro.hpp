#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "freewalk/measure.hpp"
#include "freewalk/rational.hpp"
#include "freewalk/schreier.hpp"
#include "freewalk/stallings.hpp"

namespace freewalk {

/// The Cesaro average over n = 1..N of the n-step walk distribution pushed
/// forward to the coset space H2\F_k, computed exactly in rationals and
/// restricted to a window of the Schreier graph.
///
/// Mass whose jump lands at distance > window_radius is absorbed into
/// `leaked_mass` (and never returns); masses plus the leak sum to 1 exactly.
/// When the lazy coset graph hits its vertex budget before filling the
/// window, the measure is additionally truncated at the budget frontier:
/// `truncated` is set, `effective_radius` reports the largest radius whose
/// shells were fully built, and in-window masses are lower bounds.
struct CosetMeasure {
    long long cesaro_steps = 0;
    int window_radius = 0;
    int effective_radius = 0;
    bool truncated = false;
    Rational leaked_mass = Rational(0);
    // (coset state, distance from base coset, shortest representative, mass)
    std::vector<std::tuple<long long, int, Word, Rational>> masses;
    std::vector<long long> argmax_states; // the maximal-mass coset detector
    std::vector<Rational> outside_mass;   // outside_mass[r] = mass at distance > r (incl. leak)
    bool finite_support = false;          // outside mass below tolerance at the window edge
    int finite_support_radius = -1;       // smallest such radius, -1 if none
    Rational tolerance = Rational(1, 1000);
};

inline CosetMeasure cesaro_coset_measure(const StepQ& m1, const StallingsGraph& h2, long long N,
                                         int radius, long long vertex_budget = 200'000,
                                         Rational tolerance = Rational(1, 1000),
                                         bool allow_truncation = true) {
    if (N < 1) throw InputError("Cesaro horizon N must be >= 1");
    if (radius < 0) throw InputError("window radius must be >= 0");
    if (!(m1.alphabet() == h2.alphabet()))
        throw InputError("measure and subgroup use different alphabets");

    // Scale all probabilities to a common integer denominator; the n-step
    // distribution then lives over denominator D^n and stays integral.
    BigInt denom = 1;
    for (auto& [g, p] : m1.entries())
        denom = boost::multiprecision::lcm(denom, boost::multiprecision::denominator(p));
    std::vector<std::pair<Word, BigInt>> jumps;
    for (auto& [g, p] : m1.entries())
        jumps.emplace_back(g, boost::multiprecision::numerator(p) *
                                  (denom / boost::multiprecision::denominator(p)));

    // Mass only ever sits at distance <= radius, so letterwise traces touch
    // vertices at distance <= radius + max support word length and the lazy
    // graph stays that small.
    SchreierBall ball(h2, vertex_budget);

    std::vector<BigInt> cur(static_cast<std::size_t>(ball.size()));
    std::vector<BigInt> acc(static_cast<std::size_t>(ball.size()));
    cur[static_cast<std::size_t>(ball.base())] = 1; // n = 0: point mass at the base coset
    BigInt cur_leak = 0, acc_leak = 0;
    bool truncated = false;
    int denial_distance = radius + 1;

    auto ensure_size = [&](long long n) {
        if (static_cast<long long>(cur.size()) < n) {
            cur.resize(static_cast<std::size_t>(n));
            acc.resize(static_cast<std::size_t>(n));
        }
    };

    for (long long n = 1; n <= N; ++n) {
        std::vector<BigInt> nxt(cur.size());
        BigInt step_leak = cur_leak * denom; // leaked mass stays leaked
        for (long long v = 0; v < static_cast<long long>(cur.size()); ++v) {
            if (cur[static_cast<std::size_t>(v)] == 0) continue;
            for (auto& [g, weight] : jumps) {
                long long state = v;
                bool lost = false;
                for (Letter x : g.letters()) {
                    auto t = ball.try_trace_letter(state, x);
                    if (!t) {
                        // Budget frontier: this jump is absorbed.
                        truncated = true;
                        denial_distance = std::min<int>(denial_distance,
                                                        ball.distance(state) + 1);
                        lost = true;
                        break;
                    }
                    state = *t;
                }
                BigInt contribution = cur[static_cast<std::size_t>(v)] * weight;
                if (lost || ball.distance(state) > radius) {
                    step_leak += contribution;
                } else {
                    ensure_size(state + 1);
                    if (static_cast<std::size_t>(state) >= nxt.size())
                        nxt.resize(static_cast<std::size_t>(state) + 1);
                    nxt[static_cast<std::size_t>(state)] += contribution;
                }
            }
        }
        if (truncated && !allow_truncation)
            throw ResourceError("coset support exploded past the vertex budget of " +
                                std::to_string(vertex_budget));
        ensure_size(static_cast<long long>(nxt.size()));
        cur = std::move(nxt);
        cur.resize(acc.size());
        cur_leak = step_leak;
        // Cesaro accumulator: acc_n = sum_{i<=n} cur_i * D^{n-i}.
        for (auto& a : acc) a *= denom;
        for (std::size_t v = 0; v < cur.size(); ++v) acc[v] += cur[v];
        acc_leak = acc_leak * denom + cur_leak;
    }

    BigInt scale = N;
    for (long long n = 0; n < N; ++n) scale *= denom;

    CosetMeasure out;
    out.cesaro_steps = N;
    out.window_radius = radius;
    out.truncated = truncated;
    out.effective_radius = truncated ? std::min(radius, denial_distance - 1) : radius;
    out.tolerance = tolerance;
    out.leaked_mass = Rational(acc_leak, scale);

    BigInt best = 0;
    for (std::size_t v = 0; v < acc.size(); ++v) best = std::max(best, acc[v]);
    std::vector<BigInt> outside(static_cast<std::size_t>(out.effective_radius) + 1, acc_leak);
    for (long long v = 0; v < static_cast<long long>(acc.size()); ++v) {
        if (acc[static_cast<std::size_t>(v)] == 0) continue;
        int d = ball.distance(v);
        out.masses.emplace_back(v, d, ball.representative(v),
                                Rational(acc[static_cast<std::size_t>(v)], scale));
        if (best > 0 && acc[static_cast<std::size_t>(v)] == best) out.argmax_states.push_back(v);
        for (int r = 0; r <= out.effective_radius && r < d; ++r)
            outside[static_cast<std::size_t>(r)] += acc[static_cast<std::size_t>(v)];
    }
    out.outside_mass.reserve(outside.size());
    for (auto& o : outside) out.outside_mass.emplace_back(Rational(o, scale));
    for (int r = 0; r <= out.effective_radius; ++r) {
        if (out.outside_mass[static_cast<std::size_t>(r)] < tolerance) {
            out.finite_support_radius = r;
            break;
        }
    }
    out.finite_support = out.finite_support_radius >= 0 &&
                         out.outside_mass[static_cast<std::size_t>(out.effective_radius)] < tolerance;
    return out;
}

} // namespace freewalk
