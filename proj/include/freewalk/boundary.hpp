#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "freewalk/geodesic.hpp"
#include "freewalk/measure.hpp"
#include "freewalk/rational.hpp"
#include "freewalk/walk.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

// --- limit extraction ------------------------------------------------------

enum class ExtractFailure { none, too_short, unstable };

struct ExtractOutcome {
    std::optional<BoundaryPoint> germ; // full confirmed depth (>= the requested minimum)
    ExtractFailure failure = ExtractFailure::none;
    int horizon_index = 0; // n* = N - floor(horizon * N)
};

namespace detail {

// Extraction core shared by the streaming and materialized variants: snapshot
// w_{n*}, then confirm how deep a prefix every later position retains.
struct RawExtract {
    Word snapshot;    // w_{n*}
    int stable_depth; // min over n in (n*, N] of <w_n, w_{n*}>
    int horizon_index;
};

template <class NextFn>
RawExtract extract_raw(NextFn&& next, int steps, double horizon_fraction) {
    if (horizon_fraction < 0.0 || horizon_fraction > 1.0)
        throw InputError("horizon fraction must lie in [0, 1]");
    int n_star = steps - static_cast<int>(std::floor(horizon_fraction * steps));
    PositionCursor cur;
    for (int n = 1; n <= n_star; ++n) cur.step(next());
    RawExtract raw;
    raw.snapshot = cur.word();
    raw.horizon_index = n_star;
    int tid = cur.add_tracker(raw.snapshot);
    for (int n = n_star + 1; n <= steps; ++n) cur.step(next());
    raw.stable_depth = cur.min_overlap(tid);
    return raw;
}

inline ExtractOutcome classify_extract(const RawExtract& raw, int min_depth) {
    ExtractOutcome out;
    out.horizon_index = raw.horizon_index;
    if (raw.snapshot.size() < min_depth) {
        out.failure = ExtractFailure::too_short;
        return out;
    }
    if (raw.stable_depth < min_depth) {
        out.failure = ExtractFailure::unstable;
        return out;
    }
    out.germ = BoundaryPoint{raw.snapshot.prefix(raw.stable_depth), GermSource::estimated};
    return out;
}

} // namespace detail

/// Estimates the walk's boundary limit from one trial: the prefix of
/// w_{n*} retained by every later position, n* set by the horizon fraction.
/// The returned germ carries its full confirmed depth; failure if that depth
/// is below `min_depth`.  Failures are reported, never silently dropped.
inline ExtractOutcome extract_limit(const StepD& m, int steps, std::uint64_t seed,
                                    std::uint64_t trial, int min_depth,
                                    double horizon_fraction = 0.5,
                                    std::uint64_t lane = kLaneForward) {
    WalkStream stream(m, seed, trial, lane);
    auto raw = detail::extract_raw([&] { return stream.next(); }, steps, horizon_fraction);
    return detail::classify_extract(raw, min_depth);
}

inline ExtractOutcome extract_limit(const PathSample& path, int min_depth,
                                    double horizon_fraction = 0.5) {
    std::size_t i = 0;
    auto raw = detail::extract_raw([&]() -> const Word& { return path.increments[i++]; },
                                   path.steps(), horizon_fraction);
    return detail::classify_extract(raw, min_depth);
}

// --- cylinder measures -----------------------------------------------------

/// Empirical (or exact) measure on depth-L boundary cylinders.  Masses sum to
/// 1 minus the failure deficit; keys are reduced words of length exactly L.
template <class P>
struct CylinderMeasure {
    int depth = 0;
    long long trials = 0;   // 0 for analytic measures
    long long failures = 0; // extraction failures (the mass deficit)
    std::map<Word, P> masses;

    P total_mass() const {
        P s(0);
        for (auto& [w, p] : masses) s += p;
        return s;
    }

    P deficit() const { return P(1) - total_mass(); }

    P mass(const Word& w) const {
        auto it = masses.find(w);
        return it == masses.end() ? P(0) : it->second;
    }
};

/// One pass of walks, classified at several cylinder depths at once.
inline std::vector<CylinderMeasure<double>> empirical_cylinder_measures(
    const StepD& m, std::span<const int> depths, long long trials, int steps, std::uint64_t seed,
    double horizon_fraction = 0.5, int parallel = 1) {
    for (int L : depths)
        if (L < 1) throw InputError("cylinder depth must be >= 1");

    struct Acc {
        std::vector<std::map<Word, long long>> counts;
        std::vector<long long> failures;
    };
    int nd = static_cast<int>(depths.size());
    std::mutex merge_mutex;
    Acc total{std::vector<std::map<Word, long long>>(static_cast<std::size_t>(nd)),
              std::vector<long long>(static_cast<std::size_t>(nd), 0)};

    int threads = std::max(1, parallel);
    long long chunk = (trials + threads - 1) / threads;
    auto run_range = [&](long long lo, long long hi) {
        Acc local{std::vector<std::map<Word, long long>>(static_cast<std::size_t>(nd)),
                  std::vector<long long>(static_cast<std::size_t>(nd), 0)};
        for (long long t = lo; t < hi; ++t) {
            WalkStream stream(m, seed, static_cast<std::uint64_t>(t), kLaneForward);
            auto raw = detail::extract_raw([&] { return stream.next(); }, steps, horizon_fraction);
            for (int i = 0; i < nd; ++i) {
                int L = depths[static_cast<std::size_t>(i)];
                if (raw.snapshot.size() < L || raw.stable_depth < L)
                    ++local.failures[static_cast<std::size_t>(i)];
                else
                    ++local.counts[static_cast<std::size_t>(i)][raw.snapshot.prefix(L)];
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (int i = 0; i < nd; ++i) {
            total.failures[static_cast<std::size_t>(i)] += local.failures[static_cast<std::size_t>(i)];
            for (auto& [w, c] : local.counts[static_cast<std::size_t>(i)])
                total.counts[static_cast<std::size_t>(i)][w] += c;
        }
    };
    if (threads == 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            long long lo = w * chunk, hi = std::min(trials, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<CylinderMeasure<double>> out;
    for (int i = 0; i < nd; ++i) {
        CylinderMeasure<double> cm;
        cm.depth = depths[static_cast<std::size_t>(i)];
        cm.trials = trials;
        cm.failures = total.failures[static_cast<std::size_t>(i)];
        for (auto& [w, c] : total.counts[static_cast<std::size_t>(i)])
            cm.masses[w] = static_cast<double>(c) / static_cast<double>(trials);
        out.push_back(std::move(cm));
    }
    return out;
}

inline CylinderMeasure<double> empirical_cylinder_measure(const StepD& m, int depth,
                                                          long long trials, int steps,
                                                          std::uint64_t seed,
                                                          double horizon_fraction = 0.5,
                                                          int parallel = 1) {
    int depths[1] = {depth};
    return empirical_cylinder_measures(m, depths, trials, steps, seed, horizon_fraction,
                                       parallel)[0];
}

/// The exact hitting measure of the uniform nearest-neighbor walk on the
/// (2k)-regular tree: mass (1/2k)(1/(2k-1))^{L-1} on every depth-L cylinder.
inline CylinderMeasure<Rational> nearest_neighbor_harmonic_measure(const Alphabet& alpha,
                                                                   int depth) {
    if (depth < 1) throw InputError("cylinder depth must be >= 1");
    CylinderMeasure<Rational> cm;
    cm.depth = depth;
    Rational per(1, 2 * alpha.rank);
    for (int i = 1; i < depth; ++i) per /= (2 * alpha.rank - 1);
    for (const Word& w : reduced_ball(alpha, depth))
        if (w.size() == depth) cm.masses[w] = per;
    return cm;
}

/// Pushforward of a depth-L measure to a shallower depth (cylinder
/// consistency).
template <class P>
CylinderMeasure<P> restrict_to_depth(const CylinderMeasure<P>& cm, int depth) {
    if (depth > cm.depth) throw InputError("cannot deepen a cylinder measure");
    CylinderMeasure<P> out;
    out.depth = depth;
    out.trials = cm.trials;
    out.failures = cm.failures;
    for (auto& [w, p] : cm.masses) out.masses[w.prefix(depth)] += p;
    return out;
}

namespace detail {

template <class P>
void add_reduced_extensions(std::map<Word, P>& target, const Word& u, int depth, P share,
                            const Alphabet& alpha) {
    if (u.size() == depth) {
        target[u] += share;
        return;
    }
    for (int i = 1; i <= alpha.rank; ++i) {
        for (Letter x : {static_cast<Letter>(i), static_cast<Letter>(-i)}) {
            if (!u.empty() && u[u.size() - 1] == inverse_letter(x)) continue;
            std::vector<Letter> ls(u.letters().begin(), u.letters().end());
            ls.push_back(x);
            add_reduced_extensions(target, Word::reduced(ls), depth, share, alpha);
        }
    }
}

} // namespace detail

template <class P>
struct StationarityResult {
    P residual;           // TV(cm, m * cm)
    P redistributed_mass; // mass that landed on germs shallower than the depth
};

/// Total-variation residual of the stationarity identity m * nu = nu at fixed
/// cylinder depth.  The tree action translates cylinders exactly; a translate
/// that becomes shallower than the depth is spread uniformly over its reduced
/// extensions, and that redistributed mass is reported.  Requires the depth
/// to exceed the longest support word, which also makes the redistribution
/// rule exact for measures with uniform conditional tails.
template <class P>
StationarityResult<P> stationarity_residual(const StepDistribution<P>& m,
                                            const CylinderMeasure<P>& cm) {
    int bound = m.max_word_length();
    if (cm.depth <= bound)
        throw InputError("cylinder depth " + std::to_string(cm.depth) +
                         " too shallow for support words of length " + std::to_string(bound));
    const Alphabet& alpha = m.alphabet();
    long long ext_count = 1;
    std::map<Word, P> push;
    P redistributed(0);
    for (auto& [g, pg] : m.entries()) {
        for (auto& [w, mass] : cm.masses) {
            Word u = g * w;
            if (u.size() >= cm.depth) {
                push[u.prefix(cm.depth)] += pg * mass;
            } else {
                ext_count = 1;
                for (int i = u.size(); i < cm.depth; ++i) ext_count *= 2 * alpha.rank - 1;
                P share = pg * mass / P(ext_count);
                detail::add_reduced_extensions(push, u, cm.depth, share, alpha);
                redistributed += pg * mass;
            }
        }
    }
    P tv(0);
    auto abs_diff = [](const P& a, const P& b) { return a > b ? a - b : b - a; };
    for (auto& [w, p] : cm.masses) {
        auto it = push.find(w);
        tv += abs_diff(p, it == push.end() ? P(0) : it->second);
    }
    for (auto& [w, p] : push)
        if (!cm.masses.count(w)) tv += p;
    return StationarityResult<P>{tv / P(2), redistributed};
}

/// Half the l1 distance between two cylinder measures at the same depth.  A
/// lower bound for the total variation of the underlying boundary measures.
template <class P>
P tv_distance(const CylinderMeasure<P>& a, const CylinderMeasure<P>& b) {
    if (a.depth != b.depth)
        throw InputError("total variation requires equal cylinder depths (" +
                         std::to_string(a.depth) + " vs " + std::to_string(b.depth) + ")");
    P tv(0);
    auto abs_diff = [](const P& x, const P& y) { return x > y ? x - y : y - x; };
    for (auto& [w, p] : a.masses) tv += abs_diff(p, b.mass(w));
    for (auto& [w, p] : b.masses)
        if (!a.masses.count(w)) tv += p;
    return tv / P(2);
}

// --- non-atomicity diagnostic ----------------------------------------------

struct AtomDiagnostic {
    struct Row {
        int depth;
        double max_mass;
        Word heaviest;
    };
    std::vector<Row> rows;
    double threshold = 0.2;
    bool atom_suspected = false; // max mass plateaued above the threshold
};

inline AtomDiagnostic atom_diagnostic(std::span<const CylinderMeasure<double>> nested,
                                      double threshold = 0.2) {
    AtomDiagnostic diag;
    diag.threshold = threshold;
    int prev_depth = 0;
    for (const auto& cm : nested) {
        if (cm.depth <= prev_depth) throw InputError("atom diagnostic expects increasing depths");
        prev_depth = cm.depth;
        AtomDiagnostic::Row row{cm.depth, 0.0, Word()};
        for (auto& [w, p] : cm.masses)
            if (p > row.max_mass) {
                row.max_mass = p;
                row.heaviest = w;
            }
        diag.rows.push_back(row);
    }
    for (std::size_t i = 1; i < diag.rows.size(); ++i) {
        bool plateau = diag.rows[i].max_mass >= 0.95 * diag.rows[i - 1].max_mass;
        if (plateau && diag.rows[i].max_mass >= threshold) diag.atom_suspected = true;
    }
    return diag;
}

} // namespace freewalk
