#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "freewalk/measure.hpp"
#include "freewalk/rng.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

// Lane indices for derived rng streams.
inline constexpr std::uint64_t kLaneForward = 0;
inline constexpr std::uint64_t kLaneBackward = 1;

/// Increment stream of one walk trial: i.i.d. draws from m on the derived
/// stream (seed, trial, lane).
class WalkStream {
public:
    WalkStream(const StepD& m, std::uint64_t seed, std::uint64_t trial, std::uint64_t lane = kLaneForward)
        : sampler_(m), rng_(derive_rng(seed, trial, lane)) {}

    const Word& next() { return current_ = sampler_(rng_); }

private:
    Sampler sampler_;
    Xoshiro256ss rng_;
    Word current_;
};

/// Walk position w_n maintained incrementally, with constant-time tracking of
/// common-prefix overlaps against registered reference words.  Right-
/// multiplying by a bounded-length step touches only the tail of the word, so
/// a full trajectory costs O(total step length).
class PositionCursor {
public:
    int add_tracker(Word ref) {
        trackers_.push_back(Tracker{std::move(ref), 0, 0});
        Tracker& t = trackers_.back();
        t.overlap = recompute_overlap(t.ref);
        t.min_overlap = t.overlap;
        return static_cast<int>(trackers_.size()) - 1;
    }

    void step(const Word& g) {
        for (Letter x : g.letters()) {
            if (!ls_.empty() && ls_.back() == inverse_letter(x)) pop_letter();
            else push_letter(x);
        }
        for (Tracker& t : trackers_) t.min_overlap = std::min(t.min_overlap, t.overlap);
    }

    int length() const { return static_cast<int>(ls_.size()); }
    std::span<const Letter> letters() const { return ls_; }
    Word word() const { return Word::reduced(ls_); }

    int overlap(int id) const { return trackers_[static_cast<std::size_t>(id)].overlap; }
    int min_overlap(int id) const { return trackers_[static_cast<std::size_t>(id)].min_overlap; }
    void reset_min(int id) {
        auto& t = trackers_[static_cast<std::size_t>(id)];
        t.min_overlap = t.overlap;
    }

private:
    struct Tracker {
        Word ref;
        int overlap;     // common prefix length of the current position with ref
        int min_overlap; // minimum overlap since the last reset, sampled at step ends
    };

    void push_letter(Letter x) {
        int len = static_cast<int>(ls_.size());
        for (Tracker& t : trackers_)
            if (t.overlap == len && len < t.ref.size() && t.ref[len] == x) ++t.overlap;
        ls_.push_back(x);
    }

    void pop_letter() {
        ls_.pop_back();
        int len = static_cast<int>(ls_.size());
        for (Tracker& t : trackers_)
            if (t.overlap > len) t.overlap = len;
    }

    int recompute_overlap(const Word& ref) const {
        int n = std::min(static_cast<int>(ls_.size()), ref.size());
        int i = 0;
        while (i < n && ls_[static_cast<std::size_t>(i)] == ref[i]) ++i;
        return i;
    }

    std::vector<Letter> ls_;
    std::vector<Tracker> trackers_;
};

/// A materialized walk realization: increments g_1..g_N plus the length
/// profile |w_n| and the final position.  Positions are reconstructed on
/// demand (consecutive positions share long prefixes, so storing all of them
/// would be quadratic).
struct PathSample {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::vector<Word> increments;
    std::vector<std::int32_t> lengths; // lengths[n-1] = |w_n|
    Word final_position;

    int steps() const { return static_cast<int>(increments.size()); }

    /// All positions w_1..w_N, materialized.  Intended for short walks.
    std::vector<Word> positions() const {
        std::vector<Word> out;
        out.reserve(increments.size());
        PositionCursor cur;
        for (const Word& g : increments) {
            cur.step(g);
            out.push_back(cur.word());
        }
        return out;
    }

    /// Calls f(n, cursor) after each step n = 1..N.
    template <class F>
    void for_each_position(F&& f) const {
        PositionCursor cur;
        for (std::size_t n = 0; n < increments.size(); ++n) {
            cur.step(increments[n]);
            f(static_cast<int>(n) + 1, cur);
        }
    }
};

inline PathSample sample_path(const StepD& m, int steps, std::uint64_t seed,
                              std::uint64_t trial = 0, std::uint64_t lane = kLaneForward) {
    if (steps < 1) throw InputError("walk length must be >= 1");
    PathSample path;
    path.seed = seed;
    path.trial = trial;
    path.increments.reserve(static_cast<std::size_t>(steps));
    path.lengths.reserve(static_cast<std::size_t>(steps));
    WalkStream stream(m, seed, trial, lane);
    PositionCursor cur;
    for (int n = 0; n < steps; ++n) {
        const Word& g = stream.next();
        cur.step(g);
        path.increments.push_back(g);
        path.lengths.push_back(cur.length());
    }
    path.final_position = cur.word();
    return path;
}

/// Forward and backward halves of a two-sided walk.  The backward half
/// realizes g_0^{-1} g_{-1}^{-1} ... as a forward walk with the reflected
/// step law, on an rng stream independent of the forward one.
struct BilateralSample {
    PathSample forward;
    PathSample backward;
};

inline BilateralSample sample_bilateral(const StepD& m, int steps, std::uint64_t seed,
                                        std::uint64_t trial = 0, int backward_steps = -1) {
    if (backward_steps < 0) backward_steps = steps;
    return BilateralSample{
        sample_path(m, steps, seed, trial, kLaneForward),
        sample_path(m.reflect(), backward_steps, seed, trial, kLaneBackward),
    };
}

struct DriftEstimate {
    double mean = 0.0;
    double ci_halfwidth = 0.0;
    int steps = 0;
    int trials = 0;
};

namespace detail {

// Fixed-order compensated (Kahan) sum: the reduction order is the trial
// order, independent of how trials were scheduled across threads.
inline double kahan_sum(std::span<const double> xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

template <class F>
void parallel_trials(long long trials, int parallel, F&& per_trial) {
    if (parallel <= 1) {
        for (long long t = 0; t < trials; ++t) per_trial(t);
        return;
    }
    std::vector<std::thread> pool;
    long long chunk = (trials + parallel - 1) / parallel;
    for (int w = 0; w < parallel; ++w) {
        long long lo = w * chunk, hi = std::min<long long>(trials, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &per_trial] {
            for (long long t = lo; t < hi; ++t) per_trial(t);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Monte Carlo estimate of the linear drift lim |w_n|/n, with a normal-
/// approximation confidence interval over independent trials.
inline DriftEstimate drift_estimate(const StepD& m, int steps, int trials, std::uint64_t seed,
                                    int parallel = 1) {
    if (steps < 100) throw InputError("drift estimation needs at least 100 steps");
    if (trials < 10) throw InputError("drift estimation needs at least 10 trials");
    std::vector<double> values(static_cast<std::size_t>(trials));
    detail::parallel_trials(trials, parallel, [&](long long t) {
        WalkStream stream(m, seed, static_cast<std::uint64_t>(t), kLaneForward);
        PositionCursor cur;
        for (int n = 0; n < steps; ++n) cur.step(stream.next());
        values[static_cast<std::size_t>(t)] = static_cast<double>(cur.length()) / steps;
    });
    double mean = detail::kahan_sum(values) / trials;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double sd = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
    return DriftEstimate{mean, 1.96 * sd / std::sqrt(static_cast<double>(trials)), steps, trials};
}

/// Escape-to-infinity surrogate: the minimum of |w_n| over the final tenth of
/// the walk exceeds the maximum over the first tenth.  A labeled heuristic;
/// the almost-sure statement has no finite-sample certificate.
inline bool escape_check(std::span<const std::int32_t> lengths) {
    if (lengths.empty()) return false;
    std::size_t tenth = std::max<std::size_t>(1, lengths.size() / 10);
    std::int32_t head_max = 0;
    for (std::size_t i = 0; i < tenth; ++i) head_max = std::max(head_max, lengths[i]);
    std::int32_t tail_min = lengths.back();
    for (std::size_t i = lengths.size() - tenth; i < lengths.size(); ++i)
        tail_min = std::min(tail_min, lengths[i]);
    return tail_min > head_max;
}

inline bool escape_check(const PathSample& path) { return escape_check(path.lengths); }

} // namespace freewalk
