#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "freewalk/boundary.hpp"
#include "freewalk/geodesic.hpp"
#include "freewalk/measure.hpp"
#include "freewalk/schreier.hpp"
#include "freewalk/walk.hpp"

namespace freewalk {

/// One tracking statistic at one radius.  `fraction` = qualifying / horizon;
/// steps whose distance is undetermined at the available ray depth count as
/// failures and are excluded from the numerator only.
struct TrackingReport {
    int radius = 0;
    long long horizon = 0;
    long long qualifying = 0;
    long long failures = 0;
    double fraction = 0.0;
};

/// Shared setup for the two geodesic-tracking statistics: both boundary
/// germs, the pivot, and the walk-revealed positive ray.
///
/// The positive ray is realized as the geodesic from the pivot through the
/// final position w_N.  Its initial segment (up to `stable_depth`) is the
/// confirmed limit germ; beyond that it is the walk's own record of where it
/// is heading, which is the only finite-sample witness of the limit ray deep
/// enough to measure distances for positions that outrun the confirmed germ.
struct RayContext {
    bool ok = false;
    std::string failure_reason;
    ExtractOutcome forward;
    ExtractOutcome backward;
    int pivot_distance = 0; // depth of the branch vertex between the two germs
    Word ray;               // w_N: the positive ray read off the walk
    int stable_depth = 0;   // confirmed depth of the forward germ
    bool escaped = false;
};

inline RayContext build_ray_context(const StepD& m, int steps, std::uint64_t seed,
                                    std::uint64_t trial, int germ_depth,
                                    double horizon_fraction = 0.5, int backward_steps = 2000) {
    if (germ_depth < 1) throw InputError("germ depth must be >= 1");
    RayContext ctx;

    WalkStream fwd(m, seed, trial, kLaneForward);
    int n_star = steps - static_cast<int>(std::floor(horizon_fraction * steps));
    PositionCursor cur;
    std::vector<std::int32_t> lengths;
    lengths.reserve(static_cast<std::size_t>(steps));
    for (int n = 1; n <= n_star; ++n) {
        cur.step(fwd.next());
        lengths.push_back(cur.length());
    }
    Word snapshot = cur.word();
    int tid = cur.add_tracker(snapshot);
    for (int n = n_star + 1; n <= steps; ++n) {
        cur.step(fwd.next());
        lengths.push_back(cur.length());
    }
    detail::RawExtract raw{snapshot, cur.min_overlap(tid), n_star};
    ctx.forward = detail::classify_extract(raw, germ_depth);
    ctx.ray = cur.word();
    ctx.stable_depth = raw.stable_depth;
    ctx.escaped = escape_check(lengths);

    ctx.backward = extract_limit(m.reflect(), backward_steps, seed, trial, germ_depth,
                                 horizon_fraction, kLaneBackward);

    if (ctx.forward.failure != ExtractFailure::none) {
        ctx.failure_reason = "forward germ extraction failed";
        return ctx;
    }
    if (ctx.backward.failure != ExtractFailure::none) {
        ctx.failure_reason = "backward germ extraction failed";
        return ctx;
    }
    try {
        TreeGeodesic sigma = geodesic_between(*ctx.backward.germ, *ctx.forward.germ);
        ctx.pivot_distance = sigma.pivot_distance;
    } catch (const Error& e) {
        ctx.failure_reason = e.what();
        return ctx;
    }
    ctx.ok = true;
    return ctx;
}

namespace detail {

inline std::vector<TrackingReport> reports_from_histogram(std::span<const int> radii,
                                                          std::span<const long long> hist,
                                                          long long horizon, long long failures,
                                                          bool strict) {
    std::vector<TrackingReport> out;
    for (int r : radii) {
        long long q = 0;
        long long cap = strict ? std::min<long long>(r, static_cast<long long>(hist.size()))
                               : std::min<long long>(r + 1, static_cast<long long>(hist.size()));
        for (long long d = 0; d < cap; ++d) q += hist[static_cast<std::size_t>(d)];
        out.push_back(TrackingReport{r, horizon, q, failures,
                                     static_cast<double>(q) / static_cast<double>(horizon)});
    }
    return out;
}

} // namespace detail

/// Occupation statistic of the walk near its own limit geodesic: the fraction
/// of steps n <= N whose position lies within distance R of the positive ray.
/// Exact per path; non-decreasing in R.  Steps that run past the end of the
/// revealed ray (distance undetermined) are counted as failures.
inline std::vector<TrackingReport> walk_near_ray_fractions(
    const StepD& m, int steps, std::uint64_t seed, std::uint64_t trial, int germ_depth,
    std::span<const int> radii, double horizon_fraction = 0.5, int backward_steps = 2000) {
    RayContext ctx = build_ray_context(m, steps, seed, trial, germ_depth, horizon_fraction,
                                       backward_steps);
    if (!ctx.ok) throw ResolutionError("ray construction failed: " + ctx.failure_reason);

    int max_radius = 0;
    for (int r : radii) {
        if (r < 0) throw InputError("radius must be >= 0");
        max_radius = std::max(max_radius, r);
    }
    std::vector<long long> hist(static_cast<std::size_t>(max_radius) + 2, 0);
    long long failures = 0;

    WalkStream fwd(m, seed, trial, kLaneForward);
    PositionCursor cur;
    int tid = cur.add_tracker(ctx.ray);
    int c = ctx.pivot_distance;
    for (int n = 1; n <= steps; ++n) {
        cur.step(fwd.next());
        int a = cur.length();
        int t = cur.overlap(tid);
        if (t == ctx.ray.size() && a > t) {
            ++failures; // past the revealed ray end; distance undetermined
            continue;
        }
        long long d = t >= c ? a - t : a + c - 2LL * t;
        ++hist[static_cast<std::size_t>(std::min<long long>(d, max_radius + 1))];
    }
    return detail::reports_from_histogram(radii, hist, steps, failures, /*strict=*/false);
}

/// Coverage statistic of the limit geodesic near the walk: the fraction of
/// the first T ray vertices (from the pivot) within distance R of the
/// position set {w_n : 1 <= n <= N}.  Computed exactly via a distance
/// transform along the ray.
inline std::vector<TrackingReport> ray_near_walk_fractions(
    const StepD& m, int steps, std::uint64_t seed, std::uint64_t trial, int germ_depth,
    long long T, std::span<const int> radii, double horizon_fraction = 0.5,
    int backward_steps = 2000) {
    RayContext ctx = build_ray_context(m, steps, seed, trial, germ_depth, horizon_fraction,
                                       backward_steps);
    if (!ctx.ok) throw ResolutionError("ray construction failed: " + ctx.failure_reason);
    if (T < 1) throw InputError("ray horizon T must be >= 1");
    int c = ctx.pivot_distance;
    if (c + T - 1 > ctx.stable_depth)
        throw ResolutionError("ray horizon T=" + std::to_string(T) +
                              " exceeds the confirmed germ depth " +
                              std::to_string(ctx.stable_depth));

    const long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> dist(static_cast<std::size_t>(T), inf);
    auto plant = [&](long long apex, long long value) {
        long long j = std::clamp<long long>(apex, c, c + T - 1);
        value += std::llabs(apex - j); // distance grows with slope 1 past the clamp
        auto& slot = dist[static_cast<std::size_t>(j - c)];
        slot = std::min(slot, value);
    };

    WalkStream fwd(m, seed, trial, kLaneForward);
    PositionCursor cur;
    int tid = cur.add_tracker(ctx.ray);
    plant(0, 0); // w_0 = o: the walk starts on the ray's 0-end side
    for (int n = 1; n <= steps; ++n) {
        cur.step(fwd.next());
        long long a = cur.length();
        long long t = cur.overlap(tid);
        plant(t, a - t);
    }
    for (long long j = 1; j < T; ++j)
        dist[static_cast<std::size_t>(j)] =
            std::min(dist[static_cast<std::size_t>(j)], dist[static_cast<std::size_t>(j - 1)] + 1);
    for (long long j = T - 2; j >= 0; --j)
        dist[static_cast<std::size_t>(j)] =
            std::min(dist[static_cast<std::size_t>(j)], dist[static_cast<std::size_t>(j + 1)] + 1);

    int max_radius = 0;
    for (int r : radii) {
        if (r < 0) throw InputError("radius must be >= 0");
        max_radius = std::max(max_radius, r);
    }
    std::vector<long long> hist(static_cast<std::size_t>(max_radius) + 2, 0);
    for (long long j = 0; j < T; ++j) {
        long long d = dist[static_cast<std::size_t>(j)];
        ++hist[static_cast<std::size_t>(std::min<long long>(d, max_radius + 1))];
    }
    return detail::reports_from_histogram(radii, hist, T, 0, /*strict=*/false);
}

/// Fraction of steps whose position lies within Schreier distance < R of the
/// subgroup orbit H o (strict inequality).  Exact; extends the coset graph
/// lazily and propagates its budget error.
inline std::vector<TrackingReport> orbit_proximity_fractions(const StepD& m, int steps,
                                                             std::uint64_t seed,
                                                             std::uint64_t trial,
                                                             SchreierBall& ball,
                                                             std::span<const int> radii) {
    int max_radius = 0;
    for (int r : radii) {
        if (r < 0) throw InputError("radius must be >= 0");
        max_radius = std::max(max_radius, r);
    }
    std::vector<long long> hist(static_cast<std::size_t>(max_radius) + 2, 0);
    WalkStream stream(m, seed, trial, kLaneForward);
    long long state = ball.base();
    for (int n = 1; n <= steps; ++n) {
        state = ball.trace(state, stream.next());
        long long d = ball.distance(state);
        ++hist[static_cast<std::size_t>(std::min<long long>(d, max_radius + 1))];
    }
    return detail::reports_from_histogram(radii, hist, steps, 0, /*strict=*/true);
}

} // namespace freewalk
