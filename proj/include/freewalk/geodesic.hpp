#pragma once

#include <algorithm>
#include <optional>

#include "freewalk/errors.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

/// Quasi-geodesic constants of the tree model.  Statistics code is written
/// against these named constants rather than baked-in literals: geodesics
/// distort distances by at most a multiplicative `stretch` and additive
/// `slack`, and two rays with the same endpoint eventually stay within
/// `ray_gap` of each other.  On a tree all three are trivial.
struct GeodesicModel {
    double stretch = 1.0;
    double slack = 0.0;
    double ray_gap = 0.0;
};

inline constexpr GeodesicModel kTreeModel{1.0, 0.0, 0.0};

enum class GermSource { exact, estimated };

/// A point of the tree boundary known to finite resolution: the cylinder of
/// all infinite reduced words extending `prefix`.  Operations must fail
/// loudly when the stored depth is insufficient, never guess beyond it.
struct BoundaryPoint {
    Word prefix;
    GermSource source = GermSource::exact;

    int depth() const { return prefix.size(); }
};

/// The unique bi-infinite geodesic between two distinct boundary points of a
/// tree.  It descends the y^- ray to the branch vertex (the pivot, which is
/// also the point of the geodesic closest to the basepoint) and ascends the
/// y^+ ray.  pivot_distance equals the Gromov product of the endpoints.
struct TreeGeodesic {
    BoundaryPoint minus;
    BoundaryPoint plus;
    Word pivot;
    int pivot_distance = 0;
};

/// Tree instance of the quasi-geodesic assignment: between distinct boundary
/// points there is exactly one geodesic (multiplicative constant 1, additive
/// constant 0); on the diagonal the assignment is empty.
inline TreeGeodesic geodesic_between(const BoundaryPoint& yminus, const BoundaryPoint& yplus) {
    int c = Word::common_prefix_length(yminus.prefix, yplus.prefix);
    if (c == yminus.depth() && c == yplus.depth())
        throw EmptyGeodesicError("no geodesic between coincident boundary germs");
    if (c == yminus.depth() || c == yplus.depth())
        throw ResolutionError(
            "one germ is a prefix of the other at the available depth; "
            "cannot certify the boundary points are distinct");
    return TreeGeodesic{yminus, yplus, yminus.prefix.prefix(c), c};
}

namespace detail {

// Distance from g to the ray that starts at the pivot (depth c) and follows
// `germ`.  Returns nullopt when the answer depends on the ray beyond the
// germ's stored depth.
inline std::optional<int> dist_to_ray(const Word& g, const Word& germ, int c) {
    int t = Word::common_prefix_length(g, germ);
    if (t < c) return g.size() + c - 2 * t; // nearest ray vertex is the pivot
    if (t == germ.size() && g.size() > t) return std::nullopt;
    return g.size() - t;
}

} // namespace detail

/// Exact tree distance from the vertex g to the geodesic's vertex set (or to
/// its positive half starting at the pivot).  Throws ResolutionError when the
/// stored germ depths cannot determine the distance.
inline int dist_to_geodesic(const Word& g, const TreeGeodesic& sigma,
                            bool positive_half_only = false) {
    auto dplus = detail::dist_to_ray(g, sigma.plus.prefix, sigma.pivot_distance);
    if (positive_half_only) {
        if (!dplus)
            throw ResolutionError("positive ray too shallow to determine distance");
        return *dplus;
    }
    auto dminus = detail::dist_to_ray(g, sigma.minus.prefix, sigma.pivot_distance);
    if (dplus && dminus) return std::min(*dplus, *dminus);
    // One side undetermined: the determined side still decides when it
    // attains 0, the global minimum.
    if (dplus && *dplus == 0) return 0;
    if (dminus && *dminus == 0) return 0;
    throw ResolutionError("germ depth insufficient to determine distance to geodesic");
}

/// Swapping endpoints reverses orientation but keeps the vertex set and pivot.
inline TreeGeodesic flipped(const TreeGeodesic& sigma) {
    return TreeGeodesic{sigma.plus, sigma.minus, sigma.pivot, sigma.pivot_distance};
}

} // namespace freewalk
