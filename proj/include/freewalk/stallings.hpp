#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <stack>
#include <tuple>
#include <utility>
#include <vector>

#include "freewalk/errors.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

namespace detail {
// Edge-direction encoding: generator i occupies slots 2(i-1) (positive) and
// 2(i-1)+1 (inverse).  Flipping the low bit inverts the direction.
inline int dir_of(Letter x) { return 2 * ((x > 0 ? x : -x) - 1) + (x < 0 ? 1 : 0); }
inline int inv_dir(int d) { return d ^ 1; }
inline Letter letter_of_dir(int d) {
    Letter idx = static_cast<Letter>(d / 2 + 1);
    return (d & 1) ? inverse_letter(idx) : idx;
}
} // namespace detail

/// Folded core automaton of a finitely generated subgroup of F_k.
///
/// Vertices are numbered canonically by BFS from the base vertex (always 0),
/// so two equal subgroups produce byte-identical serializations.  The graph
/// is deterministic (at most one edge per vertex and direction) and core
/// (every non-base vertex has degree >= 2).  Its base-rooted reduced loop
/// language is exactly the subgroup.
class StallingsGraph {
public:
    /// Folds the flower of the given words.  The result represents the
    /// subgroup they generate as a group (inverses come for free).
    static StallingsGraph fold(const Alphabet& alpha, std::span<const Word> generators) {
        if (generators.empty()) throw InputError("fold requires a nonempty generator list");
        Builder b(alpha);
        for (const Word& g : generators) b.add_loop(g);
        b.fold_all();
        StallingsGraph out(alpha);
        b.extract(out);
        out.trim_to_core();
        out.canonicalize();
        return out;
    }

    const Alphabet& alphabet() const { return alpha_; }
    int vertex_count() const { return static_cast<int>(next_.size()); }
    int base() const { return 0; }
    int dirs() const { return 2 * alpha_.rank; }

    /// Target of the x-edge at v, or -1 if absent.
    int next(int v, Letter x) const { return next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(detail::dir_of(x))]; }
    int next_dir(int v, int d) const { return next_[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)]; }

    int degree(int v) const {
        int deg = 0;
        for (int d = 0; d < dirs(); ++d) deg += next_dir(v, d) != -1;
        return deg;
    }

    /// Free rank of the subgroup (first Betti number of the core).
    int rank() const {
        int edges = 0;
        for (int v = 0; v < vertex_count(); ++v) edges += degree(v);
        return edges / 2 - vertex_count() + 1;
    }

    /// Heuristic non-elementarity check: a rank >= 2 core contains two
    /// independent loxodromic elements.  A certified pair finder is out of
    /// scope; callers get the rank bound only.
    bool nonelementary_heuristic() const { return rank() >= 2; }

    /// Membership: w traces a base-to-base loop.
    bool contains(const Word& w) const {
        int v = base();
        for (Letter x : w.letters()) {
            v = next(v, x);
            if (v == -1) return false;
        }
        return v == base();
    }

    /// Finite index iff the core is complete, in which case the index equals
    /// the vertex count (the core is then the whole Schreier graph).
    std::optional<long long> index() const {
        for (int v = 0; v < vertex_count(); ++v)
            for (int d = 0; d < dirs(); ++d)
                if (next_dir(v, d) == -1) return std::nullopt;
        return vertex_count();
    }

    /// Core of the product automaton based at (base, base); its loop language
    /// is the intersection of the two subgroups.
    static StallingsGraph intersect(const StallingsGraph& g1, const StallingsGraph& g2) {
        StallingsGraph out(check_same_alphabet(g1, g2));
        std::vector<std::pair<int, int>> pairs;
        product_reachable(g1, g2, out, pairs);
        out.trim_to_core();
        out.canonicalize();
        return out;
    }

    struct CommensurabilityReport {
        bool commensurable = false;
        std::optional<long long> index_in_1; // [H1 : H1 cap H2]
        std::optional<long long> index_in_2; // [H2 : H1 cap H2]
    };

    /// Decides commensurability and computes both relative indices.  The
    /// intersection's core either covers a factor's core (finite index, equal
    /// to the vertex-count ratio) or misses a direction somewhere (infinite).
    static CommensurabilityReport commensurable(const StallingsGraph& g1, const StallingsGraph& g2) {
        StallingsGraph prod(check_same_alphabet(g1, g2));
        std::vector<std::pair<int, int>> pairs;
        product_reachable(g1, g2, prod, pairs);
        std::vector<bool> kept = prod.core_mask();

        CommensurabilityReport rep;
        rep.index_in_1 = relative_index(prod, pairs, kept, g1, /*first=*/true);
        rep.index_in_2 = relative_index(prod, pairs, kept, g2, /*first=*/false);
        rep.commensurable = rep.index_in_1.has_value() && rep.index_in_2.has_value();
        return rep;
    }

    /// A free basis of the subgroup, read off a BFS spanning tree: one
    /// generator per chord edge.
    std::vector<Word> loop_generators() const {
        std::vector<Word> labels(static_cast<std::size_t>(vertex_count()));
        std::vector<bool> seen(static_cast<std::size_t>(vertex_count()), false);
        std::vector<std::pair<int, int>> tree_edge; // for each v != base: (parent, dir used)
        tree_edge.assign(static_cast<std::size_t>(vertex_count()), {-1, -1});
        std::queue<int> q;
        q.push(base());
        seen[static_cast<std::size_t>(base())] = true;
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int d = 0; d < dirs(); ++d) {
                int w = next_dir(v, d);
                if (w == -1 || seen[static_cast<std::size_t>(w)]) continue;
                seen[static_cast<std::size_t>(w)] = true;
                tree_edge[static_cast<std::size_t>(w)] = {v, d};
                std::vector<Letter> ls(labels[static_cast<std::size_t>(v)].letters().begin(),
                                       labels[static_cast<std::size_t>(v)].letters().end());
                ls.push_back(detail::letter_of_dir(d));
                labels[static_cast<std::size_t>(w)] = Word::reduced(ls);
                q.push(w);
            }
        }
        std::vector<Word> gens;
        for (int v = 0; v < vertex_count(); ++v) {
            for (int d = 0; d < dirs(); d += 2) { // each geometric edge once, via its positive slot
                int w = next_dir(v, d);
                if (w == -1) continue;
                bool is_tree = (tree_edge[static_cast<std::size_t>(w)] == std::make_pair(v, d)) ||
                               (tree_edge[static_cast<std::size_t>(v)] ==
                                std::make_pair(w, detail::inv_dir(d)));
                if (is_tree) continue;
                Word gen = labels[static_cast<std::size_t>(v)];
                std::vector<Letter> mid(gen.letters().begin(), gen.letters().end());
                mid.push_back(detail::letter_of_dir(d));
                gens.push_back(Word::reduced(mid) * labels[static_cast<std::size_t>(w)].inverse());
            }
        }
        return gens;
    }

    bool operator==(const StallingsGraph& o) const {
        return alpha_ == o.alpha_ && next_ == o.next_;
    }

    /// Raw construction from a vertex count and explicit edges (used by
    /// deserialization).  Folds nothing: the input must already be
    /// deterministic, or an InputError is thrown.
    static StallingsGraph from_edges(const Alphabet& alpha, int vertices,
                                     std::span<const std::tuple<int, Letter, int>> edges) {
        StallingsGraph g(alpha);
        g.next_.assign(static_cast<std::size_t>(vertices),
                       std::vector<std::int32_t>(static_cast<std::size_t>(2 * alpha.rank), -1));
        for (auto& [v, x, w] : edges) {
            if (v < 0 || v >= vertices || w < 0 || w >= vertices || !alpha.valid(x))
                throw InputError("graph edge out of range");
            int d = detail::dir_of(x);
            auto set_slot = [&](int a, int dd, int b) {
                auto& slot = g.next_[static_cast<std::size_t>(a)][static_cast<std::size_t>(dd)];
                if (slot != -1 && slot != b) throw InputError("graph is not deterministic (unfolded)");
                slot = b;
            };
            set_slot(v, d, w);
            set_slot(w, detail::inv_dir(d), v);
        }
        return g;
    }

    /// Edge list with each geometric edge listed once (positive letter).
    std::vector<std::tuple<int, Letter, int>> edge_list() const {
        std::vector<std::tuple<int, Letter, int>> edges;
        for (int v = 0; v < vertex_count(); ++v)
            for (int d = 0; d < dirs(); d += 2)
                if (int w = next_dir(v, d); w != -1)
                    edges.emplace_back(v, detail::letter_of_dir(d), w);
        return edges;
    }

private:
    explicit StallingsGraph(const Alphabet& alpha) : alpha_(alpha) {}

    static const Alphabet& check_same_alphabet(const StallingsGraph& a, const StallingsGraph& b) {
        if (!(a.alpha_ == b.alpha_)) throw InputError("subgroup graphs over different alphabets");
        return a.alpha_;
    }

    // --- folding ---------------------------------------------------------

    struct Builder {
        explicit Builder(const Alphabet& alpha) : dirs(2 * alpha.rank) {
            adj.emplace_back(dirs, -1); // base
            parent.push_back(0);
        }

        int dirs;
        std::vector<std::vector<std::int32_t>> adj;
        std::vector<int> parent;
        std::stack<std::tuple<int, int, int>> work; // (u, dir, v) edges to (re)insert

        int find(int v) {
            while (parent[static_cast<std::size_t>(v)] != v) {
                parent[static_cast<std::size_t>(v)] =
                    parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
                v = parent[static_cast<std::size_t>(v)];
            }
            return v;
        }

        int new_vertex() {
            adj.emplace_back(dirs, -1);
            parent.push_back(static_cast<int>(adj.size()) - 1);
            return static_cast<int>(adj.size()) - 1;
        }

        void add_loop(const Word& g) {
            int v = 0;
            for (int i = 0; i < g.size(); ++i) {
                int w = (i + 1 == g.size()) ? 0 : new_vertex();
                work.push({v, detail::dir_of(g[i]), w});
                v = w;
            }
        }

        // Merge b's class into a's and requeue b's edges.
        void merge(int a, int b) {
            a = find(a);
            b = find(b);
            if (a == b) return;
            parent[static_cast<std::size_t>(b)] = a;
            for (int d = 0; d < dirs; ++d) {
                int t = adj[static_cast<std::size_t>(b)][static_cast<std::size_t>(d)];
                if (t != -1) work.push({a, d, t});
                adj[static_cast<std::size_t>(b)][static_cast<std::size_t>(d)] = -1;
            }
        }

        void fold_all() {
            while (!work.empty()) {
                auto [u, d, v] = work.top();
                work.pop();
                u = find(u);
                v = find(v);
                // Out-slot of u in direction d.
                int cur = adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(d)];
                if (cur != -1 && find(cur) != v) {
                    merge(v, find(cur));
                    v = find(v);
                    u = find(u);
                }
                adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(d)] = v;
                // Determinism of the reverse direction at v.
                int di = detail::inv_dir(d);
                int rcur = adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(di)];
                if (rcur != -1 && find(rcur) != u) {
                    merge(u, find(rcur));
                    u = find(u);
                    v = find(v);
                }
                adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(di)] = u;
            }
        }

        void extract(StallingsGraph& out) {
            // Compact representatives; base class becomes vertex 0.
            std::vector<int> id(adj.size(), -1);
            int base_rep = find(0);
            id[static_cast<std::size_t>(base_rep)] = 0;
            int count = 1;
            for (std::size_t v = 0; v < adj.size(); ++v)
                if (find(static_cast<int>(v)) == static_cast<int>(v) && id[v] == -1)
                    id[v] = count++;
            out.next_.assign(static_cast<std::size_t>(count),
                             std::vector<std::int32_t>(static_cast<std::size_t>(dirs), -1));
            for (std::size_t v = 0; v < adj.size(); ++v) {
                if (find(static_cast<int>(v)) != static_cast<int>(v)) continue;
                for (int d = 0; d < dirs; ++d) {
                    int t = adj[v][static_cast<std::size_t>(d)];
                    if (t != -1)
                        out.next_[static_cast<std::size_t>(id[v])][static_cast<std::size_t>(d)] =
                            id[static_cast<std::size_t>(find(t))];
                }
            }
        }
    };

    // --- core trimming and canonical numbering ----------------------------

    // Mask of vertices surviving iterated removal of degree<=1 non-base
    // vertices.
    std::vector<bool> core_mask() const {
        std::vector<int> deg(static_cast<std::size_t>(vertex_count()), 0);
        for (int v = 0; v < vertex_count(); ++v) deg[static_cast<std::size_t>(v)] = degree(v);
        std::vector<bool> alive(static_cast<std::size_t>(vertex_count()), true);
        std::queue<int> q;
        for (int v = 0; v < vertex_count(); ++v)
            if (v != base() && deg[static_cast<std::size_t>(v)] <= 1) q.push(v);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            if (!alive[static_cast<std::size_t>(v)] || v == base()) continue;
            if (deg[static_cast<std::size_t>(v)] > 1) continue;
            alive[static_cast<std::size_t>(v)] = false;
            for (int d = 0; d < dirs(); ++d) {
                int w = next_dir(v, d);
                if (w == -1 || !alive[static_cast<std::size_t>(w)]) continue;
                if (--deg[static_cast<std::size_t>(w)] <= 1 && w != base()) q.push(w);
            }
        }
        return alive;
    }

    void trim_to_core() {
        std::vector<bool> alive = core_mask();
        apply_mask(alive);
    }

    void apply_mask(const std::vector<bool>& alive) {
        std::vector<int> id(static_cast<std::size_t>(vertex_count()), -1);
        int count = 0;
        for (int v = 0; v < vertex_count(); ++v)
            if (alive[static_cast<std::size_t>(v)]) id[static_cast<std::size_t>(v)] = count++;
        std::vector<std::vector<std::int32_t>> nx(static_cast<std::size_t>(count),
                                                  std::vector<std::int32_t>(static_cast<std::size_t>(dirs()), -1));
        for (int v = 0; v < vertex_count(); ++v) {
            if (!alive[static_cast<std::size_t>(v)]) continue;
            for (int d = 0; d < dirs(); ++d) {
                int w = next_dir(v, d);
                if (w != -1 && alive[static_cast<std::size_t>(w)])
                    nx[static_cast<std::size_t>(id[static_cast<std::size_t>(v)])]
                      [static_cast<std::size_t>(d)] = id[static_cast<std::size_t>(w)];
            }
        }
        next_ = std::move(nx);
    }

    // BFS renumbering from the base with directions scanned in fixed order.
    // Deterministic automata admit exactly one such numbering, so equal
    // subgroups serialize identically.
    void canonicalize() {
        std::vector<int> order;
        std::vector<int> id(static_cast<std::size_t>(vertex_count()), -1);
        std::queue<int> q;
        q.push(0);
        id[0] = 0;
        order.push_back(0);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int d = 0; d < dirs(); ++d) {
                int w = next_dir(v, d);
                if (w != -1 && id[static_cast<std::size_t>(w)] == -1) {
                    id[static_cast<std::size_t>(w)] = static_cast<int>(order.size());
                    order.push_back(w);
                    q.push(w);
                }
            }
        }
        std::vector<std::vector<std::int32_t>> nx(order.size(),
                                                  std::vector<std::int32_t>(static_cast<std::size_t>(dirs()), -1));
        for (std::size_t i = 0; i < order.size(); ++i)
            for (int d = 0; d < dirs(); ++d) {
                int w = next_dir(order[i], d);
                if (w != -1)
                    nx[i][static_cast<std::size_t>(d)] = id[static_cast<std::size_t>(w)];
            }
        next_ = std::move(nx);
    }

    // --- product machinery -------------------------------------------------

    static void product_reachable(const StallingsGraph& g1, const StallingsGraph& g2,
                                  StallingsGraph& out, std::vector<std::pair<int, int>>& pairs) {
        std::map<std::pair<int, int>, int> seen;
        pairs.clear();
        auto intern = [&](int a, int b) {
            auto [it, fresh] = seen.try_emplace({a, b}, static_cast<int>(pairs.size()));
            if (fresh) {
                pairs.emplace_back(a, b);
                out.next_.emplace_back(static_cast<std::size_t>(out.dirs()), -1);
            }
            return it->second;
        };
        intern(g1.base(), g2.base());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            auto [a, b] = pairs[i];
            for (int d = 0; d < out.dirs(); ++d) {
                int a2 = g1.next_dir(a, d);
                int b2 = g2.next_dir(b, d);
                if (a2 == -1 || b2 == -1) continue;
                out.next_[i][static_cast<std::size_t>(d)] = intern(a2, b2);
            }
        }
    }

    // [H : K] where K's (cored) fiber product projects onto the factor's
    // core.  Finite iff the projection is a covering: every direction present
    // at the image vertex is present upstairs.
    static std::optional<long long> relative_index(const StallingsGraph& prod,
                                                   const std::vector<std::pair<int, int>>& pairs,
                                                   const std::vector<bool>& kept,
                                                   const StallingsGraph& factor, bool first) {
        long long kept_count = 0;
        for (std::size_t s = 0; s < pairs.size(); ++s) {
            if (!kept[s]) continue;
            ++kept_count;
            int u = first ? pairs[s].first : pairs[s].second;
            for (int d = 0; d < prod.dirs(); ++d) {
                if (factor.next_dir(u, d) == -1) continue;
                int t = prod.next_dir(static_cast<int>(s), d);
                if (t == -1 || !kept[static_cast<std::size_t>(t)]) return std::nullopt;
            }
        }
        return kept_count / factor.vertex_count();
    }

    Alphabet alpha_;
    std::vector<std::vector<std::int32_t>> next_;
};

} // namespace freewalk
