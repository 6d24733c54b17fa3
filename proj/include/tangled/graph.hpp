#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tangled/error.hpp"
#include "tangled/mallows.hpp"
#include "tangled/permutation.hpp"

namespace tangled {

/// Unordered edge {u, v}, stored with u < v.
struct Edge {
    Index u;
    Index v;

    static Edge of(Index a, Index b) { return a < b ? Edge{a, b} : Edge{b, a}; }

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Any simple undirected graph on vertices 1..n with sorted neighbor lists.
template <class G>
concept GraphLike = requires(const G& g, Index v) {
    { g.vertex_count() } -> std::convertible_to<Index>;
    { g.neighbors(v) } -> std::convertible_to<std::span<const Index>>;
    { g.edges() } -> std::convertible_to<std::span<const Edge>>;
};

namespace detail {

inline std::vector<Edge> dedup_edges(std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

}  // namespace detail

/// General simple graph. Used for fixtures (complete graphs, grids, stars)
/// and for derived graphs such as edge subdivisions.
class SimpleGraph {
public:
    SimpleGraph() = default;

    SimpleGraph(Index n, std::vector<Edge> edges) : n_(n), adj_(n + 1) {
        for (auto& e : edges) {
            detail::require(e.u != e.v, "self-loop not allowed");
            detail::require(e.u >= 1 && e.v >= 1 && e.u <= n && e.v <= n, "edge endpoint out of range");
            e = Edge::of(e.u, e.v);
        }
        edges_ = detail::dedup_edges(std::move(edges));
        for (const auto& e : edges_) {
            adj_[e.u].push_back(e.v);
            adj_[e.v].push_back(e.u);
        }
        for (auto& list : adj_) std::sort(list.begin(), list.end());
    }

    Index vertex_count() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::span<const Index> neighbors(Index v) const { return adj_[v]; }
    std::span<const Edge> edges() const noexcept { return edges_; }

private:
    Index n_ = 0;
    std::vector<std::vector<Index>> adj_;
    std::vector<Edge> edges_;
};

/// Provenance recorded when a tangled graph comes from a sampled trace.
struct GraphProvenance {
    std::vector<Index> trace;
    double q = 1.0;
    std::optional<std::uint64_t> seed;
};

/// Layer(P_n, sigma(P_n)): the path 1-2-...-n united with the relabelled path
/// sigma(1)-sigma(2)-...-sigma(n), multi-edges merged.
///
/// Max degree is 4 by construction, so neighbor lists are fixed-capacity.
class TangledGraph {
public:
    static constexpr std::size_t kMaxDegree = 4;

    Index vertex_count() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::span<const Index> neighbors(Index v) const { return {slots_[v].data(), degree_[v]}; }
    std::span<const Edge> edges() const noexcept { return edges_; }
    const std::optional<GraphProvenance>& provenance() const noexcept { return provenance_; }
    void set_provenance(GraphProvenance p) { provenance_ = std::move(p); }

    friend TangledGraph build_tangled(const Permutation& sigma);

private:
    void add_neighbor(Index v, Index w) {
        auto& s = slots_[v];
        auto* end = s.data() + degree_[v];
        auto* pos = std::lower_bound(s.data(), end, w);
        if (pos != end && *pos == w) return;
        std::copy_backward(pos, end, end + 1);
        *pos = w;
        ++degree_[v];
    }

    Index n_ = 0;
    std::vector<std::array<Index, kMaxDegree>> slots_;
    std::vector<std::uint8_t> degree_;
    std::vector<Edge> edges_;
    std::optional<GraphProvenance> provenance_;
};

inline TangledGraph build_tangled(const Permutation& sigma) {
    const Index n = sigma.size();
    TangledGraph g;
    g.n_ = n;
    g.slots_.assign(n + 1, {});
    g.degree_.assign(n + 1, 0);
    std::vector<Edge> edges;
    edges.reserve(2 * (n - 1));
    for (Index i = 1; i < n; ++i) {
        edges.push_back(Edge{i, i + 1});
        edges.push_back(Edge::of(sigma(i), sigma(i + 1)));
    }
    g.edges_ = detail::dedup_edges(std::move(edges));
    for (const auto& e : g.edges_) {
        g.add_neighbor(e.u, e.v);
        g.add_neighbor(e.v, e.u);
    }
    return g;
}

inline TangledGraph build_tangled(const InsertionTrace& trace) {
    auto g = build_tangled(mallows_process(trace));
    g.set_provenance({trace.positions, trace.q, trace.seed});
    return g;
}

template <GraphLike G>
SimpleGraph to_simple(const G& g) {
    return SimpleGraph(g.vertex_count(), std::vector<Edge>(g.edges().begin(), g.edges().end()));
}

// ---------------------------------------------------------------------------
// Fixtures.

inline SimpleGraph make_path(Index n) {
    std::vector<Edge> e;
    for (Index i = 1; i < n; ++i) e.push_back({i, i + 1});
    return SimpleGraph(n, std::move(e));
}

inline SimpleGraph make_cycle(Index n) {
    detail::require(n >= 3, "cycle needs n >= 3");
    std::vector<Edge> e;
    for (Index i = 1; i < n; ++i) e.push_back({i, i + 1});
    e.push_back({1, n});
    return SimpleGraph(n, std::move(e));
}

inline SimpleGraph make_complete(Index n) {
    std::vector<Edge> e;
    for (Index i = 1; i <= n; ++i)
        for (Index j = i + 1; j <= n; ++j) e.push_back({i, j});
    return SimpleGraph(n, std::move(e));
}

/// K_{1,leaves} with centre 1.
inline SimpleGraph make_star(Index leaves) {
    std::vector<Edge> e;
    for (Index j = 2; j <= leaves + 1; ++j) e.push_back({1, j});
    return SimpleGraph(leaves + 1, std::move(e));
}

inline SimpleGraph make_grid(Index rows, Index cols) {
    std::vector<Edge> e;
    auto id = [cols](Index r, Index c) { return r * cols + c + 1; };
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (c + 1 < cols) e.push_back({id(r, c), id(r, c + 1)});
            if (r + 1 < rows) e.push_back({id(r, c), id(r + 1, c)});
        }
    }
    return SimpleGraph(rows * cols, std::move(e));
}

/// Replaces edge {u, v} by a path u - (n+1) - v.
template <GraphLike G>
SimpleGraph subdivide_edge(const G& g, Edge which) {
    which = Edge::of(which.u, which.v);
    const Index w = g.vertex_count() + 1;
    std::vector<Edge> e;
    bool found = false;
    for (const auto& x : g.edges()) {
        if (x == which) {
            found = true;
            e.push_back({which.u, w});
            e.push_back({which.v, w});
        } else {
            e.push_back(x);
        }
    }
    detail::require(found, "subdivide_edge: edge not present");
    return SimpleGraph(w, std::move(e));
}

// ---------------------------------------------------------------------------
// Traversal.

inline constexpr Index kUnreached = std::numeric_limits<Index>::max();

/// Hop distances from `source`; kUnreached for other components. Index 0 unused.
template <GraphLike G>
std::vector<Index> bfs_distances(const G& g, Index source) {
    const Index n = g.vertex_count();
    detail::require(source >= 1 && source <= n, "bfs source out of range");
    std::vector<Index> dist(n + 1, kUnreached);
    std::vector<Index> queue;
    queue.reserve(n);
    dist[source] = 0;
    queue.push_back(source);
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const Index u = queue[head];
        for (Index w : g.neighbors(u)) {
            if (dist[w] == kUnreached) {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    return dist;
}

template <GraphLike G>
bool is_connected(const G& g) {
    if (g.vertex_count() == 0) return true;
    auto d = bfs_distances(g, 1);
    return std::none_of(d.begin() + 1, d.end(), [](Index x) { return x == kUnreached; });
}

/// Exact diameter from n BFS runs. A single vertex has diameter 0.
template <GraphLike G>
Index diameter(const G& g) {
    const Index n = g.vertex_count();
    Index best = 0;
    for (Index s = 1; s <= n; ++s) {
        auto d = bfs_distances(g, s);
        for (Index v = 1; v <= n; ++v) {
            detail::require(d[v] != kUnreached, "diameter: graph is disconnected");
            best = std::max(best, d[v]);
        }
    }
    return best;
}

/// Cut vertices by iterative DFS low-link. Sorted ascending.
template <GraphLike G>
std::vector<Index> articulation_points(const G& g) {
    const Index n = g.vertex_count();
    if (n == 0) return {};
    std::vector<Index> disc(n + 1, 0), low(n + 1, 0), parent(n + 1, 0);
    std::vector<std::size_t> next_edge(n + 1, 0);
    std::vector<bool> is_cut(n + 1, false);
    Index timer = 0;
    Index root_children = 0;

    std::vector<Index> stack{1};
    disc[1] = low[1] = ++timer;
    while (!stack.empty()) {
        const Index u = stack.back();
        auto nb = g.neighbors(u);
        if (next_edge[u] < nb.size()) {
            const Index w = nb[next_edge[u]++];
            if (disc[w] == 0) {
                parent[w] = u;
                disc[w] = low[w] = ++timer;
                if (u == 1) ++root_children;
                stack.push_back(w);
            } else if (w != parent[u]) {
                low[u] = std::min(low[u], disc[w]);
            }
        } else {
            stack.pop_back();
            if (const Index p = parent[u]; p != 0) {
                low[p] = std::min(low[p], low[u]);
                if (p != 1 && low[u] >= disc[p]) is_cut[p] = true;
            }
        }
    }
    if (timer != n) throw domain_error("articulation_points: graph is disconnected");
    if (root_children > 1) is_cut[1] = true;

    std::vector<Index> out;
    for (Index v = 1; v <= n; ++v)
        if (is_cut[v]) out.push_back(v);
    return out;
}

template <GraphLike G>
Index max_degree(const G& g) {
    Index best = 0;
    for (Index v = 1; v <= g.vertex_count(); ++v) best = std::max<Index>(best, static_cast<Index>(g.neighbors(v).size()));
    return best;
}

/// Edge-list text: header "n=<n>" then one "u v" line per edge, 1-based.
template <GraphLike G>
std::string format_edge_list(const G& g) {
    std::ostringstream out;
    out << "n=" << g.vertex_count() << '\n';
    for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
    return out.str();
}

inline SimpleGraph parse_edge_list(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    detail::require(static_cast<bool>(std::getline(in, header)) && header.rfind("n=", 0) == 0,
                    "edge list must start with 'n=<n>'");
    const long long n = std::stoll(header.substr(2));
    detail::require(n >= 0 && n <= std::numeric_limits<Index>::max(), "edge list: bad vertex count");
    std::vector<Edge> edges;
    long long u = 0, v = 0;
    while (in >> u >> v) {
        detail::require(u >= 1 && v >= 1 && u <= n && v <= n, "edge list: endpoint out of range");
        edges.push_back(Edge::of(static_cast<Index>(u), static_cast<Index>(v)));
    }
    return SimpleGraph(static_cast<Index>(n), std::move(edges));
}

}  // namespace tangled
