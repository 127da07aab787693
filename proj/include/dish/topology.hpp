#pragma once

// Node geometry, the peer connectivity graph, unsafe-pair (UP) enumeration and
// cooperation coverage.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dish/types.hpp"

namespace dish {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double distance_sq(Point a, Point b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Axis-aligned rectangle [x0, x0 + w] x [y0, y0 + h].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    Point center() const { return {x0 + w / 2, y0 + h / 2}; }
    bool contains(Point p) const { return p.x >= x0 && p.x <= x0 + w && p.y >= y0 && p.y <= y0 + h; }

    friend bool operator==(const Rect&, const Rect&) = default;
};

struct NodeRecord {
    NodeId id = 0;
    Point pos;
    NodeKind kind = NodeKind::Peer;

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

/// Undirected simple graph on vertices 0..n-1 with sorted adjacency lists.
class AdjacencyGraph {
public:
    AdjacencyGraph() = default;
    explicit AdjacencyGraph(std::size_t n) : adj_(n) {}

    std::size_t vertex_count() const { return adj_.size(); }

    void add_edge(std::size_t i, std::size_t j)
    {
        if (i == j)
            throw std::invalid_argument("self loop");
        if (has_edge(i, j))
            return;
        insert_sorted(adj_.at(i), j);
        insert_sorted(adj_.at(j), i);
    }

    bool has_edge(std::size_t i, std::size_t j) const
    {
        const auto& a = adj_.at(i);
        return std::binary_search(a.begin(), a.end(), j);
    }

    std::size_t degree(std::size_t i) const { return adj_.at(i).size(); }
    std::span<const std::size_t> neighbors(std::size_t i) const { return adj_.at(i); }

    /// True iff some vertex is adjacent to both i and j.
    bool common_neighbor(std::size_t i, std::size_t j) const
    {
        const auto& a = adj_.at(i);
        const auto& b = adj_.at(j);
        auto ia = a.begin();
        auto ib = b.begin();
        while (ia != a.end() && ib != b.end()) {
            if (*ia == *ib)
                return true;
            if (*ia < *ib)
                ++ia;
            else
                ++ib;
        }
        return false;
    }

    bool connected() const
    {
        if (adj_.empty())
            return true;
        std::vector<bool> seen(adj_.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t reached = 1;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (std::size_t w : adj_[v])
                if (!seen[w]) {
                    seen[w] = true;
                    ++reached;
                    stack.push_back(w);
                }
        }
        return reached == adj_.size();
    }

private:
    static void insert_sorted(std::vector<std::size_t>& v, std::size_t x)
    {
        v.insert(std::upper_bound(v.begin(), v.end(), x), x);
    }

    std::vector<std::vector<std::size_t>> adj_;
};

/// Adjacent peer pair, canonical i < j.
struct UnsafePair {
    NodeId i = 0;
    NodeId j = 0;

    friend auto operator<=>(const UnsafePair&, const UnsafePair&) = default;
};

inline UnsafePair make_pair_canonical(NodeId a, NodeId b) { return a < b ? UnsafePair{a, b} : UnsafePair{b, a}; }

/// Which branch of the UP condition applies. Channel-conflict UPs always use
/// NoPsm; PsmDeafTerminal is the deaf-terminal condition when peers sleep.
enum class MccMode : std::uint8_t { NoPsm, PsmDeafTerminal };

/// Static network: peers and altruists in the plane with a unit-disk radio.
/// The peer graph only contains peers; altruists never relay or carry flows.
class NetworkTopology {
public:
    NetworkTopology() = default;

    NetworkTopology(std::vector<NodeRecord> nodes, double tx_range, double interference_range, Rect area = {})
        : nodes_(std::move(nodes)), tx_range_(tx_range), interference_range_(interference_range), area_(area)
    {
        if (!(tx_range_ > 0.0) || !std::isfinite(tx_range_))
            throw std::invalid_argument("transmission range must be positive");
        if (!(interference_range_ >= tx_range_) || !std::isfinite(interference_range_))
            throw std::invalid_argument("interference range must be >= transmission range");
        index_.reserve(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const auto& n = nodes_[k];
            if (!std::isfinite(n.pos.x) || !std::isfinite(n.pos.y))
                throw std::invalid_argument("non-finite coordinate for node " + std::to_string(n.id));
            if (!index_.emplace(n.id, k).second)
                throw std::invalid_argument("duplicate node id " + std::to_string(n.id));
            if (n.kind == NodeKind::Peer) {
                vertex_of_.emplace(n.id, peers_.size());
                peers_.push_back(k);
            } else {
                altruists_.push_back(k);
            }
        }
        graph_ = AdjacencyGraph(peers_.size());
        const double r2 = tx_range_ * tx_range_;
        for (std::size_t a = 0; a < peers_.size(); ++a)
            for (std::size_t b = a + 1; b < peers_.size(); ++b)
                if (distance_sq(nodes_[peers_[a]].pos, nodes_[peers_[b]].pos) <= r2)
                    graph_.add_edge(a, b);
    }

    const std::vector<NodeRecord>& nodes() const { return nodes_; }
    double tx_range() const { return tx_range_; }
    double interference_range() const { return interference_range_; }
    const Rect& area() const { return area_; }

    std::size_t peer_count() const { return peers_.size(); }
    std::size_t altruist_count() const { return altruists_.size(); }

    const NodeRecord& node(NodeId id) const { return nodes_.at(index_of(id)); }
    const NodeRecord& peer_at(std::size_t vertex) const { return nodes_.at(peers_.at(vertex)); }
    std::vector<Point> altruist_positions() const
    {
        std::vector<Point> out;
        out.reserve(altruists_.size());
        for (std::size_t k : altruists_)
            out.push_back(nodes_[k].pos);
        return out;
    }

    bool has_node(NodeId id) const { return index_.contains(id); }

    /// Peer-graph vertex of a peer id.
    std::size_t vertex_of(NodeId id) const
    {
        auto it = vertex_of_.find(id);
        if (it == vertex_of_.end())
            throw std::invalid_argument("not a peer: " + std::to_string(id));
        return it->second;
    }

    const AdjacencyGraph& peer_graph() const { return graph_; }

    bool adjacent(NodeId a, NodeId b) const { return graph_.has_edge(vertex_of(a), vertex_of(b)); }
    std::size_t degree(NodeId id) const { return graph_.degree(vertex_of(id)); }

    /// Copy of this topology with extra altruists appended (ids continue after the max id).
    NetworkTopology with_altruists(std::span<const Point> positions) const
    {
        auto nodes = nodes_;
        NodeId next = 0;
        for (const auto& n : nodes)
            next = std::max(next, n.id + 1);
        for (Point p : positions)
            nodes.push_back({next++, p, NodeKind::Altruist});
        return NetworkTopology(std::move(nodes), tx_range_, interference_range_, area_);
    }

    /// Copy with all altruists removed.
    NetworkTopology peers_only() const
    {
        std::vector<NodeRecord> nodes;
        for (std::size_t k : peers_)
            nodes.push_back(nodes_[k]);
        return NetworkTopology(std::move(nodes), tx_range_, interference_range_, area_);
    }

private:
    std::size_t index_of(NodeId id) const
    {
        auto it = index_.find(id);
        if (it == index_.end())
            throw std::invalid_argument("unknown node id " + std::to_string(id));
        return it->second;
    }

    std::vector<NodeRecord> nodes_;
    double tx_range_ = 1.0;
    double interference_range_ = 1.0;
    Rect area_;
    std::vector<std::size_t> peers_;
    std::vector<std::size_t> altruists_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::unordered_map<NodeId, std::size_t> vertex_of_;
    AdjacencyGraph graph_;
};

/// Unit-disk topology: peers are adjacent iff their distance is <= r (closed disk).
/// The interference range defaults to 2r.
inline NetworkTopology build_adjacency(std::vector<NodeRecord> nodes, double r,
                                       std::optional<double> interference_range = std::nullopt, Rect area = {})
{
    return NetworkTopology(std::move(nodes), r, interference_range.value_or(2.0 * r), area);
}

// --- Unsafe pairs -----------------------------------------------------------

/// UP test on graph vertices. Throws if i and j are not adjacent.
inline bool is_unsafe_pair(const AdjacencyGraph& g, std::size_t i, std::size_t j, MccMode mode)
{
    if (!g.has_edge(i, j))
        throw std::invalid_argument("unsafe-pair test on a non-adjacent pair");
    const std::size_t di = g.degree(i);
    const std::size_t dj = g.degree(j);
    if (mode == MccMode::PsmDeafTerminal)
        return di >= 1 && dj >= 1 && !(di == 1 && dj == 1);
    if (di == 2 && dj == 2)
        return !g.common_neighbor(i, j);
    return di >= 2 && dj >= 2;
}

inline bool is_unsafe_pair(const NetworkTopology& t, NodeId i, NodeId j, MccMode mode)
{
    return is_unsafe_pair(t.peer_graph(), t.vertex_of(i), t.vertex_of(j), mode);
}

/// All UPs of a graph as vertex pairs (a < b), in lexicographic order.
inline std::vector<std::pair<std::size_t, std::size_t>> enumerate_ups(const AdjacencyGraph& g, MccMode mode)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < g.vertex_count(); ++a)
        for (std::size_t b : g.neighbors(a))
            if (a < b && is_unsafe_pair(g, a, b, mode))
                out.emplace_back(a, b);
    return out;
}

inline std::vector<UnsafePair> enumerate_ups(const NetworkTopology& t, MccMode mode)
{
    std::vector<UnsafePair> out;
    for (auto [a, b] : enumerate_ups(t.peer_graph(), mode))
        out.push_back(make_pair_canonical(t.peer_at(a).id, t.peer_at(b).id));
    std::sort(out.begin(), out.end());
    return out;
}

/// True iff a single point is within r of both endpoints.
inline bool covers(Point site, Point a, Point b, double r)
{
    const double r2 = r * r;
    return distance_sq(site, a) <= r2 && distance_sq(site, b) <= r2;
}

/// A UP is covered iff some altruist is within range of both peers.
inline bool covered(const UnsafePair& pair, const NetworkTopology& t)
{
    const Point a = t.node(pair.i).pos;
    const Point b = t.node(pair.j).pos;
    for (const auto& n : t.nodes())
        if (n.kind == NodeKind::Altruist && covers(n.pos, a, b, t.tx_range()))
            return true;
    return false;
}

/// N_cup / N_up. With no UPs the coverage is vacuously full; `vacuous()` flags
/// that case so aggregates can tell it apart from a measured 1.0.
struct Coverage {
    std::size_t n_up = 0;
    std::size_t n_cup = 0;

    bool vacuous() const { return n_up == 0; }
    double fraction() const { return vacuous() ? 1.0 : static_cast<double>(n_cup) / static_cast<double>(n_up); }
};

inline Coverage cooperation_coverage(const NetworkTopology& t, MccMode mode)
{
    Coverage c;
    for (const auto& up : enumerate_ups(t, mode)) {
        ++c.n_up;
        if (covered(up, t))
            ++c.n_cup;
    }
    return c;
}

} // namespace dish
