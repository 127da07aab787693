#pragma once

// Flow selection, shortest-path routes and Poisson packet arrivals.

#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dish/random.hpp"
#include "dish/topology.hpp"

namespace dish {

enum class FlowMode : std::uint8_t { SingleHop, MultiHop };

inline constexpr std::string_view to_string(FlowMode m) { return m == FlowMode::SingleHop ? "single-hop" : "multi-hop"; }

inline FlowMode parse_flow_mode(std::string_view s)
{
    if (s == "single-hop" || s == "single")
        return FlowMode::SingleHop;
    if (s == "multi-hop" || s == "multi")
        return FlowMode::MultiHop;
    throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

struct Flow {
    NodeId src = 0;
    NodeId dst = 0;
    std::vector<NodeId> route;  ///< src ... dst, consecutive hops adjacent
    double arrival_rate = 0.0;  ///< bits/s

    std::size_t hops() const { return route.empty() ? 0 : route.size() - 1; }
    friend bool operator==(const Flow&, const Flow&) = default;
};

/// Thrown when the requested flows cannot be routed on a topology.
class UnroutableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hop-count shortest path over the peer graph. Neighbors are expanded in
/// ascending vertex order, so ties resolve deterministically. Empty if unreachable.
inline std::vector<NodeId> shortest_path(const NetworkTopology& t, NodeId src, NodeId dst)
{
    const auto& g = t.peer_graph();
    const std::size_t s = t.vertex_of(src);
    const std::size_t d = t.vertex_of(dst);
    constexpr auto none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> parent(g.vertex_count(), none);
    std::queue<std::size_t> q;
    parent[s] = s;
    q.push(s);
    while (!q.empty() && parent[d] == none) {
        const std::size_t v = q.front();
        q.pop();
        for (std::size_t w : g.neighbors(v))
            if (parent[w] == none) {
                parent[w] = v;
                q.push(w);
            }
    }
    if (parent[d] == none)
        return {};
    std::vector<NodeId> rev;
    for (std::size_t v = d;; v = parent[v]) {
        rev.push_back(t.peer_at(v).id);
        if (v == s)
            break;
    }
    return {rev.rbegin(), rev.rend()};
}

/// Single-hop: a random perfect matching of the peers into n/2 flows.
/// Multi-hop: a random derangement, so every peer is the source of one flow
/// and the destination of another, each routed on a shortest path.
inline std::vector<Flow> generate_flows(const NetworkTopology& t, FlowMode mode, Rng& rng, double rate = 0.0)
{
    const std::size_t n = t.peer_count();
    std::vector<NodeId> ids(n);
    for (std::size_t v = 0; v < n; ++v)
        ids[v] = t.peer_at(v).id;
    std::vector<Flow> flows;
    if (mode == FlowMode::SingleHop) {
        if (n % 2 != 0)
            throw std::invalid_argument("single-hop pairing needs an even number of peers");
        rng.shuffle(std::span<NodeId>(ids));
        for (std::size_t k = 0; k + 1 < n; k += 2) {
            if (!t.adjacent(ids[k], ids[k + 1]))
                throw UnroutableError("single-hop pair out of range");
            flows.push_back({ids[k], ids[k + 1], {ids[k], ids[k + 1]}, rate});
        }
        return flows;
    }
    if (n < 2)
        throw std::invalid_argument("multi-hop flows need at least two peers");
    std::vector<std::size_t> perm(n);
    for (;;) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(perm));
        bool fixed = false;
        for (std::size_t v = 0; v < n; ++v)
            fixed = fixed || perm[v] == v;
        if (!fixed)
            break;
    }
    for (std::size_t v = 0; v < n; ++v) {
        auto route = shortest_path(t, ids[v], ids[perm[v]]);
        if (route.empty())
            throw UnroutableError("no route from " + std::to_string(ids[v]) + " to " + std::to_string(ids[perm[v]]));
        flows.push_back({ids[v], ids[perm[v]], std::move(route), rate});
    }
    return flows;
}

/// Exponential inter-arrival gaps with mean payload_bits / rate.
class PoissonSource {
public:
    PoissonSource(double rate_bps, std::uint64_t payload_bits, std::uint64_t seed)
        : rng_(seed), mean_gap_s_(rate_bps > 0 ? static_cast<double>(payload_bits) / rate_bps : 0.0)
    {
        if (rate_bps < 0)
            throw std::invalid_argument("negative arrival rate");
    }

    bool active() const { return mean_gap_s_ > 0; }
    double mean_gap_seconds() const { return mean_gap_s_; }

    /// Next gap in whole microseconds, or kNever for a silent source.
    SimTime next_gap()
    {
        if (!active())
            return kNever;
        return static_cast<SimTime>(std::llround(rng_.exponential(mean_gap_s_) * 1e6));
    }

private:
    Rng rng_;
    double mean_gap_s_;
};

/// First `count` arrival times of a Poisson source; empty for rate 0.
inline std::vector<SimTime> poisson_traffic(double rate_bps, std::uint64_t payload_bits, std::uint64_t seed,
                                            std::size_t count)
{
    PoissonSource src(rate_bps, payload_bits, seed);
    std::vector<SimTime> out;
    if (!src.active())
        return out;
    SimTime t = 0;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        t += src.next_gap();
        out.push_back(t);
    }
    return out;
}

} // namespace dish
