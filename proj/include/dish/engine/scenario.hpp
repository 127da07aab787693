#pragma once

// Scenario parameters and per-run topology/flow construction.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dish/deployment.hpp"
#include "dish/engine/radio.hpp"
#include "dish/engine/traffic.hpp"
#include "dish/protocol.hpp"
#include "dish/random.hpp"
#include "dish/topology.hpp"

namespace dish {

struct ScenarioConfig {
    FlowMode mode = FlowMode::SingleHop;
    ProtocolVariant variant = ProtocolVariant::DishP;

    double area_w = 0.0;  ///< 0: 100 m single-hop, 1500 m multi-hop
    double area_h = 0.0;
    std::size_t n_peers = 0;     ///< 0: 10 single-hop, peer_density * area / r^2 multi-hop
    double peer_density = 10.0;  ///< peers per r^2
    int n_altruists = -1;        ///< -1: one at the center single-hop, PPP(alt_density) multi-hop
    double alt_density = kDefaultAltruistDensity;  ///< altruists per r^2

    std::uint32_t channels = 5;  ///< data channels, besides the control channel
    TimingParams timing;
    RadioModel radio;

    double rate_bps = 25000.0;  ///< Poisson arrival rate per source
    bool saturated = false;
    std::uint64_t stop_after = 10000;  ///< end-to-end packets generated
    double max_time_s = 0.0;           ///< 0: unlimited

    std::uint64_t seed = 1;
    std::uint32_t replications = 5;
    std::uint32_t topology_retries = 20;
    bool trace = false;

    Rect area() const
    {
        const double dflt = mode == FlowMode::SingleHop ? 100.0 : 1500.0;
        return {0.0, 0.0, area_w > 0 ? area_w : dflt, area_h > 0 ? area_h : dflt};
    }

    std::size_t peers() const
    {
        if (n_peers > 0)
            return n_peers;
        if (mode == FlowMode::SingleHop)
            return 10;
        const double r = radio.tx_range;
        return static_cast<std::size_t>(std::llround(peer_density * area().area() / (r * r)));
    }

    void validate() const
    {
        radio.validate();
        if (channels == 0)
            throw std::invalid_argument("at least one data channel required");
        if (!(timing.bandwidth_bps > 0))
            throw std::invalid_argument("bandwidth must be positive");
        if (timing.cw_min > timing.cw_max)
            throw std::invalid_argument("cw_min exceeds cw_max");
        if (timing.sifs < 0 || timing.difs < 0 || timing.ccap < 0 || timing.slot < 0 || timing.switch_delay < 0)
            throw std::invalid_argument("negative timing parameter");
        if (rate_bps < 0 || !std::isfinite(rate_bps))
            throw std::invalid_argument("arrival rate must be finite and nonnegative");
        if (max_time_s < 0)
            throw std::invalid_argument("negative time limit");
        if (area_w < 0 || area_h < 0)
            throw std::invalid_argument("negative area");
        const std::size_t n = peers();
        if (n < 2)
            throw std::invalid_argument("at least two peers required");
        if (mode == FlowMode::SingleHop && n % 2 != 0)
            throw std::invalid_argument("single-hop scenarios need an even number of peers");
        if (n_altruists > 0 && variant != ProtocolVariant::Altruistic)
            throw std::invalid_argument("altruists are only deployed in the altruistic variant");
        if (alt_density < 0)
            throw std::invalid_argument("negative altruist density");
    }
};

/// A concrete network for one run. Node ids are dense: peers first, then altruists.
struct Scenario {
    NetworkTopology topology;
    std::vector<Flow> flows;
    std::uint32_t attempts = 1;
};

inline std::vector<Point> scenario_altruists(const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t attempt)
{
    if (cfg.variant != ProtocolVariant::Altruistic || cfg.n_altruists == 0)
        return {};
    const Rect area = cfg.area();
    Rng rng(stream_seed(seed, Stream::Altruists, attempt));
    if (cfg.n_altruists > 0) {
        if (cfg.n_altruists == 1)
            return {area.center()};
        std::vector<Point> out;
        for (int k = 0; k < cfg.n_altruists; ++k)
            out.push_back({rng.uniform(area.x0, area.x0 + area.w), rng.uniform(area.y0, area.y0 + area.h)});
        return out;
    }
    if (cfg.mode == FlowMode::SingleHop)
        return {area.center()};
    const double r = cfg.radio.tx_range;
    return poisson_deploy(area, cfg.alt_density / (r * r), rng);
}

/// Random peers (uniform in the area), altruists per the config, and flows.
/// Regenerates up to `topology_retries` times when flows cannot be routed.
inline Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    const Rect area = cfg.area();
    const std::size_t n = cfg.peers();
    std::string last_error;
    for (std::uint32_t attempt = 0; attempt < std::max<std::uint32_t>(1, cfg.topology_retries); ++attempt) {
        Rng prng(stream_seed(seed, Stream::Peers, attempt));
        std::vector<NodeRecord> nodes;
        nodes.reserve(n);
        for (std::size_t k = 0; k < n; ++k)
            nodes.push_back({static_cast<NodeId>(k),
                             {prng.uniform(area.x0, area.x0 + area.w), prng.uniform(area.y0, area.y0 + area.h)},
                             NodeKind::Peer});
        for (Point p : scenario_altruists(cfg, seed, attempt))
            nodes.push_back({static_cast<NodeId>(nodes.size()), p, NodeKind::Altruist});
        NetworkTopology topo(std::move(nodes), cfg.radio.tx_range, cfg.radio.interference_range, area);
        if (cfg.mode == FlowMode::MultiHop && !topo.peer_graph().connected()) {
            last_error = "peer graph disconnected";
            continue;
        }
        Rng frng(stream_seed(seed, Stream::Flows, attempt));
        try {
            auto flows = generate_flows(topo, cfg.mode, frng, cfg.rate_bps);
            return {std::move(topo), std::move(flows), attempt + 1};
        } catch (const UnroutableError& e) {
            last_error = e.what();
        }
    }
    throw UnroutableError("no routable topology after " + std::to_string(cfg.topology_retries)
                          + " attempts (seed " + std::to_string(seed) + "): " + last_error);
}

} // namespace dish
