#pragma once

// Energy accounting, throughput, BMP cost efficiency, lifetime and the
// saturated-throughput upper bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dish/types.hpp"

namespace dish {

/// Watts per radio state. Defaults are 25:18:15:1 x 50 mW.
struct PowerRates {
    std::array<double, kRadioStateCount> watts{1.25, 0.90, 0.75, 0.05};

    double operator[](RadioState s) const { return watts[static_cast<std::size_t>(s)]; }
};

using Sojourn = std::array<SimTime, kRadioStateCount>;

/// Per-node time spent in each radio state, in microseconds.
class EnergyLedger {
public:
    EnergyLedger() = default;
    explicit EnergyLedger(std::size_t nodes) : sojourn_(nodes, Sojourn{}) {}

    std::size_t size() const { return sojourn_.size(); }

    void add(std::size_t node, RadioState s, SimTime duration)
    {
        if (duration < 0)
            throw std::invalid_argument("negative sojourn");
        sojourn_.at(node)[static_cast<std::size_t>(s)] += duration;
    }

    /// Move already-billed time from one state to another (e.g. IDLE -> RX).
    void convert(std::size_t node, RadioState from, RadioState to, SimTime duration)
    {
        auto& row = sojourn_.at(node);
        auto& f = row[static_cast<std::size_t>(from)];
        if (duration < 0 || duration > f)
            throw std::invalid_argument("conversion exceeds billed time");
        f -= duration;
        row[static_cast<std::size_t>(to)] += duration;
    }

    SimTime sojourn(std::size_t node, RadioState s) const { return sojourn_.at(node)[static_cast<std::size_t>(s)]; }
    const Sojourn& row(std::size_t node) const { return sojourn_.at(node); }

    SimTime total(std::size_t node) const
    {
        const auto& r = sojourn_.at(node);
        return std::accumulate(r.begin(), r.end(), SimTime{0});
    }

    friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;

private:
    std::vector<Sojourn> sojourn_;
};

/// Time-weighted average power of one node.
inline double node_power(const EnergyLedger& ledger, std::size_t node, const PowerRates& rates = {})
{
    const SimTime total = ledger.total(node);
    if (total <= 0)
        throw std::domain_error("node power over zero duration");
    double joules_us = 0.0;
    for (std::size_t s = 0; s < kRadioStateCount; ++s)
        joules_us += rates.watts[s] * static_cast<double>(ledger.row(node)[s]);
    return joules_us / static_cast<double>(total);
}

/// Delivered end-to-end payload bits over the simulated duration.
inline double aggregate_throughput(std::span<const std::uint64_t> delivered_bits_per_flow, SimTime duration)
{
    if (duration <= 0)
        return 0.0;
    const double bits = std::accumulate(delivered_bits_per_flow.begin(), delivered_bits_per_flow.end(), 0.0);
    return bits / to_seconds(duration);
}

struct BmpInputs {
    std::vector<double> flow_throughputs;  ///< bits/s
    std::vector<double> flow_distances;    ///< meters, source to destination
    std::size_t n_peers = 1;
    std::size_t n_altruists = 0;
    double p_peer_max = 0.0;  ///< W
    double p_alt_max = 0.0;   ///< W
    double b0 = 1.0;          ///< J/$
};

/// Bit-meters per unit cost: F.D.b0 / ((Np + Na) max(Pp, Pa)).
inline double bmp(const BmpInputs& in)
{
    if (in.flow_throughputs.size() != in.flow_distances.size())
        throw std::invalid_argument("throughput and distance vectors differ in length");
    if (in.n_peers < 1)
        throw std::invalid_argument("at least one peer required");
    for (double v : in.flow_throughputs)
        if (v < 0)
            throw std::invalid_argument("negative throughput");
    for (double v : in.flow_distances)
        if (v < 0)
            throw std::invalid_argument("negative distance");
    const double pmax = std::max(in.p_peer_max, in.p_alt_max);
    if (!(pmax > 0))
        throw std::domain_error("zero maximum power");
    const double fd = std::inner_product(in.flow_throughputs.begin(), in.flow_throughputs.end(),
                                         in.flow_distances.begin(), 0.0);
    return fd * in.b0 / (static_cast<double>(in.n_peers + in.n_altruists) * pmax);
}

/// Network lifetime e0 / max(Pp, Pa): the first node to exhaust its battery.
inline double lifetime(double e0, double p_peer_max, double p_alt_max)
{
    const double pmax = std::max(p_peer_max, p_alt_max);
    if (!(pmax > 0))
        throw std::domain_error("zero maximum power");
    return e0 / pmax;
}

/// Saturated throughput bound with m data channels and n_f flows: every
/// exchange costs at least one control phase and one data phase.
inline double s_max(std::uint32_t m, std::uint32_t n_f, double bandwidth_bps, double t_payload, double t_cca_min,
                    double t_ctrl, double t_data, double t_sw)
{
    const double denom = t_cca_min + t_ctrl + t_data + t_sw;
    if (!(denom > 0))
        throw std::domain_error("zero exchange duration");
    return static_cast<double>(std::min(m, n_f)) * t_payload * bandwidth_bps / denom;
}

// --- Aggregation over replications ----------------------------------------

inline double mean(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); zero for fewer than two samples.
inline double stddev(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace dish
