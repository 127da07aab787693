#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace dish {

using NodeId = std::uint32_t;
using ChannelId = std::uint32_t;

/// Simulation clock in integer microseconds.
using SimTime = std::int64_t;

inline constexpr NodeId kBroadcast = std::numeric_limits<NodeId>::max();
inline constexpr ChannelId kControlChannel = 0;
inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

inline constexpr double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-6; }

enum class NodeKind : std::uint8_t { Peer, Altruist };

enum class RadioState : std::uint8_t { TX = 0, RX = 1, IDLE = 2, SLEEP = 3 };
inline constexpr std::size_t kRadioStateCount = 4;

inline constexpr std::string_view to_string(NodeKind k)
{
    return k == NodeKind::Peer ? "peer" : "altruist";
}

inline constexpr std::string_view to_string(RadioState s)
{
    switch (s) {
    case RadioState::TX: return "TX";
    case RadioState::RX: return "RX";
    case RadioState::IDLE: return "IDLE";
    case RadioState::SLEEP: return "SLEEP";
    }
    return "?";
}

} // namespace dish
