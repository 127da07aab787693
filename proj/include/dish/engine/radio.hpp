#pragma once

// Unit-disk reception with an interference range and SIR capture.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string_view>

#include "dish/topology.hpp"
#include "dish/types.hpp"

namespace dish {

struct RadioModel {
    double tx_range = 250.0;
    double interference_range = 500.0;
    double capture_threshold_db = 6.0;
    double path_loss_exponent = 4.0;

    void validate() const
    {
        if (!(tx_range > 0))
            throw std::invalid_argument("transmission range must be positive");
        if (!(interference_range >= tx_range))
            throw std::invalid_argument("interference range must be >= transmission range");
        if (!(capture_threshold_db > 0))
            throw std::invalid_argument("capture threshold must be positive");
        if (!(path_loss_exponent > 0))
            throw std::invalid_argument("path loss exponent must be positive");
    }

    /// Received power up to a constant. Distances are clamped at 0.1 m.
    double received_power(double d) const { return std::pow(std::max(d, 0.1), -path_loss_exponent); }
};

enum class ReceptionOutcome : std::uint8_t { Ok, Collided, NotHeard };

inline constexpr std::string_view to_string(ReceptionOutcome o)
{
    switch (o) {
    case ReceptionOutcome::Ok: return "ok";
    case ReceptionOutcome::Collided: return "collided";
    case ReceptionOutcome::NotHeard: return "not_heard";
    }
    return "?";
}

/// A transmission as seen by the propagation model.
struct AirSignal {
    Point origin;
    SimTime start = 0;
    SimTime end = 0;
    ChannelId channel = 0;
};

inline bool overlaps(const AirSignal& a, const AirSignal& b) { return a.start < b.end && b.start < a.end; }

/// Outcome of `wanted` at `receiver`. `listening` covers whether the receiver
/// was awake and tuned to the channel for the whole frame. Entries of
/// `concurrent` that are on another channel, do not overlap in time, or lie
/// beyond the interference range are ignored.
inline ReceptionOutcome reception_outcome(const AirSignal& wanted, std::span<const AirSignal> concurrent,
                                          Point receiver, bool listening, const RadioModel& radio)
{
    const double d = distance(wanted.origin, receiver);
    if (!listening || d > radio.tx_range)
        return ReceptionOutcome::NotHeard;
    double interference = 0.0;
    bool any = false;
    for (const auto& s : concurrent) {
        if (s.channel != wanted.channel || !overlaps(s, wanted))
            continue;
        const double di = distance(s.origin, receiver);
        if (di > radio.interference_range)
            continue;
        interference += radio.received_power(di);
        any = true;
    }
    if (!any)
        return ReceptionOutcome::Ok;
    const double sir_db = 10.0 * std::log10(radio.received_power(d) / interference);
    return sir_db >= radio.capture_threshold_db ? ReceptionOutcome::Ok : ReceptionOutcome::Collided;
}

} // namespace dish
