#pragma once

// Control-plane semantics shared by all five MAC variants: frame set and
// timing, the channel usage table, MCC problem detection, and the per-variant
// cooperation, channel selection and power-saving rules. The engine drives
// these; nothing here holds simulation state beyond a node's own table.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dish/random.hpp"
#include "dish/types.hpp"

namespace dish {

enum class FrameKind : std::uint8_t { PRA, PRB, CFA, CFB, INV, NCF, DATA, ACK };

inline constexpr std::string_view to_string(FrameKind k)
{
    switch (k) {
    case FrameKind::PRA: return "PRA";
    case FrameKind::PRB: return "PRB";
    case FrameKind::CFA: return "CFA";
    case FrameKind::CFB: return "CFB";
    case FrameKind::INV: return "INV";
    case FrameKind::NCF: return "NCF";
    case FrameKind::DATA: return "DATA";
    case FrameKind::ACK: return "ACK";
    }
    return "?";
}

inline constexpr bool is_control(FrameKind k) { return k != FrameKind::DATA && k != FrameKind::ACK; }

/// One reservation of a data channel by a sender/receiver pair.
struct UsageEntry {
    ChannelId channel = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    SimTime release = 0;

    bool involves(NodeId n) const { return sender == n || receiver == n; }
    friend bool operator==(const UsageEntry&, const UsageEntry&) = default;
};

/// Any frame on the air. Control frames use `channel` for the proposed or
/// confirmed data channel; the frame itself always travels on the control
/// channel. DATA/ACK travel on `channel`.
struct Frame {
    FrameKind kind = FrameKind::PRA;
    NodeId src = 0;
    NodeId dst = kBroadcast;
    ChannelId channel = 0;
    SimTime reservation_until = 0;    ///< CFA/CFB
    std::optional<UsageEntry> usage;  ///< INV: blocking exchange; NCF: withdrawn reservation
    std::uint64_t handshake = 0;      ///< exchange this frame belongs to
    std::uint64_t packet = 0;         ///< DATA/ACK

    ChannelId air_channel() const { return is_control(kind) ? kControlChannel : channel; }
    friend bool operator==(const Frame&, const Frame&) = default;
};

using ControlFrame = Frame;

// --- Timing -----------------------------------------------------------------

/// Durations in microseconds.
struct TimingParams {
    double bandwidth_bps = 1e6;
    std::uint32_t plcp_bytes = 15;
    std::uint32_t ctrl_bytes = 20;
    std::uint32_t inv_bytes = 30;
    std::uint32_t ack_bytes = 14;
    std::uint32_t payload_bytes = 2048;
    SimTime sifs = 10;
    SimTime difs = 50;
    SimTime ccap = 35;
    SimTime slot = 20;
    SimTime switch_delay = 0;
    std::uint32_t cw_min = 31;
    std::uint32_t cw_max = 1023;
    std::uint32_t retry_limit = 7;

    SimTime airtime(std::uint64_t bytes) const
    {
        return static_cast<SimTime>(std::ceil(static_cast<double>(bytes) * 8.0 * 1e6 / bandwidth_bps - 1e-9));
    }

    SimTime duration(FrameKind k) const
    {
        switch (k) {
        case FrameKind::INV: return airtime(inv_bytes + plcp_bytes);
        case FrameKind::DATA: return airtime(payload_bytes + plcp_bytes);
        case FrameKind::ACK: return airtime(ack_bytes + plcp_bytes);
        default: return airtime(ctrl_bytes + plcp_bytes);
        }
    }

    SimTime t_payload() const { return airtime(payload_bytes); }

    /// DIFS + PRA + SIFS + PRB + CCAP + CFA + SIFS + CFB.
    SimTime t_ctrl() const
    {
        const SimTime c = duration(FrameKind::PRA);
        return difs + 4 * c + 2 * sifs + ccap;
    }

    /// DATA + SIFS + ACK.
    SimTime t_data() const { return duration(FrameKind::DATA) + sifs + duration(FrameKind::ACK); }

    /// Backoff applied after an INV that was detected but not decodable.
    SimTime estimated_backoff() const { return t_data(); }
};

struct TimelinePhase {
    std::string_view name;
    SimTime start = 0;
    SimTime duration = 0;
    bool on_data_channel = false;
};

/// Nominal schedule of one successful exchange, relative to the start of DIFS.
inline std::vector<TimelinePhase> handshake_timeline(const TimingParams& p)
{
    std::vector<TimelinePhase> out;
    SimTime t = 0;
    auto add = [&](std::string_view name, SimTime d, bool data = false) {
        out.push_back({name, t, d, data});
        t += d;
    };
    add("DIFS", p.difs);
    add("PRA", p.duration(FrameKind::PRA));
    add("SIFS", p.sifs);
    add("PRB", p.duration(FrameKind::PRB));
    add("CCAP", p.ccap);
    add("CFA", p.duration(FrameKind::CFA));
    add("SIFS", p.sifs);
    add("CFB", p.duration(FrameKind::CFB));
    add("SWITCH", p.switch_delay, true);
    add("DATA", p.duration(FrameKind::DATA), true);
    add("SIFS", p.sifs, true);
    add("ACK", p.duration(FrameKind::ACK), true);
    return out;
}

// --- Channel usage table ----------------------------------------------------

/// Per-node cache of data-channel reservations learned from control frames.
class ChannelUsageTable {
public:
    std::span<const UsageEntry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Insert, or refresh the release time of the (channel, pair) entry.
    void upsert(const UsageEntry& e)
    {
        for (auto& x : entries_)
            if (x.channel == e.channel && x.sender == e.sender && x.receiver == e.receiver) {
                x.release = e.release;
                return;
            }
        entries_.push_back(e);
    }

    void remove(ChannelId channel, NodeId sender, NodeId receiver)
    {
        std::erase_if(entries_, [&](const UsageEntry& x) {
            return x.channel == channel && x.sender == sender && x.receiver == receiver;
        });
    }

    /// Drop entries whose release time has passed.
    void prune(SimTime now)
    {
        std::erase_if(entries_, [&](const UsageEntry& x) { return x.release <= now; });
    }

    /// Latest-releasing live entry on `channel` not belonging to the given pair.
    std::optional<UsageEntry> blocking_on_channel(ChannelId channel, SimTime now, NodeId s = kBroadcast,
                                                  NodeId d = kBroadcast) const
    {
        return latest([&](const UsageEntry& x) {
            return x.channel == channel && x.release > now && !(x.sender == s && x.receiver == d);
        });
    }

    /// Latest-releasing live entry engaging `node`, excluding the given pair.
    std::optional<UsageEntry> blocking_node(NodeId node, SimTime now, NodeId s = kBroadcast,
                                            NodeId d = kBroadcast) const
    {
        return latest([&](const UsageEntry& x) {
            return x.involves(node) && x.release > now && !(x.sender == s && x.receiver == d);
        });
    }

    bool channel_busy(ChannelId channel, SimTime now) const { return blocking_on_channel(channel, now).has_value(); }

    /// Data channels 1..m with no live entry, ascending.
    std::vector<ChannelId> free_channels(std::uint32_t m, SimTime now) const
    {
        std::vector<ChannelId> out;
        for (ChannelId c = 1; c <= m; ++c)
            if (!channel_busy(c, now))
                out.push_back(c);
        return out;
    }

    /// Earliest release among live entries, kNever if none.
    SimTime earliest_release(SimTime now) const
    {
        SimTime t = kNever;
        for (const auto& x : entries_)
            if (x.release > now)
                t = std::min(t, x.release);
        return t;
    }

    friend bool operator==(const ChannelUsageTable&, const ChannelUsageTable&) = default;

private:
    template <typename Pred>
    std::optional<UsageEntry> latest(Pred pred) const
    {
        std::optional<UsageEntry> best;
        for (const auto& x : entries_)
            if (pred(x) && (!best || x.release > best->release))
                best = x;
        return best;
    }

    std::vector<UsageEntry> entries_;
};

/// Apply an overheard control frame. CFA/CFB insert or refresh a reservation,
/// NCF withdraws the CFA-derived one; expired entries are pruned.
inline void update_table(ChannelUsageTable& table, const Frame& f, SimTime now)
{
    switch (f.kind) {
    case FrameKind::CFA:
        table.upsert({f.channel, f.src, f.dst, f.reservation_until});
        break;
    case FrameKind::CFB:
        table.upsert({f.channel, f.dst, f.src, f.reservation_until});
        break;
    case FrameKind::NCF:
        if (f.usage)
            table.remove(f.usage->channel, f.usage->sender, f.usage->receiver);
        else
            table.remove(f.channel, f.src, f.dst);
        break;
    default:
        break;
    }
    table.prune(now);
}

inline ChannelUsageTable updated_table(ChannelUsageTable table, const Frame& f, SimTime now)
{
    update_table(table, f, now);
    return table;
}

// --- MCC problems -------------------------------------------------------------

struct MccProblem {
    enum class Kind : std::uint8_t { ChannelConflict, DeafTerminal };
    Kind kind = Kind::ChannelConflict;
    ChannelId channel = 0;  ///< conflicted channel (ChannelConflict)
    NodeId target = 0;      ///< deaf receiver (DeafTerminal)
    UsageEntry blocking;

    friend bool operator==(const MccProblem&, const MccProblem&) = default;
};

/// What a third party concludes from an overheard PRA or PRB. For a PRA the
/// destination is checked for deafness first, then the proposed channel; for a
/// PRB only the confirmed channel is checked.
inline std::optional<MccProblem> detect_mcc(const ChannelUsageTable& table, const Frame& f, SimTime now)
{
    if (f.kind != FrameKind::PRA && f.kind != FrameKind::PRB)
        return std::nullopt;
    const NodeId s = f.kind == FrameKind::PRA ? f.src : f.dst;
    const NodeId d = f.kind == FrameKind::PRA ? f.dst : f.src;
    if (f.kind == FrameKind::PRA)
        if (auto e = table.blocking_node(f.dst, now, s, d))
            return MccProblem{MccProblem::Kind::DeafTerminal, e->channel, f.dst, *e};
    if (auto e = table.blocking_on_channel(f.channel, now, s, d))
        return MccProblem{MccProblem::Kind::ChannelConflict, f.channel, d, *e};
    return std::nullopt;
}

// --- Variants -------------------------------------------------------------------

enum class ProtocolVariant : std::uint8_t { DishP, NonDish, NonDishPsm, GenieInSitu, Altruistic };

inline constexpr std::array<ProtocolVariant, 5> kAllVariants{ProtocolVariant::DishP, ProtocolVariant::NonDish,
                                                             ProtocolVariant::NonDishPsm,
                                                             ProtocolVariant::GenieInSitu,
                                                             ProtocolVariant::Altruistic};

inline constexpr std::string_view to_string(ProtocolVariant v)
{
    switch (v) {
    case ProtocolVariant::DishP: return "dish-p";
    case ProtocolVariant::NonDish: return "non-dish";
    case ProtocolVariant::NonDishPsm: return "non-dish-psm";
    case ProtocolVariant::GenieInSitu: return "genie-in-situ";
    case ProtocolVariant::Altruistic: return "altruistic";
    }
    return "?";
}

inline ProtocolVariant parse_variant(std::string_view s)
{
    for (auto v : kAllVariants)
        if (s == to_string(v))
            return v;
    if (s == "dishp")
        return ProtocolVariant::DishP;
    if (s == "nondish")
        return ProtocolVariant::NonDish;
    if (s == "nondish-psm" || s == "psm")
        return ProtocolVariant::NonDishPsm;
    if (s == "genie")
        return ProtocolVariant::GenieInSitu;
    throw std::invalid_argument("unknown protocol variant '" + std::string(s) + "'");
}

/// Whether a node of this kind keeps its radio on and records overheard
/// control frames when it has nothing of its own to do.
inline constexpr bool gathers_information(ProtocolVariant v, NodeKind k)
{
    if (k == NodeKind::Altruist)
        return true;
    return v == ProtocolVariant::DishP || v == ProtocolVariant::NonDish || v == ProtocolVariant::GenieInSitu;
}

/// Radio physically off when idle (ideal wake-on-request PSM).
inline constexpr bool sleeps_when_idle(ProtocolVariant v, NodeKind k)
{
    return k == NodeKind::Peer && (v == ProtocolVariant::NonDishPsm || v == ProtocolVariant::Altruistic);
}

/// Idle time is billed at the SLEEP rate. Genie peers listen but are billed as asleep.
inline constexpr bool billed_asleep_when_idle(ProtocolVariant v, NodeKind k)
{
    return sleeps_when_idle(v, k) || (k == NodeKind::Peer && v == ProtocolVariant::GenieInSitu);
}

inline void check_kind_allowed(ProtocolVariant v, NodeKind k)
{
    if (k == NodeKind::Altruist && v != ProtocolVariant::Altruistic)
        throw std::invalid_argument("altruists only exist in the altruistic variant");
}

struct InvAction {
    SimTime wait = 0;          ///< carrier-sensed wait into the CCAP window
    bool genie_gated = false;  ///< only the genie-selected neighbor may act
};

/// Whether a detector of `kind` answers an MCC problem with an INV, and after
/// how long. The wait is drawn uniformly from whole microseconds in [0, ccap).
inline std::optional<InvAction> cooperation_policy(ProtocolVariant variant, NodeKind kind, const MccProblem&,
                                                   Rng& rng, SimTime ccap)
{
    check_kind_allowed(variant, kind);
    bool acts = false;
    bool gated = false;
    switch (variant) {
    case ProtocolVariant::DishP: acts = true; break;
    case ProtocolVariant::NonDish:
    case ProtocolVariant::NonDishPsm: acts = false; break;
    case ProtocolVariant::GenieInSitu: acts = gated = true; break;
    case ProtocolVariant::Altruistic: acts = kind == NodeKind::Altruist; break;
    }
    if (!acts)
        return std::nullopt;
    return InvAction{static_cast<SimTime>(rng.below(static_cast<std::uint64_t>(std::max<SimTime>(1, ccap)))), gated};
}

struct Detection {
    NodeId node = 0;
    MccProblem problem;
};

/// Genie choice: the detector whose blocking entry releases last (it can name
/// the longest wait); lowest id on ties.
inline std::optional<NodeId> best_neighbor(std::span<const Detection> detections)
{
    std::optional<Detection> best;
    for (const auto& d : detections)
        if (!best || d.problem.blocking.release > best->problem.blocking.release
            || (d.problem.blocking.release == best->problem.blocking.release && d.node < best->node))
            best = d;
    if (!best)
        return std::nullopt;
    return best->node;
}

// --- Node-side reactions ------------------------------------------------------

enum class FsmPhase : std::uint8_t {
    ControlIdle,
    Backoff,       ///< waiting out a random backoff or a known reservation
    CarrierSense,  ///< DIFS before PRA
    AwaitPRB,      ///< sender: PRA sent, through the CCAP window
    ReceiverCcap,  ///< receiver: PRA accepted, PRB and the CCAP window
    AwaitInv,      ///< INV energy detected in CCAP, waiting to decode it
    AwaitCFA,      ///< receiver
    AwaitCFB,      ///< sender
    Confirming,    ///< receiver sending CFB
    SendingNcf,
    DataExchange,
};

inline constexpr bool engaged(FsmPhase p) { return p != FsmPhase::ControlIdle && p != FsmPhase::Backoff; }

/// Phases in which an INV still concerns the node's pending handshake. Once
/// the receiver is sending CFB the exchange goes ahead.
inline constexpr bool inv_sensitive(FsmPhase p)
{
    return p == FsmPhase::AwaitPRB || p == FsmPhase::ReceiverCcap || p == FsmPhase::AwaitInv
        || p == FsmPhase::AwaitCFA || p == FsmPhase::AwaitCFB;
}

enum class HandshakeRole : std::uint8_t { Sender, Receiver };

struct InvResponse {
    enum class Action : std::uint8_t { Ignore, Abort };
    Action action = Action::Ignore;
    SimTime backoff_until = 0;
    bool suppress_cfb = false;
    std::optional<UsageEntry> learned;
};

/// Reaction of a handshake party to an INV. `inv` is empty when energy was
/// detected but the frame could not be decoded (collided INVs still alarm).
/// A decoded INV naming the handshake peer (deaf terminal) holds the node off
/// until that exchange ends. One naming another pair (channel conflict) only
/// marks the channel busy; the node contends again at once and picks another.
inline InvResponse on_inv_received(HandshakeRole role, FsmPhase phase, const std::optional<Frame>& inv,
                                   std::uint64_t handshake, NodeId peer, SimTime now, SimTime estimated_backoff)
{
    InvResponse r;
    if (!inv_sensitive(phase))
        return r;
    const bool receiver = role == HandshakeRole::Receiver;
    if (!inv) {
        r.action = InvResponse::Action::Abort;
        r.backoff_until = now + estimated_backoff;
        r.suppress_cfb = receiver;
        return r;
    }
    if (inv->handshake != handshake || !inv->usage) {
        // Someone else's INV. Once we already held back for it, give up this attempt.
        if (phase == FsmPhase::AwaitInv) {
            r.action = InvResponse::Action::Abort;
            r.backoff_until = now;
            r.suppress_cfb = receiver;
        }
        return r;
    }
    r.action = InvResponse::Action::Abort;
    r.backoff_until = inv->usage->involves(peer) ? std::max(now, inv->usage->release) : now;
    r.suppress_cfb = receiver;
    r.learned = inv->usage;
    return r;
}

struct ChannelChoice {
    std::optional<ChannelId> channel;
    SimTime defer_until = 0;  ///< meaningful when no channel is offered
};

/// Sender channel choice: uniform over channels the table deems free. The
/// non-cooperative PSM variant keeps no knowledge and draws from all channels.
inline ChannelChoice select_channel(ProtocolVariant variant, const ChannelUsageTable& table, std::uint32_t m,
                                    SimTime now, Rng& rng)
{
    if (m == 0)
        throw std::invalid_argument("no data channels");
    if (variant == ProtocolVariant::NonDishPsm)
        return {static_cast<ChannelId>(1 + rng.below(m)), 0};
    const auto free = table.free_channels(m, now);
    if (free.empty())
        return {std::nullopt, table.earliest_release(now)};
    return {free[rng.below(free.size())], 0};
}

/// Receiver's final choice carried in PRB: keep the proposal if it looks free
/// locally, else pick uniformly from the local free list, else decline.
inline std::optional<ChannelId> receiver_channel(ProtocolVariant variant, const ChannelUsageTable& table,
                                                 ChannelId proposal, std::uint32_t m, SimTime now, Rng& rng)
{
    if (variant == ProtocolVariant::NonDishPsm || !table.channel_busy(proposal, now))
        return proposal;
    const auto free = table.free_channels(m, now);
    if (free.empty())
        return std::nullopt;
    return free[rng.below(free.size())];
}

struct RadioActivity {
    bool engaged = false;  ///< handling its own traffic (sender or receiver)
    bool transmitting = false;
    bool receiving = false;
};

/// Billed radio state of a node.
inline RadioState psm_radio_policy(ProtocolVariant variant, NodeKind kind, const RadioActivity& a)
{
    if (a.transmitting)
        return RadioState::TX;
    const bool awake = a.engaged || !billed_asleep_when_idle(variant, kind);
    if (!awake)
        return RadioState::SLEEP;
    return a.receiving ? RadioState::RX : RadioState::IDLE;
}

} // namespace dish
