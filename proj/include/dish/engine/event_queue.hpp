#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dish/types.hpp"

namespace dish {

/// Min-queue of timed events. Events at the same time pop in insertion order.
template <typename Payload>
class EventQueue {
public:
    struct Entry {
        SimTime time = 0;
        std::uint64_t seq = 0;
        Payload payload;
    };

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    SimTime now() const { return now_; }

    void push(SimTime time, Payload payload)
    {
        if (time < now_)
            throw std::logic_error("event scheduled in the past");
        heap_.push(Entry{time, next_seq_++, std::move(payload)});
    }

    const Entry& top() const { return heap_.top(); }

    Entry pop()
    {
        Entry e = heap_.top();
        heap_.pop();
        now_ = e.time;
        return e;
    }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    SimTime now_ = 0;
};

} // namespace dish
