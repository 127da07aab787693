#pragma once

#include "dish/engine/event_queue.hpp"
#include "dish/engine/radio.hpp"
#include "dish/engine/scenario.hpp"
#include "dish/engine/simulator.hpp"
#include "dish/engine/traffic.hpp"
