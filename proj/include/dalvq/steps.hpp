#pragma once

// Decreasing step sizes eps^i_{t+1}.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>

namespace dalvq {

enum class StepMode { GlobalClock, LocalClock };

std::string to_string(StepMode m);
StepMode step_mode_from_string(const std::string& s);

struct StepPolicy {
  StepMode mode = StepMode::LocalClock;
  double c = 1.0;
  double eps_max = 0.5;  // cap for the first few steps; must lie in (0, 1)
  std::optional<double> k1;
  std::optional<double> k2;

  /// Step used at tick t by a processor whose local count (active ticks in [0, t]) is n.
  double at(std::size_t t, std::size_t n) const {
    const std::size_t clock = mode == StepMode::GlobalClock ? t : n;
    return std::min(c / static_cast<double>(std::max<std::size_t>(clock, 1)), eps_max);
  }

  friend bool operator==(const StepPolicy&, const StepPolicy&) = default;
};

/// K1 <= eps * (t v 1) <= K2 over every step a run emits.
struct StepBounds {
  double k1 = 0.0;
  double k2 = 1.0;
};

} // namespace dalvq
