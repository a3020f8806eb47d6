#pragma once

#include <cstddef>
#include <vector>

namespace mecoff {

/// Observable state of the mobile user, extended with the last BS used
/// for offloading so that the handover cost stays Markov.
struct NetworkState {
  static constexpr int kNoBs = 0;

  bool task_present = false;
  int energy = 0;          // queued energy units, 0..h_max
  std::vector<int> gains;  // per-BS channel-state index
  int last_bs = kNoBs;     // kNoBs or 1..N

  bool operator==(const NetworkState&) const = default;
};

/// Joint offloading decision and energy allocation.
/// target: -1 drop/idle, 0 local, n in 1..N offload via BS n.
struct Action {
  static constexpr int kDrop = -1;
  static constexpr int kLocal = 0;

  int target = kDrop;
  int energy = 0;

  bool operator==(const Action&) const = default;
};

struct Transition {
  NetworkState state;
  Action action;
  double cost = 0.0;  // seconds
  NetworkState next_state;

  bool operator==(const Transition&) const = default;
};

/// Actions are laid out target-major: (target + 1) * (h_max + 1) + energy,
/// so (-1, 0) is index 0 and lower indices win argmin ties.
inline std::size_t action_count(int n_bs, int h_max) {
  return static_cast<std::size_t>(n_bs + 2) * static_cast<std::size_t>(h_max + 1);
}

inline std::size_t action_index(const Action& a, int h_max) {
  return static_cast<std::size_t>(a.target + 1) * static_cast<std::size_t>(h_max + 1) +
         static_cast<std::size_t>(a.energy);
}

inline Action action_from_index(std::size_t index, int h_max) {
  const auto width = static_cast<std::size_t>(h_max + 1);
  return {static_cast<int>(index / width) - 1, static_cast<int>(index % width)};
}

}  // namespace mecoff
