#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mecoff/rng.hpp"

namespace mecoff {

/// Fixed-capacity ring buffer; once full, each push overwrites the oldest
/// entry, so it always holds the most recent `capacity` items.
template <class T>
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayMemory capacity must be positive");
    items_.reserve(capacity);
  }

  void push(T item) {
    if (items_.size() < capacity_) items_.push_back(std::move(item));
    else items_[cursor_] = std::move(item);
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }

  /// i = 0 is the oldest held item.
  const T& operator[](std::size_t i) const noexcept {
    return items_.size() < capacity_ ? items_[i] : items_[(cursor_ + i) % capacity_];
  }

  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("cannot sample from an empty replay memory");
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(items_.size()));
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;  // next slot to write
  std::vector<T> items_;
};

}  // namespace mecoff
