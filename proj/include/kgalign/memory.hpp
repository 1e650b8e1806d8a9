#pragma once

#include <cstddef>
#include <cstdint>

namespace kgalign::memory {

/// Bytes currently held through malloc/new by code linked against this library.
std::int64_t current_bytes();
/// High-water mark of current_bytes() since the last reset.
std::int64_t peak_bytes();
/// Sets the high-water mark to the current level.
void reset_peak();

/// Measures the allocation high-water mark above the level at construction.
class PeakScope {
 public:
  PeakScope() : base_(current_bytes()) { reset_peak(); }
  std::int64_t peak_delta() const { return peak_bytes() - base_; }

 private:
  std::int64_t base_;
};

}  // namespace kgalign::memory
