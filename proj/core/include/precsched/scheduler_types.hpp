#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace precsched {

// Enumerable so more levels can be added later; only two are implemented.
enum class Precision : std::uint8_t { lo = 0, hi = 1 };

struct ScheduleSegment {
  int start = 0;  // first sample, inclusive
  int end = 0;    // last sample, inclusive
  Precision prec = Precision::hi;
};

// Per-sample precision assignment in run-length form. Segments partition
// [0, N] and adjacent segments alternate precision. Synthesized schedules
// always start hi (sw is pinned hi before the first window); baseline
// schedules handed to verification may start lo.
struct Schedule {
  std::vector<ScheduleSegment> segments;
  int N = 0;

  // Throws std::invalid_argument; require_first_hi adds the synthesized-
  // schedule check.
  void validate(bool require_first_hi = false) const;
  Precision at(int sample) const;          // O(log #segments)
  std::vector<Precision> expand() const;   // length N+1
  int switch_count() const { return static_cast<int>(segments.size()) - 1; }
  double lo_fraction() const;

  // Builds run-length segments from a per-sample assignment (sw[i] = 1
  // meaning hi).
  static Schedule from_samples(const std::vector<int>& sw);
  static Schedule uniform(int N, Precision p);
};

}  // namespace precsched
