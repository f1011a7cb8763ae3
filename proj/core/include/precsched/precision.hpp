#pragma once

#include <string>
#include <vector>

#include "precsched/lti.hpp"
#include "precsched/scheduler_types.hpp"

namespace precsched {

// An IEEE-754-style binary format described by its significand width
// (including the hidden bit) and exponent range.
struct RoundingSpec {
  int significand_bits = 53;
  int min_exponent = -1022;
  int max_exponent = 1023;

  double eps() const;          // unit roundoff 2^-significand_bits
  double delta() const;        // smallest subnormal 2^(min_exponent - significand_bits + 1)
  double max_finite() const;   // (2 - 2^(1 - significand_bits)) * 2^max_exponent

  static RoundingSpec binary16();
  static RoundingSpec binary32();
  static RoundingSpec binary64();
  // Accepts "binary16" | "binary32" | "binary64"; throws std::invalid_argument.
  static RoundingSpec from_name(const std::string& name);
};

// Closed intervals for the plant states and controller inputs in deviation
// coordinates (x - x_ss, u - u_ss). Used only by the conservative bound.
struct VariableRanges {
  std::vector<std::pair<double, double>> x;  // size n
  std::vector<std::pair<double, double>> u;  // size m
};

struct PrecisionPair {
  RoundingSpec lo = RoundingSpec::binary16();
  RoundingSpec hi = RoundingSpec::binary32();
};

// Round-to-nearest-even of v into the format's representable set. Overflow
// gives +-inf, underflow the nearest subnormal or zero; NaN and infinities
// pass through. Pure function of the bits of v.
double round_to_format(double v, const RoundingSpec& spec);

// Bit-accurate reduced-precision emulation: the nominal recursion with every
// scalar multiply and add rounded into the precision of the current sample
// immediately after the operation (no FMA; dot products row-major,
// left-to-right). Constants and stored initial values enter exactly.
Trajectory simulate_rounded(const SystemSpec& sys, const ScenarioSpec& scen,
                            const Schedule& sched, const PrecisionPair& prec);

// First-order sound bound on the absolute error of one controller + plant +
// output update evaluated in the given format, by propagating (magnitude,
// error) pairs through every scalar operation: mul adds Ma*Eb + Mb*Ea +
// eps*M + delta, add/sub adds Ea + Eb + eps*M + delta. Returns the max over
// all computed components. Throws std::invalid_argument on empty or
// non-finite ranges.
double conservative_step_error_bound(const SystemSpec& sys,
                                     const VariableRanges& ranges,
                                     const RoundingSpec& spec);

}  // namespace precsched
