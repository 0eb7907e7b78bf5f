#pragma once

#include <cstdint>
#include <string_view>

namespace mixreg {

// Counter-based pseudo-random generator with named substreams.
//
// Every draw is a pure function of (key, counter), so a stream can be
// re-created from its seed at any time and independent substreams can be
// handed to parallel workers without shared state. Substreams are derived
// by hashing a label (or index) into the parent key; the parent stream is
// not advanced by derivation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream keyed by `label` (e.g. "covariates").
  Rng substream(std::string_view label) const;
  // Derives an independent stream keyed by an integer (e.g. a worker id).
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  // Uniform on (0, 1].
  double next_uniform();
  // Standard normal via Box-Muller; pairs are cached.
  double next_gaussian();
  // Uniform on {0, 1, ..., n-1}.
  int next_index(int n);

 private:
  Rng(std::uint64_t key, int) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace mixreg
