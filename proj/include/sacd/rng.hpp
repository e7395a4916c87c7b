#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace sacd {

using Rng = std::mt19937_64;

// Distribution objects are constructed per draw so a stream's output is a
// pure function of the engine state.
inline double draw_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double draw_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double draw_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t draw_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Inverse-CDF categorical draw over an explicit probability vector.
// Rounding residue in the running sum falls back to the last index with
// positive mass, never to a zero-probability one.
inline std::size_t draw_categorical(Rng& rng, const std::vector<double>& probs) {
  const double u = draw_uniform(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

// Deterministic substream seeding: one master seed fans out to named streams.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{seed, stream_id, std::uint64_t{0x9e3779b97f4a7c15ULL}};
  return Rng(seq);
}

inline std::string rng_state_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_state_string(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  return rng;
}

}  // namespace sacd
