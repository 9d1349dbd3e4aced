#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace minesearch {

struct RngState {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  bool operator==(const RngState&) const = default;
};

// Counter-based generator: the i-th draw of a stream is a pure function of
// (key, i), so named streams derived from one master seed never interact and
// a stream's position can be saved as two integers.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t key, std::uint64_t counter = 0) : state_{key, counter} {}
  explicit Rng(RngState state) : state_(state) {}

  // Stream `name`/`index` of `master`. Distinct (name, index) pairs give
  // statistically independent streams.
  static Rng stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  RngState state() const { return state_; }
  void restore(RngState s) { state_ = s; }

 private:
  RngState state_;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);
// FNV-1a over bytes; used for config hashes and blob checksums.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace minesearch
