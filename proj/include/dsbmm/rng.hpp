#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dsbmm {

/// Seeded random stream. Identical (seed, stream_id) pairs give identical
/// sequences; the full engine state can be saved and restored, which is what
/// makes checkpoint/resume bit-exact.
///
/// Variate generation deliberately avoids std:: distribution objects: their
/// algorithms are implementation-defined and some cache values between calls.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();
  /// Gamma with the given shape and unit scale.
  double gamma(double shape);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const RngStream& o) const { return engine_ == o.engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace dsbmm
