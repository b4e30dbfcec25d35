#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace emcs {

// Tags for the third coordinate of a stream path. Every consumer of
// randomness in a run gets a distinct (purpose, sample, rep) path.
enum class Purpose : std::uint32_t {
  kOriginalSample = 1,
  kTruthCalibration = 2,
  kPlacebo = 3,
  kStructuredStylized = 4,
  kStructuredSequential = 5,
  kBootstrap = 6,
  kRandomRanking = 7,
  kSubsample = 8,
  kTest = 99,
};

const char* PurposeName(Purpose purpose);

// Hash-derived random stream. The generator state is a pure function of
// (master_seed, path), so streams can be created in any order on any thread.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path);
  RngStream(std::uint64_t master_seed, Purpose purpose, std::uint64_t sample_idx,
            std::uint64_t rep_idx = 0);

  std::uint64_t master_seed() const { return master_seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  // Derived stream one level deeper; does not consume draws from this one.
  RngStream Child(std::uint64_t tag) const;

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double Uniform();
  // Standard normal via inverse CDF (one uniform per draw).
  double Normal();
  // Standard logistic via inverse CDF.
  double Logistic();
  // Uniform integer in [0, n).
  std::uint64_t Index(std::uint64_t n);

  std::uint64_t Next() { return engine_(); }

 private:
  std::uint64_t master_seed_;
  std::vector<std::uint64_t> path_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to fold the path into a seed.
std::uint64_t Mix64(std::uint64_t x);

}  // namespace emcs
