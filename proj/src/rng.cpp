#include "rng.hpp"

#include <cmath>
#include <utility>

#include "normal.hpp"

namespace emcs {

const char* PurposeName(Purpose purpose) {
  switch (purpose) {
    case Purpose::kOriginalSample: return "original_sample";
    case Purpose::kTruthCalibration: return "truth_calibration";
    case Purpose::kPlacebo: return "placebo";
    case Purpose::kStructuredStylized: return "structured_stylized";
    case Purpose::kStructuredSequential: return "structured_sequential";
    case Purpose::kBootstrap: return "bootstrap";
    case Purpose::kRandomRanking: return "random_ranking";
    case Purpose::kSubsample: return "subsample";
    case Purpose::kTest: return "test";
  }
  return "unknown";
}

std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t SeedFromPath(std::uint64_t master_seed,
                           const std::vector<std::uint64_t>& path) {
  // Length goes in first so that (a) and (a, 0) hash differently.
  std::uint64_t h = Mix64(master_seed ^ Mix64(path.size()));
  for (std::uint64_t v : path) h = Mix64(h ^ Mix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
    : master_seed_(master_seed),
      path_(std::move(path)),
      engine_(SeedFromPath(master_seed_, path_)) {}

RngStream::RngStream(std::uint64_t master_seed, Purpose purpose,
                     std::uint64_t sample_idx, std::uint64_t rep_idx)
    : RngStream(master_seed, {static_cast<std::uint64_t>(purpose), sample_idx,
                              rep_idx}) {}

RngStream RngStream::Child(std::uint64_t tag) const {
  auto path = path_;
  path.push_back(tag);
  return RngStream(master_seed_, std::move(path));
}

double RngStream::Uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double RngStream::Normal() { return NormalQuantile(Uniform()); }

double RngStream::Logistic() {
  const double u = Uniform();
  return std::log(u) - std::log1p(-u);
}

std::uint64_t RngStream::Index(std::uint64_t n) {
  // Lemire's multiply-shift with rejection; exact uniformity.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace emcs
