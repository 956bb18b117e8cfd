#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "skembed/costs.hpp"
#include "skembed/measures.hpp"
#include "skembed/stopping.hpp"

namespace skembed {

/// One sampled path, reduced to where it stopped.
struct PathSample {
  std::size_t state = 0;  // index into the rule's state graph
  int k = 0;
  int x = 0;
};

/// Samples first, ..., first + n - 1 of the stream for `seed`. Sample i uses
/// its own generator seeded from (seed, i), so any partition of the index
/// range reproduces the same paths.
std::vector<PathSample> sample_paths(const RandomizedStoppingTime& xi, std::size_t n,
                                     std::uint64_t seed, std::size_t first = 0);

/// Number of samples stopped at each state, over n samples split across
/// `workers` threads.
std::vector<std::uint64_t> stopped_counts(const RandomizedStoppingTime& xi, std::size_t n,
                                          std::uint64_t seed, unsigned workers = 1);

struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% normal interval
};

struct SampleReport {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  DiscreteMeasure law;
  double kolmogorov = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  Estimate expected_time;
  std::optional<Estimate> cost;
};

/// max(0.01, sqrt(ln(2 / (1 - confidence)) / (2n))): the DKW radius.
double dkw_tolerance(std::size_t n, double confidence = 0.999);

/// Empirical law of the stopped position against `mu`. Passes when the
/// Kolmogorov distance is at most `tol` (default dkw_tolerance(n)). With a
/// cost the report also carries its estimate.
SampleReport verify_embedding(const RandomizedStoppingTime& xi, const DiscreteMeasure& mu,
                              std::size_t n, std::uint64_t seed,
                              std::optional<double> tol = std::nullopt, unsigned workers = 1,
                              const CostFunctional* cost = nullptr);

/// Sample mean of the cost at the stopped state. FeatureError if the rule's
/// lattice lacks a feature the cost needs.
Estimate estimate_cost(const RandomizedStoppingTime& xi, const CostFunctional& cost,
                       std::size_t n, std::uint64_t seed, unsigned workers = 1);

void to_json(nlohmann::json& j, const SampleReport& r);

}  // namespace skembed
