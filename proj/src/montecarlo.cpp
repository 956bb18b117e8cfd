#include "skembed/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "skembed/error.hpp"

namespace skembed {

namespace {

// Counter-based stream: draw j of sample i is mix(key_i + (j + 1) * gamma),
// with the SplitMix64 finalizer as mix. No state is shared between samples.
class SampleStream {
 public:
  SampleStream(std::uint64_t seed, std::uint64_t index) : key_(mix(mix(seed) + index)) {}
  // 53 random bits in [0, 1); the distribution objects of the standard
  // library are not portable bit for bit.
  double uniform() {
    counter_ += kGamma;
    return static_cast<double>(mix(key_ + counter_) >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

PathSample draw(const RandomizedStoppingTime& xi, SampleStream& rng) {
  const auto& g = xi.graph();
  const auto roots = g.roots();
  std::size_t s = roots.front();
  if (roots.size() > 1) {
    double u = rng.uniform();
    for (std::size_t r : roots) {
      s = r;
      u -= xi.start().weight(g.state(r).x);
      if (u < 0.0) break;
    }
  }
  while (true) {
    const double p = xi.stop_prob(s);
    if (g.is_terminal(s) || (p > 0.0 && rng.uniform() < p)) break;
    const auto kids = g.children(s);
    double u = rng.uniform();
    std::size_t next = kids.back().target;
    for (const auto& e : kids) {
      u -= e.prob;
      if (u < 0.0) {
        next = e.target;
        break;
      }
    }
    s = next;
  }
  return {s, g.state(s).k, g.state(s).x};
}

void check_n(std::size_t n) {
  if (n == 0) throw InvalidArgument("sample count must be at least 1");
}

Estimate estimate_from(const std::vector<std::uint64_t>& counts,
                       const std::vector<double>& value, std::size_t n) {
  double sum = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s]) sum += static_cast<double>(counts[s]) * value[s];
  }
  const double mean = sum / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s]) ss += static_cast<double>(counts[s]) * (value[s] - mean) * (value[s] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, 1.96 * sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace

std::vector<PathSample> sample_paths(const RandomizedStoppingTime& xi, std::size_t n,
                                     std::uint64_t seed, std::size_t first) {
  check_n(n);
  std::vector<PathSample> out;
  out.reserve(n);
  for (std::size_t i = first; i < first + n; ++i) {
    SampleStream rng(seed, i);
    out.push_back(draw(xi, rng));
  }
  return out;
}

std::vector<std::uint64_t> stopped_counts(const RandomizedStoppingTime& xi, std::size_t n,
                                          std::uint64_t seed, unsigned workers) {
  check_n(n);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  const std::size_t states = xi.graph().size();
  std::vector<std::vector<std::uint64_t>> parts(workers, std::vector<std::uint64_t>(states, 0));
  auto run = [&](unsigned w) {
    const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i) {
      SampleStream rng(seed, i);
      ++parts[w][draw(xi, rng).state];
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (unsigned w = 1; w < workers; ++w) {
    for (std::size_t s = 0; s < states; ++s) parts[0][s] += parts[w][s];
  }
  return std::move(parts[0]);
}

double dkw_tolerance(std::size_t n, double confidence) {
  check_n(n);
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidArgument("confidence must lie in (0,1)");
  }
  return std::max(0.01, std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * n)));
}

SampleReport verify_embedding(const RandomizedStoppingTime& xi, const DiscreteMeasure& mu,
                              std::size_t n, std::uint64_t seed, std::optional<double> tol,
                              unsigned workers, const CostFunctional* cost) {
  if (cost) cost->check_features(xi.graph().spec());
  const auto counts = stopped_counts(xi, n, seed, workers);
  const auto& g = xi.graph();

  std::map<int, std::uint64_t> by_level;
  std::vector<double> time(g.size());
  for (std::size_t s = 0; s < g.size(); ++s) {
    time[s] = g.state(s).k * g.spec().time_step;
    if (counts[s]) by_level[g.state(s).x] += counts[s];
  }
  std::vector<Atom> atoms;
  for (const auto& [x, c] : by_level) {
    atoms.push_back({x, static_cast<double>(c) / static_cast<double>(n)});
  }

  SampleReport r;
  r.n = n;
  r.seed = seed;
  r.workers = std::max(1u, workers);
  r.law = DiscreteMeasure::from_masses(std::move(atoms));
  r.kolmogorov = kolmogorov_distance(r.law, mu);
  r.tolerance = tol ? *tol : dkw_tolerance(n);
  r.passed = r.kolmogorov <= r.tolerance;
  r.expected_time = estimate_from(counts, time, n);
  if (cost) {
    std::vector<double> value(g.size());
    for (std::size_t s = 0; s < g.size(); ++s) value[s] = cost->evaluate(g.state(s), g.spec());
    r.cost = estimate_from(counts, value, n);
  }
  return r;
}

Estimate estimate_cost(const RandomizedStoppingTime& xi, const CostFunctional& cost,
                       std::size_t n, std::uint64_t seed, unsigned workers) {
  cost.check_features(xi.graph().spec());
  const auto counts = stopped_counts(xi, n, seed, workers);
  const auto& g = xi.graph();
  std::vector<double> value(g.size(), 0.0);
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (counts[s]) value[s] = cost.evaluate(g.state(s), g.spec());
  }
  return estimate_from(counts, value, n);
}

void to_json(nlohmann::json& j, const SampleReport& r) {
  j = nlohmann::json::object();
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["workers"] = r.workers;
  j["law"] = r.law;
  j["kolmogorov"] = r.kolmogorov;
  j["tolerance"] = r.tolerance;
  j["passed"] = r.passed;
  j["expected_time"] = {{"mean", r.expected_time.mean},
                        {"half_width", r.expected_time.half_width}};
  if (r.cost) j["cost"] = {{"mean", r.cost->mean}, {"half_width", r.cost->half_width}};
}

}  // namespace skembed
