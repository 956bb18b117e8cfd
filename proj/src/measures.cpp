#include "skembed/measures.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "skembed/error.hpp"

namespace skembed {

namespace {

constexpr double kMeanTolerance = 1e-10;
constexpr double kPotentialTolerance = 1e-12;

void sort_and_check(std::vector<Atom>& atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.index < b.index; });
  for (std::size_t n = 1; n < atoms.size(); ++n) {
    if (atoms[n].index == atoms[n - 1].index) {
      throw InvalidArgument("measure has duplicate level index " +
                            std::to_string(atoms[n].index));
    }
  }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Atom> atoms) {
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!std::isfinite(a.weight) || a.weight < 0.0) {
      throw InvalidArgument("measure weight must be finite and non-negative");
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw InvalidArgument("measure weights sum to " + std::to_string(total) +
                          ", expected 1");
  }
  sort_and_check(atoms);
  std::erase_if(atoms, [](const Atom& a) { return a.weight == 0.0; });
  atoms_ = std::move(atoms);
}

DiscreteMeasure DiscreteMeasure::dirac(int index) {
  return DiscreteMeasure({{index, 1.0}});
}

DiscreteMeasure DiscreteMeasure::from_masses(std::vector<Atom> atoms,
                                             double drop_below) {
  std::erase_if(atoms, [&](const Atom& a) { return a.weight <= drop_below; });
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  if (!(total > 0.0)) throw InvalidArgument("measure has no positive mass");
  for (auto& a : atoms) a.weight /= total;
  sort_and_check(atoms);
  DiscreteMeasure out;
  out.atoms_ = std::move(atoms);
  return out;
}

double DiscreteMeasure::weight(int index) const {
  auto it = std::lower_bound(
      atoms_.begin(), atoms_.end(), index,
      [](const Atom& a, int v) { return a.index < v; });
  return (it != atoms_.end() && it->index == index) ? it->weight : 0.0;
}

bool DiscreteMeasure::contains(int index) const { return weight(index) > 0.0; }

int DiscreteMeasure::min_index() const {
  if (atoms_.empty()) throw InvalidArgument("empty measure");
  return atoms_.front().index;
}

int DiscreteMeasure::max_index() const {
  if (atoms_.empty()) throw InvalidArgument("empty measure");
  return atoms_.back().index;
}

double DiscreteMeasure::cdf(int index) const {
  double acc = 0.0;
  for (const auto& a : atoms_) {
    if (a.index > index) break;
    acc += a.weight;
  }
  return acc;
}

double moment(const DiscreteMeasure& mu, int p, double step) {
  if (p < 0) throw InvalidArgument("moment order must be non-negative");
  double acc = 0.0;
  for (const auto& a : mu.atoms()) acc += std::pow(a.index * step, p) * a.weight;
  return acc;
}

double mean(const DiscreteMeasure& mu, double step) {
  return moment(mu, 1, step);
}

double variance(const DiscreteMeasure& mu, double step) {
  const double m = mean(mu, step);
  return moment(mu, 2, step) - m * m;
}

double potential(const DiscreteMeasure& mu, double x_index, double step) {
  double acc = 0.0;
  for (const auto& a : mu.atoms()) {
    acc += std::abs(x_index - a.index) * step * a.weight;
  }
  return -acc;
}

bool convex_order(const DiscreteMeasure& lambda, const DiscreteMeasure& mu,
                  double step) {
  if (std::abs(mean(lambda, step) - mean(mu, step)) > kMeanTolerance) {
    return false;
  }
  std::set<int> grid;
  for (const auto& a : lambda.atoms()) grid.insert(a.index);
  for (const auto& a : mu.atoms()) grid.insert(a.index);
  // Both potentials are piecewise linear with kinks on the union of supports,
  // so domination at the kinks gives domination everywhere.
  for (int x : grid) {
    if (potential(lambda, x, step) < potential(mu, x, step) - kPotentialTolerance) {
      return false;
    }
  }
  return true;
}

namespace {

template <typename F>
void for_each_level(const DiscreteMeasure& a, const DiscreteMeasure& b, F f) {
  std::set<int> grid;
  for (const auto& x : a.atoms()) grid.insert(x.index);
  for (const auto& x : b.atoms()) grid.insert(x.index);
  for (int v : grid) f(v);
}

}  // namespace

double max_atom_deviation(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  double worst = 0.0;
  for_each_level(a, b, [&](int v) {
    worst = std::max(worst, std::abs(a.weight(v) - b.weight(v)));
  });
  return worst;
}

double total_variation(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  double acc = 0.0;
  for_each_level(a, b,
                 [&](int v) { acc += std::abs(a.weight(v) - b.weight(v)); });
  return 0.5 * acc;
}

double kolmogorov_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  double worst = 0.0;
  double fa = 0.0;
  double fb = 0.0;
  for_each_level(a, b, [&](int v) {
    fa += a.weight(v);
    fb += b.weight(v);
    worst = std::max(worst, std::abs(fa - fb));
  });
  return std::min(worst, 1.0);
}

void to_json(nlohmann::json& j, const DiscreteMeasure& mu) {
  auto atoms = nlohmann::json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({a.index, a.weight});
  j = nlohmann::json{{"atoms", atoms}};
}

void from_json(const nlohmann::json& j, DiscreteMeasure& mu) {
  if (!j.is_object() || !j.contains("atoms") || !j.at("atoms").is_array()) {
    throw InvalidArgument("measure JSON must be {\"atoms\": [[index, weight], ...]}");
  }
  std::vector<Atom> atoms;
  for (const auto& entry : j.at("atoms")) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
        !entry[1].is_number()) {
      throw InvalidArgument("measure atom must be [integer index, weight]");
    }
    atoms.push_back({entry[0].get<int>(), entry[1].get<double>()});
  }
  mu = DiscreteMeasure(std::move(atoms));
}

}  // namespace skembed
