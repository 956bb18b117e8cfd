#pragma once

#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace skembed {

/// One atom of a lattice measure: integer level index and its probability.
struct Atom {
  int index = 0;
  double weight = 0.0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finitely supported probability measure on lattice levels.
///
/// Atoms are kept sorted by level index. Construction validates that weights
/// are non-negative, indices are distinct and the total mass is one within
/// `kMassTolerance`. Zero-weight atoms are dropped.
class DiscreteMeasure {
 public:
  static constexpr double kMassTolerance = 1e-12;

  DiscreteMeasure() = default;
  explicit DiscreteMeasure(std::vector<Atom> atoms);

  /// Dirac mass at a level.
  static DiscreteMeasure dirac(int index);

  /// Builds a measure from weights that are only approximately normalized
  /// (sums of floating-point masses). Weights below `drop_below` are removed
  /// and the rest rescaled to total one.
  static DiscreteMeasure from_masses(std::vector<Atom> atoms,
                                     double drop_below = 0.0);

  std::span<const Atom> atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }

  /// Weight at a level (0 off the support).
  double weight(int index) const;
  bool contains(int index) const;
  int min_index() const;
  int max_index() const;

  /// Cumulative distribution P(X <= index).
  double cdf(int index) const;

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) =
      default;

 private:
  std::vector<Atom> atoms_;
};

/// p-th moment in physical units: sum of (index * step)^p * weight.
double moment(const DiscreteMeasure& mu, int p, double step = 1.0);
double mean(const DiscreteMeasure& mu, double step = 1.0);
double variance(const DiscreteMeasure& mu, double step = 1.0);

/// Potential function U(x) = -sum |x - y| mu(dy), physical units.
double potential(const DiscreteMeasure& mu, double x_index, double step = 1.0);

/// Convex order lambda <= mu, decided from equal means and pointwise
/// potential domination on the union of both supports.
bool convex_order(const DiscreteMeasure& lambda, const DiscreteMeasure& mu,
                  double step = 1.0);

/// Largest per-atom absolute difference between two measures.
double max_atom_deviation(const DiscreteMeasure& a, const DiscreteMeasure& b);
/// Total-variation distance, 1/2 sum |a - b|.
double total_variation(const DiscreteMeasure& a, const DiscreteMeasure& b);
/// Kolmogorov distance sup |F_a - F_b| over lattice levels.
double kolmogorov_distance(const DiscreteMeasure& a, const DiscreteMeasure& b);

void to_json(nlohmann::json& j, const DiscreteMeasure& mu);
void from_json(const nlohmann::json& j, DiscreteMeasure& mu);

}  // namespace skembed
