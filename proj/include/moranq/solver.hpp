#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moranq/discretize.hpp"

namespace moranq {

enum class Method { kDpExact, kLloyd, kOracle };

std::string to_string(Method m);

struct CellCost {
  double cost = 0.0;
  double center = 0.0;
};

/// Optimal one-center cost of contiguous atom ranges.
///
/// r == 2 and r == 1 are answered in O(1) and O(log N) from prefix sums
/// (weighted mean, lower weighted median). Other r >= 1 use golden-section
/// search on the convex objective over [x_i, x_j]. For 0 < r < 1 the
/// objective is concave between atoms; the best atom is refined by a
/// bracketed search and the result is flagged non-certified.
class CellCostTable {
 public:
  CellCostTable(const AtomMeasure& measure, double r);

  /// Inclusive atom range [i, j].
  CellCost operator()(std::size_t i, std::size_t j) const;
  /// Same as operator() but in extended precision, cost only.
  long double cost(std::size_t i, std::size_t j) const;

  double r() const { return r_; }
  bool certified() const { return r_ >= 1.0; }
  const AtomMeasure& measure() const { return *measure_; }

  /// Sum of w |x - center|^r over [i, j], compensated.
  double evaluate(std::size_t i, std::size_t j, double center) const;

 private:
  std::size_t lower_median(std::size_t i, std::size_t j) const;
  CellCost golden(std::size_t i, std::size_t j, double lo, double hi) const;

  const AtomMeasure* measure_;
  double r_;
};

CellCost cell_cost(const AtomMeasure& measure, std::size_t i, std::size_t j, double r);

struct Quantizer {
  std::vector<double> codepoints;
  std::size_t n = 0;
  double r = 2.0;
  /// e^r_{n,r} of the atom measure (the r-th power error).
  double cost = 0.0;
  Method method = Method::kDpExact;
  /// e^r_{j,r} for j = 1..n when produced by the DP.
  std::vector<double> per_layer_costs;
  bool certified = true;
  std::vector<std::string> warnings;
};

enum class DpStrategy { kDivideConquer, kQuadratic };

/// Result of the layered DP over contiguous partitions. Keeps the argmin
/// table so the optimal partition for any n <= max_layers() can be
/// recovered. Refers to the measure it was built from, which must outlive it.
class DpSolution {
 public:
  std::size_t max_layers() const { return layers_; }
  std::size_t requested_layers() const { return requested_; }
  /// Exact e^r_{t,r} of the recovered t-cell partition. Zero for t at or
  /// above the atom count.
  double layer_cost(std::size_t t) const;
  /// The DP recurrence value for t cells (prefix-sum arithmetic).
  double recurrence_cost(std::size_t t) const;
  /// Atom ranges [first, last] of the optimal t-cell partition.
  std::vector<std::pair<std::size_t, std::size_t>> cells(std::size_t t) const;
  Quantizer quantizer(std::size_t t) const;
  bool certified() const { return table_.certified(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend DpSolution dp_optimal(const AtomMeasure&, std::size_t, double, DpStrategy);
  explicit DpSolution(const AtomMeasure& measure, double r) : table_(measure, r) {}

  CellCostTable table_;
  std::size_t atoms_ = 0;
  std::size_t layers_ = 0;
  std::size_t requested_ = 0;
  // argmin_[(t - 1) * (atoms_ + 1) + j]: start atom of the last cell when t
  // cells cover atoms [0, j).
  std::vector<std::uint32_t> argmin_;
  std::vector<double> recurrence_;
  std::vector<double> exact_;
  std::vector<std::string> warnings_;
};

/// Globally optimal quantizers for n = 1..n_max. Requests above the atom
/// count are clamped with a warning.
DpSolution dp_optimal(const AtomMeasure& measure, std::size_t n_max, double r,
                      DpStrategy strategy = DpStrategy::kDivideConquer);

struct LloydOptions {
  double tolerance = 1e-12;
  int max_iterations = 10'000;
};

struct LloydResult {
  Quantizer quantizer;
  int iterations = 0;
  /// Cost after each recentering step.
  std::vector<double> cost_history;
};

/// Alternating midpoint assignment (boundary atoms go left) and recentering.
LloydResult lloyd(const AtomMeasure& measure, std::span<const double> initial, double r,
                  const LloydOptions& options = {});

/// Exhaustive search over all contiguous partitions. N <= 60, n <= 5.
Quantizer oracle_optimal(const AtomMeasure& measure, std::size_t n, double r);

/// Image of a quantizer under x -> scale * x + shift.
Quantizer similarity_transport(const Quantizer& q, double scale, double shift);

/// Sum of w * d(x, codepoints)^r over all atoms.
double quantizer_cost(const AtomMeasure& measure, std::span<const double> codepoints, double r);

/// Deterministic initial codebook at the weighted (j - 1/2)/n quantiles.
std::vector<double> quantile_codebook(const AtomMeasure& measure, std::size_t n);

/// `# n=.. r=.. cost=.. method=..` followed by CSV `index,codepoint`.
void write_quantizer_csv(std::ostream& out, const Quantizer& q);

}  // namespace moranq
