#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moranq/discretize.hpp"
#include "moranq/moran.hpp"
#include "moranq/solver.hpp"

namespace moranq {

/// One Voronoi cell of a quantizer restricted to the atom support.
struct Cell {
  double codepoint = 0.0;
  /// Midpoint boundaries; the outer cells end at the support hull.
  double lo = 0.0;
  double hi = 0.0;
  /// Half-open atom range [first_atom, end_atom).
  std::size_t first_atom = 0;
  std::size_t end_atom = 0;
  double mass = 0.0;
  /// I_a: sum of w |x - a|^r over the cell's atoms.
  double error = 0.0;
  /// S_a: antichain cylinders holding at least one of the cell's atoms.
  std::size_t incidence = 0;
};

struct CellReport {
  std::vector<Cell> cells;
  double j_min = 0.0;
  double j_max = 0.0;
  double total = 0.0;
  double total_mass = 0.0;
  std::size_t max_incidence = 0;
  bool has_incidence = false;

  double spread() const { return j_max / j_min; }
};

/// Cells by midpoint boundaries, atoms on a boundary assigned left. With an
/// antichain, S_a is filled in; the antichain must come from the spec the
/// measure was built from.
CellReport cell_report(const AtomMeasure& measure, const Quantizer& quantizer,
                       const Antichain* antichain = nullptr);
inline CellReport cell_report(const AtomMeasure& measure, const Quantizer& quantizer,
                              const Antichain& antichain) {
  return cell_report(measure, quantizer, &antichain);
}

/// Rule mapping a codebook size to an antichain level.
struct KRule {
  enum class Kind { kAuto, kPaper };
  Kind kind = Kind::kAuto;
  /// Surrogate for the proof constant in the sandwich rule.
  double m_surrogate = 0.0;

  /// "auto" or "paper:M".
  static KRule parse(const std::string& text);
  std::string to_string() const;
};

/// Lazily grown table of antichain cardinalities phi_{k,r}.
class PhiTable {
 public:
  PhiTable(const MoranSpec& spec, double r, std::size_t cap = kDefaultAntichainCap);
  std::size_t phi(int k) const;

 private:
  MoranSpec spec_;
  double r_;
  std::size_t cap_;
  mutable std::vector<std::size_t> phi_;
};

/// auto: max{k >= 1 : phi_k <= n}, 0 (the root) when phi_1 > n.
/// paper(M): the k with (M+2) phi_k <= n < (M+2) phi_{k+1}.
int choose_k(const PhiTable& table, std::size_t n, const KRule& rule);

struct SweepRow {
  std::size_t n = 0;
  double e_pow_r = 0.0;
  double e = 0.0;
  double delta = 0.0;
  double j_min = 0.0;
  double j_max = 0.0;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  double ratio_delta = 0.0;
  double spread = 0.0;
  int k_used = 0;
};

struct SweepOptions {
  std::size_t n_min = 2;
  std::size_t n_max = 2;
  KRule k_rule{};
  /// Run even when the depth fails the adequacy check at n_max.
  bool force = false;
  double safety = 0.01;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  Adequacy adequacy;
  std::vector<std::string> warnings;
};

/// One DP to n_max + 1 feeds every row. Throws AdequacyError (with the
/// required depth) when the measure is too coarse, unless forced.
SweepResult sweep(const MoranSpec& spec, const AtomMeasure& measure, double r,
                  const SweepOptions& options);

struct CensusReport {
  int k = 0;
  /// L_sigma, parallel to the antichain members.
  std::vector<std::size_t> counts;
  std::size_t l_min = 0;
  std::size_t l_max = 0;
  std::size_t zero_count = 0;
  std::size_t total = 0;
  /// Fraction of (sigma, omega), omega three levels below sigma, whose
  /// cylinder holds a codepoint. Unavailable when the levels run out.
  bool coverage_available = false;
  double grandchild_coverage = 0.0;
  std::size_t grandchildren = 0;
};

CensusReport census(const AtomMeasure& measure, const Quantizer& quantizer,
                    const Antichain& antichain, const MoranSpec& spec);

struct DimensionEstimate {
  /// Least-squares slope of log n against -log e_{n,r}.
  double slope = 0.0;
  double s_probe = 0.0;
  std::vector<std::size_t> n;
  /// n^{r/s} e^r_{n,r} per row.
  std::vector<double> coefficients;
  double coefficient_min = 0.0;
  double coefficient_max = 0.0;
};

/// Fits over rows with n_lo <= n <= n_hi; s_probe defaults to the slope.
DimensionEstimate dimension_estimate(std::span<const SweepRow> rows, std::size_t n_lo,
                                     std::size_t n_hi, double r,
                                     std::optional<double> s_probe = std::nullopt);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_sweep_jsonl(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace moranq
