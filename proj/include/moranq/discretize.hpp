#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moranq/moran.hpp"

namespace moranq {

inline constexpr std::size_t kDefaultAtomCap = 20'000'000;

/// Atom cap, overridable through the MORANQ_ATOM_CAP environment variable.
std::size_t atom_cap_from_env();

/// A finite measure on sorted, distinct positions with unit total mass.
///
/// Prefix sums of w, w*x and w*x^2 are kept in extended precision for the
/// interval cost queries of the solver.
class AtomMeasure {
 public:
  AtomMeasure() = default;

  /// Sorts, merges exactly equal positions and normalizes the weights.
  static AtomMeasure from_atoms(std::vector<double> positions, std::vector<double> weights,
                                double w_inf_bound = 0.0);

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }
  std::span<const double> positions() const { return positions_; }
  std::span<const double> weights() const { return weights_; }
  double position(std::size_t i) const { return positions_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double diameter() const { return empty() ? 0.0 : positions_.back() - positions_.front(); }

  /// Construction depth below the conditioning word (0 for ad-hoc atoms).
  int depth() const { return depth_; }
  /// Half the largest cylinder length at the construction depth; bounds the
  /// L-infinity transport distance to the measure being approximated.
  double w_inf_bound() const { return w_inf_bound_; }
  /// Fingerprint of the generating spec and conditioning word (0 if none).
  std::uint64_t source_id() const { return source_id_; }

  /// Sums over the half-open atom range [i, j).
  long double mass(std::size_t i, std::size_t j) const { return cum_w_[j] - cum_w_[i]; }
  long double first_moment(std::size_t i, std::size_t j) const { return cum_wx_[j] - cum_wx_[i]; }
  long double second_moment(std::size_t i, std::size_t j) const { return cum_wxx_[j] - cum_wxx_[i]; }
  std::span<const long double> cumulative_weights() const { return cum_w_; }

  /// Records where the atoms came from.
  void set_provenance(int depth, std::uint64_t source_id) {
    depth_ = depth;
    source_id_ = source_id;
  }

 private:
  void build_prefix_sums();

  std::vector<double> positions_;
  std::vector<double> weights_;
  std::vector<long double> cum_w_{0.0L};
  std::vector<long double> cum_wx_{0.0L};
  std::vector<long double> cum_wxx_{0.0L};
  int depth_ = 0;
  double w_inf_bound_ = 0.0;
  std::uint64_t source_id_ = 0;
};

/// One atom per depth-m cylinder, at the cylinder midpoint with the cylinder
/// mass. The order r does not change the atoms; it is accepted for symmetry
/// with the other constructors.
AtomMeasure discretize(const MoranSpec& spec, int depth, double r = 2.0,
                       std::size_t atom_cap = atom_cap_from_env());

/// The conditional measure on J_sigma pulled back to the base interval by
/// the orientation-preserving similitude of ratio c_sigma. Atoms are built
/// `depth` levels below sigma. For the root word this is discretize().
AtomMeasure conditional_rescaled(const MoranSpec& spec, const Word& sigma, int depth,
                                 double r = 2.0, std::size_t atom_cap = atom_cap_from_env());

/// w_inf_bound of discretize(spec, depth) without building the atoms.
double w_inf_bound_at_depth(const MoranSpec& spec, int depth);

struct BallMassProfile {
  std::vector<double> epsilons;
  std::vector<double> sup_mass;
  /// Least-squares slope of log sup_mass against log epsilon.
  double fitted_exponent = 0.0;
  /// log p_max / log c_min.
  double reference_exponent = 0.0;
  /// 4 / p_max.
  double reference_constant = 0.0;

  double reference_bound(double epsilon) const;
};

/// Largest atom mass in a closed ball of radius epsilon, by a two-pointer
/// sweep over the sorted atoms.
double sup_ball_mass(const AtomMeasure& measure, double epsilon);

/// Throws UsageError if some epsilon is below 2 * w_inf_bound.
BallMassProfile ball_mass_profile(const AtomMeasure& measure, std::span<const double> epsilons,
                                  const ValidationReport& constants);

struct Adequacy {
  bool adequate = false;
  /// w_inf_bound / e_{n,r}; adequate iff this is <= safety.
  double bound_ratio = 0.0;
  /// The r-th root error e_{n,r} of the atom measure.
  double error = 0.0;
};

Adequacy depth_adequacy(const AtomMeasure& measure, std::size_t target_n, double r,
                        double safety = 0.01);

/// Smallest depth whose discretization is adequate for target_n: a coarse
/// solve predicts e_{n,r}, the predicted depth is then verified and raised
/// until the check passes.
int choose_depth(const MoranSpec& spec, std::size_t target_n, double r, double safety = 0.01,
                 std::size_t atom_cap = atom_cap_from_env());

/// CSV with header `position,weight`, 17 significant digits.
void write_atoms_csv(std::ostream& out, const AtomMeasure& measure);

}  // namespace moranq
