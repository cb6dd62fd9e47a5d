#include "moranq/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "moranq/error.hpp"
#include "moranq/numeric.hpp"
#include "moranq/solver.hpp"

namespace moranq {

std::size_t atom_cap_from_env() {
  if (const char* env = std::getenv("MORANQ_ATOM_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultAtomCap;
}

void AtomMeasure::build_prefix_sums() {
  const std::size_t n = positions_.size();
  cum_w_.assign(n + 1, 0.0L);
  cum_wx_.assign(n + 1, 0.0L);
  cum_wxx_.assign(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    const long double x = positions_[i];
    const long double w = weights_[i];
    cum_w_[i + 1] = cum_w_[i] + w;
    cum_wx_[i + 1] = cum_wx_[i] + w * x;
    cum_wxx_[i + 1] = cum_wxx_[i] + w * x * x;
  }
}

namespace {

// Sorts atoms by position and merges exactly equal positions additively.
void sort_and_merge(std::vector<double>& pos, std::vector<double>& w) {
  const bool sorted = std::is_sorted(pos.begin(), pos.end());
  if (!sorted) {
    std::vector<std::size_t> order(pos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
    std::vector<double> p2(pos.size()), w2(pos.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      p2[i] = pos[order[i]];
      w2[i] = w[order[i]];
    }
    pos.swap(p2);
    w.swap(w2);
  }
  std::size_t out = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (out > 0 && pos[out - 1] == pos[i]) {
      w[out - 1] += w[i];
    } else {
      pos[out] = pos[i];
      w[out] = w[i];
      ++out;
    }
  }
  pos.resize(out);
  w.resize(out);
}

struct Frame {
  double lo;
  double length;
  double mass;
  int level;
};

std::size_t atom_count(const MoranSpec& spec, std::size_t first_level, int depth) {
  double count = 1.0;
  for (int d = 0; d < depth; ++d) count *= static_cast<double>(spec.level(first_level + d).count());
  if (count > static_cast<double>(std::numeric_limits<std::size_t>::max() / 2)) {
    return std::numeric_limits<std::size_t>::max() / 2;
  }
  return static_cast<std::size_t>(count);
}

double largest_ratio_product(const MoranSpec& spec, std::size_t first_level, int depth) {
  double prod = 1.0;
  for (int d = 0; d < depth; ++d) {
    const auto& ratios = spec.level(first_level + d).ratios;
    prod *= *std::max_element(ratios.begin(), ratios.end());
  }
  return prod;
}

// Midpoint atoms of every cylinder `depth` levels below a start interval,
// using construction steps first_level, first_level + 1, ...
AtomMeasure build_atoms(const MoranSpec& spec, std::size_t first_level, int depth,
                        std::size_t atom_cap) {
  require_admissible(spec);
  if (depth < 1) throw UsageError("discretization depth must be at least 1");
  for (int d = 0; d < depth; ++d) (void)spec.level(first_level + d);
  const std::size_t count = atom_count(spec, first_level, depth);
  if (count > atom_cap) {
    throw ResourceLimit("depth " + std::to_string(depth) + " needs " + std::to_string(count) +
                        " atoms, above the cap " + std::to_string(atom_cap));
  }

  std::vector<double> pos;
  std::vector<double> w;
  pos.reserve(count);
  w.reserve(count);
  std::vector<Frame> stack;
  stack.push_back({spec.base_lo, spec.base_length(), 1.0, 0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.level == depth) {
      pos.push_back(f.lo + 0.5 * f.length);
      w.push_back(f.mass);
      continue;
    }
    const Level& lv = spec.level(first_level + static_cast<std::size_t>(f.level));
    for (std::size_t j = lv.count(); j-- > 0;) {
      stack.push_back({f.lo + lv.child_offset(j) * f.length, f.length * lv.ratios[j],
                       f.mass * lv.probs[j], f.level + 1});
    }
  }
  sort_and_merge(pos, w);
  const double bound = 0.5 * spec.base_length() * largest_ratio_product(spec, first_level, depth);
  return AtomMeasure::from_atoms(std::move(pos), std::move(w), bound);
}

}  // namespace

AtomMeasure AtomMeasure::from_atoms(std::vector<double> positions, std::vector<double> weights,
                                    double w_inf_bound) {
  if (positions.size() != weights.size()) {
    throw UsageError("positions and weights differ in length");
  }
  if (positions.empty()) throw UsageError("an atom measure needs at least one atom");
  for (double w : weights) {
    if (!(w > 0.0)) throw UsageError("atom weights must be positive");
  }
  sort_and_merge(positions, weights);
  const long double total = std::accumulate(weights.begin(), weights.end(), 0.0L);
  if (std::abs(static_cast<double>(total) - 1.0) > 1e-12) {
    for (double& w : weights) w = static_cast<double>(w / total);
  }
  AtomMeasure m;
  m.positions_ = std::move(positions);
  m.weights_ = std::move(weights);
  m.w_inf_bound_ = w_inf_bound;
  m.build_prefix_sums();
  return m;
}

AtomMeasure discretize(const MoranSpec& spec, int depth, double /*r*/, std::size_t atom_cap) {
  AtomMeasure m = build_atoms(spec, 0, depth, atom_cap);
  m.set_provenance(depth, spec.fingerprint());
  return m;
}

AtomMeasure conditional_rescaled(const MoranSpec& spec, const Word& sigma, int depth,
                                 double r, std::size_t atom_cap) {
  (void)cylinder(spec, sigma, r);  // validates the word
  AtomMeasure m = build_atoms(spec, sigma.depth(), depth, atom_cap);
  std::uint64_t id = spec.fingerprint();
  for (int idx : sigma.indices) id = (id ^ static_cast<std::uint64_t>(idx)) * 1099511628211ull;
  m.set_provenance(depth, id);
  return m;
}

double w_inf_bound_at_depth(const MoranSpec& spec, int depth) {
  return 0.5 * spec.base_length() * largest_ratio_product(spec, 0, depth);
}

double BallMassProfile::reference_bound(double epsilon) const {
  return reference_constant * std::pow(epsilon, reference_exponent);
}

double sup_ball_mass(const AtomMeasure& measure, double epsilon) {
  const auto x = measure.positions();
  const auto cum = measure.cumulative_weights();
  const double width = 2.0 * epsilon;
  long double best = 0.0L;
  std::size_t j = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (j < i) j = i;
    while (j < x.size() && x[j] - x[i] <= width) ++j;
    best = std::max(best, cum[j] - cum[i]);
  }
  return std::min(1.0, static_cast<double>(best));
}

BallMassProfile ball_mass_profile(const AtomMeasure& measure, std::span<const double> epsilons,
                                  const ValidationReport& constants) {
  const double min_eps = 2.0 * measure.w_inf_bound();
  BallMassProfile prof;
  for (double eps : epsilons) {
    if (!(eps > 0.0) || eps < min_eps) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epsilon %.6g is below the atom resolution; minimum is %.17g",
                    eps, min_eps);
      throw UsageError(buf);
    }
    prof.epsilons.push_back(eps);
    prof.sup_mass.push_back(sup_ball_mass(measure, eps));
  }
  prof.reference_exponent = std::log(constants.p_max) / std::log(constants.c_min);
  prof.reference_constant = 4.0 / constants.p_max;

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < prof.epsilons.size(); ++i) {
    lx.push_back(std::log(prof.epsilons[i]));
    ly.push_back(std::log(prof.sup_mass[i]));
  }
  prof.fitted_exponent = lx.size() >= 2 ? least_squares_slope(lx, ly)
                                        : std::numeric_limits<double>::quiet_NaN();
  return prof;
}

Adequacy depth_adequacy(const AtomMeasure& measure, std::size_t target_n, double r,
                        double safety) {
  Adequacy a;
  if (target_n == 0) throw UsageError("target n must be at least 1");
  if (target_n >= measure.size()) {
    a.error = 0.0;
    a.bound_ratio = std::numeric_limits<double>::infinity();
    a.adequate = false;
    return a;
  }
  const DpSolution dp = dp_optimal(measure, target_n, r);
  a.error = std::pow(dp.layer_cost(target_n), 1.0 / r);
  a.bound_ratio = a.error > 0.0 ? measure.w_inf_bound() / a.error
                                : std::numeric_limits<double>::infinity();
  a.adequate = a.bound_ratio <= safety;
  return a;
}

int choose_depth(const MoranSpec& spec, std::size_t target_n, double r, double safety,
                 std::size_t atom_cap) {
  require_admissible(spec);
  int m0 = 1;
  while (atom_count(spec, 0, m0) < 4 * target_n) ++m0;

  const AtomMeasure coarse = discretize(spec, m0, r, atom_cap);
  const Adequacy first = depth_adequacy(coarse, target_n, r, safety);
  if (first.adequate) return m0;

  int m = m0;
  while (w_inf_bound_at_depth(spec, m) > safety * first.error) ++m;
  for (;; ++m) {
    const AtomMeasure fine = discretize(spec, m, r, atom_cap);
    if (depth_adequacy(fine, target_n, r, safety).adequate) return m;
  }
}

void write_atoms_csv(std::ostream& out, const AtomMeasure& measure) {
  out << "position,weight\n";
  for (std::size_t i = 0; i < measure.size(); ++i) {
    out << format_double(measure.position(i)) << ',' << format_double(measure.weight(i)) << '\n';
  }
}

}  // namespace moranq
