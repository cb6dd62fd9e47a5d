#include "moranq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include "moranq/error.hpp"
#include "moranq/numeric.hpp"

namespace moranq {

std::string to_string(Method m) {
  switch (m) {
    case Method::kDpExact:
      return "dp-exact";
    case Method::kLloyd:
      return "lloyd";
    case Method::kOracle:
      return "oracle";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Cell costs

CellCostTable::CellCostTable(const AtomMeasure& measure, double r) : measure_(&measure), r_(r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("order r must be a positive number");
  if (measure.empty()) throw UsageError("cell costs need a non-empty measure");
}

double CellCostTable::evaluate(std::size_t i, std::size_t j, double center) const {
  const auto x = measure_->positions();
  const auto w = measure_->weights();
  CompensatedSum sum;
  for (std::size_t l = i; l <= j; ++l) {
    const double d = std::abs(x[l] - center);
    double term;
    if (r_ == 2.0) {
      term = d * d;
    } else if (r_ == 1.0) {
      term = d;
    } else {
      term = std::pow(d, r_);
    }
    sum.add(w[l] * term);
  }
  return sum.value();
}

std::size_t CellCostTable::lower_median(std::size_t i, std::size_t j) const {
  const auto cum = measure_->cumulative_weights();
  const long double total = cum[j + 1] - cum[i];
  std::size_t lo = i, hi = j;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (2.0L * (cum[mid + 1] - cum[i]) >= total) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

CellCost CellCostTable::golden(std::size_t i, std::size_t j, double lo, double hi) const {
  if (!(hi > lo)) return {evaluate(i, j, lo), lo};
  const double tol = 1e-12 * (measure_->position(j) - measure_->position(i));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = evaluate(i, j, c);
  double fd = evaluate(i, j, d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = evaluate(i, j, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = evaluate(i, j, d);
    }
    if (c >= d) break;  // interval collapsed below double resolution
  }
  const double center = 0.5 * (a + b);
  return {evaluate(i, j, center), center};
}

CellCost CellCostTable::operator()(std::size_t i, std::size_t j) const {
  if (i > j || j >= measure_->size()) throw UsageError("cell range is empty or out of bounds");
  const double xi = measure_->position(i);
  if (i == j) return {0.0, xi};
  if (r_ == 2.0) {
    const long double w = measure_->mass(i, j + 1);
    const long double s1 = measure_->first_moment(i, j + 1);
    const long double s2 = measure_->second_moment(i, j + 1);
    const long double cost = std::max(0.0L, s2 - s1 * s1 / w);
    double center = static_cast<double>(s1 / w);
    center = std::clamp(center, xi, measure_->position(j));
    return {static_cast<double>(cost), center};
  }
  if (r_ == 1.0) {
    const std::size_t m = lower_median(i, j);
    return {static_cast<double>(cost(i, j)), measure_->position(m)};
  }
  if (r_ > 1.0) return golden(i, j, xi, measure_->position(j));

  // 0 < r < 1: the minimum sits at an atom; refine around the best one.
  std::size_t best = i;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t l = i; l <= j; ++l) {
    const double c = evaluate(i, j, measure_->position(l));
    if (c < best_cost) {
      best_cost = c;
      best = l;
    }
  }
  const double lo = measure_->position(best > i ? best - 1 : best);
  const double hi = measure_->position(best < j ? best + 1 : best);
  const CellCost refined = golden(i, j, lo, hi);
  if (refined.cost < best_cost) return refined;
  return {best_cost, measure_->position(best)};
}

long double CellCostTable::cost(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0L;
  if (r_ == 2.0) {
    const long double w = measure_->mass(i, j + 1);
    const long double s1 = measure_->first_moment(i, j + 1);
    const long double s2 = measure_->second_moment(i, j + 1);
    return std::max(0.0L, s2 - s1 * s1 / w);
  }
  if (r_ == 1.0) {
    const std::size_t m = lower_median(i, j);
    const long double xm = measure_->position(m);
    const long double left = xm * measure_->mass(i, m + 1) - measure_->first_moment(i, m + 1);
    const long double right = measure_->first_moment(m + 1, j + 1) - xm * measure_->mass(m + 1, j + 1);
    return std::max(0.0L, left + right);
  }
  return (*this)(i, j).cost;
}

CellCost cell_cost(const AtomMeasure& measure, std::size_t i, std::size_t j, double r) {
  return CellCostTable(measure, r)(i, j);
}

// ---------------------------------------------------------------------------
// Layered DP

double DpSolution::layer_cost(std::size_t t) const {
  if (t == 0) throw UsageError("layer index starts at 1");
  if (t > layers_) {
    if (t >= atoms_) return 0.0;
    throw UsageError("layer " + std::to_string(t) + " was not computed");
  }
  return exact_[t];
}

double DpSolution::recurrence_cost(std::size_t t) const {
  if (t == 0 || t > layers_) throw UsageError("layer " + std::to_string(t) + " was not computed");
  return recurrence_[t];
}

std::vector<std::pair<std::size_t, std::size_t>> DpSolution::cells(std::size_t t) const {
  if (t == 0 || t > layers_) throw UsageError("layer " + std::to_string(t) + " was not computed");
  std::vector<std::pair<std::size_t, std::size_t>> out(t);
  std::size_t end = atoms_;
  for (std::size_t layer = t; layer >= 1; --layer) {
    const std::size_t start = argmin_[(layer - 1) * (atoms_ + 1) + end];
    out[layer - 1] = {start, end - 1};
    end = start;
  }
  return out;
}

Quantizer DpSolution::quantizer(std::size_t t) const {
  Quantizer q;
  q.r = table_.r();
  q.method = Method::kDpExact;
  q.certified = certified();
  q.warnings = warnings_;
  const std::size_t layers = std::min(t, layers_);
  if (t > layers_) {
    q.warnings.push_back("n=" + std::to_string(t) + " exceeds the atom count " +
                         std::to_string(atoms_) + "; using " + std::to_string(layers) + " codepoints");
  }
  q.n = layers;
  for (const auto& [i, j] : cells(layers)) q.codepoints.push_back(table_(i, j).center);
  q.cost = exact_[layers];
  q.per_layer_costs.assign(exact_.begin() + 1, exact_.begin() + static_cast<std::ptrdiff_t>(layers) + 1);
  return q;
}

DpSolution dp_optimal(const AtomMeasure& measure, std::size_t n_max, double r, DpStrategy strategy) {
  if (n_max == 0) throw UsageError("n_max must be at least 1");
  DpSolution sol(measure, r);
  const std::size_t atoms = measure.size();
  const std::size_t layers = std::min(n_max, atoms);
  sol.atoms_ = atoms;
  sol.layers_ = layers;
  sol.requested_ = n_max;
  if (n_max > atoms) {
    sol.warnings_.push_back("n_max=" + std::to_string(n_max) + " clamped to the atom count " +
                            std::to_string(atoms));
  }
  if (!sol.certified()) sol.warnings_.push_back("order r < 1: cell centers are not certified optimal");
  const double table_entries = static_cast<double>(layers) * static_cast<double>(atoms + 1);
  if (table_entries > 5e8 || atoms > std::numeric_limits<std::uint32_t>::max()) {
    throw ResourceLimit("argmin table for " + std::to_string(layers) + " layers over " +
                        std::to_string(atoms) + " atoms is too large");
  }
  sol.argmin_.assign(layers * (atoms + 1), 0);
  sol.recurrence_.assign(layers + 1, 0.0);
  sol.exact_.assign(layers + 1, 0.0);

  const CellCostTable& cost = sol.table_;
  constexpr long double kInf = std::numeric_limits<long double>::infinity();
  std::vector<long double> prev(atoms + 1, kInf), cur(atoms + 1, kInf);
  for (std::size_t j = 1; j <= atoms; ++j) prev[j] = cost.cost(0, j - 1);
  sol.recurrence_[1] = static_cast<double>(prev[atoms]);

  for (std::size_t t = 2; t <= layers; ++t) {
    std::uint32_t* opt = sol.argmin_.data() + (t - 1) * (atoms + 1);
    std::fill(cur.begin(), cur.end(), kInf);
    auto eval_column = [&](std::size_t j, std::size_t ilo, std::size_t ihi) {
      long double best = kInf;
      std::size_t arg = ilo;
      for (std::size_t i = ilo; i <= ihi; ++i) {
        const long double v = prev[i] + cost.cost(i, j - 1);
        if (v < best) {
          best = v;
          arg = i;
        }
      }
      cur[j] = best;
      opt[j] = static_cast<std::uint32_t>(arg);
      return arg;
    };
    if (strategy == DpStrategy::kQuadratic) {
      for (std::size_t j = t; j <= atoms; ++j) eval_column(j, t - 1, j - 1);
    } else {
      // Argmins are monotone in j, so each midpoint column bounds both halves.
      std::function<void(std::size_t, std::size_t, std::size_t, std::size_t)> solve =
          [&](std::size_t jlo, std::size_t jhi, std::size_t ilo, std::size_t ihi) {
            if (jlo > jhi) return;
            const std::size_t mid = jlo + (jhi - jlo) / 2;
            const std::size_t arg = eval_column(mid, std::max(ilo, t - 1), std::min(ihi, mid - 1));
            if (mid > jlo) solve(jlo, mid - 1, ilo, arg);
            solve(mid + 1, jhi, arg, ihi);
          };
      solve(t, atoms, t - 1, atoms - 1);
    }
    sol.recurrence_[t] = static_cast<double>(cur[atoms]);
    std::swap(prev, cur);
  }

  // Recompute every layer's cost directly over its recovered partition.
  for (std::size_t t = 1; t <= layers; ++t) {
    CompensatedSum total;
    for (const auto& [i, j] : sol.cells(t)) {
      if (i == j) continue;
      total.add(cost.evaluate(i, j, cost(i, j).center));
    }
    sol.exact_[t] = total.value();
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Lloyd refinement

namespace {

using Range = std::pair<std::size_t, std::size_t>;  // half-open atom range

// Voronoi assignment of sorted atoms to sorted codepoints; atoms on a
// midpoint boundary belong to the left cell.
std::vector<Range> assign_cells(std::span<const double> x, std::span<const double> codepoints) {
  std::vector<Range> ranges(codepoints.size());
  std::size_t l = 0;
  for (std::size_t k = 0; k < codepoints.size(); ++k) {
    const std::size_t start = l;
    if (k + 1 < codepoints.size()) {
      const double boundary = 0.5 * (codepoints[k] + codepoints[k + 1]);
      while (l < x.size() && x[l] <= boundary) ++l;
    } else {
      l = x.size();
    }
    ranges[k] = {start, l};
  }
  return ranges;
}

}  // namespace

LloydResult lloyd(const AtomMeasure& measure, std::span<const double> initial, double r,
                  const LloydOptions& options) {
  if (initial.empty()) throw UsageError("lloyd needs at least one initial codepoint");
  for (std::size_t k = 1; k < initial.size(); ++k) {
    if (!(initial[k] > initial[k - 1])) throw UsageError("initial codepoints must be strictly increasing");
  }
  const CellCostTable cost(measure, r);
  const auto x = measure.positions();
  LloydResult res;
  Quantizer& q = res.quantizer;
  q.r = r;
  q.method = Method::kLloyd;
  q.certified = cost.certified();

  std::vector<double> codes(initial.begin(), initial.end());
  if (codes.size() > measure.size()) {
    q.warnings.push_back("codebook larger than the atom count; truncated to " +
                         std::to_string(measure.size()));
    codes = quantile_codebook(measure, measure.size());
  }

  double prev_cost = quantizer_cost(measure, codes, r);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<Range> ranges = assign_cells(x, codes);

    // Repair empty cells by splitting the most expensive splittable cell.
    std::vector<Range> filled;
    std::size_t empties = 0;
    for (const Range& rg : ranges) {
      if (rg.first == rg.second) {
        ++empties;
      } else {
        filled.push_back(rg);
      }
    }
    while (empties > 0) {
      std::size_t worst = filled.size();
      double worst_cost = -1.0;
      for (std::size_t c = 0; c < filled.size(); ++c) {
        if (filled[c].second - filled[c].first < 2) continue;
        const double cc = cost(filled[c].first, filled[c].second - 1).cost;
        if (cc > worst_cost) {
          worst_cost = cc;
          worst = c;
        }
      }
      if (worst == filled.size()) break;
      const Range rg = filled[worst];
      const double center = cost(rg.first, rg.second - 1).center;
      std::size_t split = rg.first;
      while (split < rg.second && x[split] <= center) ++split;
      if (split == rg.first || split == rg.second) split = rg.first + (rg.second - rg.first) / 2;
      filled[worst] = {rg.first, split};
      filled.insert(filled.begin() + static_cast<std::ptrdiff_t>(worst) + 1, Range{split, rg.second});
      --empties;
    }

    std::vector<double> next;
    CompensatedSum total;
    next.reserve(filled.size());
    for (const Range& rg : filled) {
      const CellCost cc = cost(rg.first, rg.second - 1);
      next.push_back(cc.center);
      total.add(cost.evaluate(rg.first, rg.second - 1, cc.center));
    }
    const double new_cost = total.value();
    if (new_cost > prev_cost * (1.0 + 1e-12) + 1e-300) {
      throw std::logic_error("lloyd iteration increased the cost");
    }
    res.cost_history.push_back(new_cost);
    prev_cost = new_cost;

    double movement = next.size() == codes.size() ? 0.0 : std::numeric_limits<double>::infinity();
    if (next.size() == codes.size()) {
      for (std::size_t k = 0; k < next.size(); ++k) movement = std::max(movement, std::abs(next[k] - codes[k]));
    }
    codes.swap(next);
    res.iterations = iter + 1;
    if (movement < options.tolerance) break;
  }
  q.codepoints = std::move(codes);
  q.n = q.codepoints.size();
  q.cost = quantizer_cost(measure, q.codepoints, r);
  return res;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

Quantizer oracle_optimal(const AtomMeasure& measure, std::size_t n, double r) {
  const std::size_t atoms = measure.size();
  if (atoms > 60 || n > 5 || n == 0) {
    throw UsageError("oracle size guard: needs N <= 60 and 1 <= n <= 5");
  }
  if (n > atoms) throw UsageError("oracle needs n <= N");
  const CellCostTable table(measure, r);
  std::vector<std::vector<double>> cost(atoms, std::vector<double>(atoms, 0.0));
  for (std::size_t i = 0; i < atoms; ++i) {
    for (std::size_t j = i; j < atoms; ++j) cost[i][j] = table(i, j).cost;
  }

  // Enumerate every choice of n - 1 cut positions.
  std::vector<std::size_t> starts(n, 0), best_starts;
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t cell, std::size_t start,
                                                                   double acc) {
    starts[cell] = start;
    if (cell + 1 == n) {
      const double total = acc + cost[start][atoms - 1];
      if (total < best) {
        best = total;
        best_starts = starts;
      }
      return;
    }
    const std::size_t remaining = n - cell - 1;
    for (std::size_t next = start + 1; next + remaining <= atoms; ++next) {
      rec(cell + 1, next, acc + cost[start][next - 1]);
    }
  };
  rec(0, 0, 0.0);

  Quantizer q;
  q.n = n;
  q.r = r;
  q.method = Method::kOracle;
  q.certified = table.certified();
  q.cost = best;
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t end = c + 1 < n ? best_starts[c + 1] - 1 : atoms - 1;
    q.codepoints.push_back(table(best_starts[c], end).center);
  }
  return q;
}

// ---------------------------------------------------------------------------

Quantizer similarity_transport(const Quantizer& q, double scale, double shift) {
  if (scale == 0.0) throw UsageError("similarity scale must be non-zero");
  Quantizer out = q;
  for (double& a : out.codepoints) a = scale * a + shift;
  if (scale < 0.0) std::reverse(out.codepoints.begin(), out.codepoints.end());
  const double factor = std::pow(std::abs(scale), q.r);
  out.cost *= factor;
  for (double& c : out.per_layer_costs) c *= factor;
  return out;
}

double quantizer_cost(const AtomMeasure& measure, std::span<const double> codepoints, double r) {
  if (codepoints.empty()) throw UsageError("empty codebook");
  const auto x = measure.positions();
  const auto w = measure.weights();
  CompensatedSum total;
  std::size_t k = 0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    while (k + 1 < codepoints.size() && std::abs(codepoints[k + 1] - x[l]) < std::abs(codepoints[k] - x[l])) {
      ++k;
    }
    const double d = std::abs(x[l] - codepoints[k]);
    total.add(w[l] * (r == 2.0 ? d * d : r == 1.0 ? d : std::pow(d, r)));
  }
  return total.value();
}

std::vector<double> quantile_codebook(const AtomMeasure& measure, std::size_t n) {
  const std::size_t atoms = measure.size();
  if (n == 0 || n > atoms) throw UsageError("quantile codebook needs 1 <= n <= N");
  const auto cum = measure.cumulative_weights();
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < n; ++j) {
    const long double target = (static_cast<long double>(j) + 0.5L) / static_cast<long double>(n);
    const auto it = std::lower_bound(cum.begin() + 1, cum.end(), target);
    idx[j] = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()) - 1, atoms - 1);
  }
  // Force distinct atoms while keeping the order.
  for (std::size_t j = 1; j < n; ++j) idx[j] = std::max(idx[j], idx[j - 1] + 1);
  for (std::size_t j = n; j-- > 0;) idx[j] = std::min(idx[j], atoms - n + j);
  for (std::size_t j = 1; j < n; ++j) idx[j] = std::max(idx[j], idx[j - 1] + 1);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = measure.position(idx[j]);
  return out;
}

void write_quantizer_csv(std::ostream& out, const Quantizer& q) {
  out << "# n=" << q.n << " r=" << format_double(q.r) << " cost=" << format_double(q.cost)
      << " method=" << to_string(q.method) << '\n';
  out << "index,codepoint\n";
  for (std::size_t k = 0; k < q.codepoints.size(); ++k) {
    out << k << ',' << format_double(q.codepoints[k]) << '\n';
  }
}

}  // namespace moranq
