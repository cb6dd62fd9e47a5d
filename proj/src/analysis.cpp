#include "moranq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "moranq/error.hpp"
#include "moranq/numeric.hpp"

namespace moranq {

CellReport cell_report(const AtomMeasure& measure, const Quantizer& quantizer,
                       const Antichain* antichain) {
  const auto& codes = quantizer.codepoints;
  if (codes.empty()) throw UsageError("quantizer has no codepoints");
  if (antichain != nullptr && measure.source_id() != 0 && antichain->spec_id != measure.source_id()) {
    throw UsageError("antichain and measure come from different specs");
  }
  if (antichain != nullptr && antichain->r != quantizer.r) {
    throw UsageError("antichain and quantizer use different orders r");
  }
  const CellCostTable table(measure, quantizer.r);
  const auto x = measure.positions();
  const auto w = measure.weights();

  CellReport rep;
  rep.has_incidence = antichain != nullptr;
  rep.cells.resize(codes.size());
  std::size_t l = 0;
  CompensatedSum total, total_mass;
  for (std::size_t k = 0; k < codes.size(); ++k) {
    Cell& c = rep.cells[k];
    c.codepoint = codes[k];
    c.first_atom = l;
    c.lo = k == 0 ? std::min(codes[0], x.front()) : 0.5 * (codes[k - 1] + codes[k]);
    if (k + 1 < codes.size()) {
      c.hi = 0.5 * (codes[k] + codes[k + 1]);
      while (l < x.size() && x[l] <= c.hi) ++l;
    } else {
      c.hi = std::max(codes[k], x.back());
      l = x.size();
    }
    c.end_atom = l;
    CompensatedSum cm;
    for (std::size_t i = c.first_atom; i < c.end_atom; ++i) cm.add(w[i]);
    c.mass = cm.value();
    c.error = c.end_atom > c.first_atom ? table.evaluate(c.first_atom, c.end_atom - 1, c.codepoint) : 0.0;
    total.add(c.error);
    total_mass.add(c.mass);

    if (antichain != nullptr) {
      std::ptrdiff_t last = -1;
      for (std::size_t i = c.first_atom; i < c.end_atom; ++i) {
        const std::ptrdiff_t m = antichain->locate(x[i]);
        if (m >= 0 && m != last) {
          ++c.incidence;
          last = m;
        }
      }
      rep.max_incidence = std::max(rep.max_incidence, c.incidence);
    }
  }
  rep.total = total.value();
  rep.total_mass = total_mass.value();
  rep.j_min = std::numeric_limits<double>::infinity();
  rep.j_max = 0.0;
  for (const Cell& c : rep.cells) {
    rep.j_min = std::min(rep.j_min, c.error);
    rep.j_max = std::max(rep.j_max, c.error);
  }
  return rep;
}

KRule KRule::parse(const std::string& text) {
  KRule rule;
  if (text == "auto") return rule;
  if (text.rfind("paper:", 0) == 0) {
    rule.kind = Kind::kPaper;
    try {
      std::size_t used = 0;
      const std::string arg = text.substr(6);
      rule.m_surrogate = std::stod(arg, &used);
      if (used != arg.size() || rule.m_surrogate < 0.0) throw std::invalid_argument("bad");
    } catch (const std::exception&) {
      throw UsageError("k-rule 'paper:M' needs a non-negative number M, got '" + text + "'");
    }
    return rule;
  }
  throw UsageError("unknown k-rule '" + text + "' (expected auto or paper:M)");
}

std::string KRule::to_string() const {
  return kind == Kind::kAuto ? "auto" : "paper:" + format_double(m_surrogate);
}

PhiTable::PhiTable(const MoranSpec& spec, double r, std::size_t cap)
    : spec_(spec), r_(r), cap_(cap), phi_{1} {}

std::size_t PhiTable::phi(int k) const {
  if (k < 0) throw UsageError("antichain level must be non-negative");
  while (static_cast<int>(phi_.size()) <= k) {
    phi_.push_back(antichain(spec_, static_cast<int>(phi_.size()), r_, cap_).phi());
  }
  return phi_[static_cast<std::size_t>(k)];
}

int choose_k(const PhiTable& table, std::size_t n, const KRule& rule) {
  const double factor = rule.kind == KRule::Kind::kAuto ? 1.0 : rule.m_surrogate + 2.0;
  const auto fits = [&](int k) { return factor * static_cast<double>(table.phi(k)) <= static_cast<double>(n); };
  if (!fits(1)) {
    if (rule.kind == KRule::Kind::kPaper) {
      throw UsageError("n=" + std::to_string(n) + " is below (M+2) * phi_1 = " +
                       format_double(factor * static_cast<double>(table.phi(1))));
    }
    return 0;
  }
  int k = 1;
  while (fits(k + 1)) ++k;
  return k;
}

SweepResult sweep(const MoranSpec& spec, const AtomMeasure& measure, double r,
                  const SweepOptions& options) {
  if (options.n_min < 1 || options.n_max < options.n_min) {
    throw UsageError("n range must be non-empty and increasing");
  }
  if (measure.source_id() != 0 && measure.source_id() != spec.fingerprint()) {
    throw UsageError("measure was not built from this spec");
  }
  const DpSolution dp = dp_optimal(measure, options.n_max + 1, r);
  SweepResult res;
  res.warnings = dp.warnings();

  const double e_top = std::pow(dp.layer_cost(options.n_max), 1.0 / r);
  res.adequacy.error = e_top;
  res.adequacy.bound_ratio = e_top > 0.0 ? measure.w_inf_bound() / e_top : std::numeric_limits<double>::infinity();
  res.adequacy.adequate = res.adequacy.bound_ratio <= options.safety;
  if (!res.adequacy.adequate) {
    int required = std::max(measure.depth(), 1);
    if (e_top > 0.0) {
      while (w_inf_bound_at_depth(spec, required) > options.safety * e_top) ++required;
    }
    const std::string msg = "depth " + std::to_string(measure.depth()) + " is not adequate at n=" +
                            std::to_string(options.n_max) + " (w_inf/e = " +
                            format_double(res.adequacy.bound_ratio) + "); need depth >= " +
                            std::to_string(required);
    if (!options.force) throw AdequacyError(msg, required);
    res.warnings.push_back(msg);
  }

  const PhiTable phi(spec, r);
  for (std::size_t n = options.n_min; n <= options.n_max; ++n) {
    const double cost = dp.layer_cost(n);
    if (!(cost > 0.0)) {
      throw UsageError("e^r vanishes at n=" + std::to_string(n) + " (atom count " +
                       std::to_string(measure.size()) + "); ratios are undefined");
    }
    const Quantizer q = dp.quantizer(n);
    const CellReport cells = cell_report(measure, q);
    SweepRow row;
    row.n = n;
    row.e_pow_r = cost;
    row.e = std::pow(cost, 1.0 / r);
    row.delta = cost - dp.layer_cost(n + 1);
    row.j_min = cells.j_min;
    row.j_max = cells.j_max;
    const double nn = static_cast<double>(n);
    row.ratio_min = nn * cells.j_min / cost;
    row.ratio_max = nn * cells.j_max / cost;
    row.ratio_delta = nn * row.delta / cost;
    row.spread = cells.j_max / cells.j_min;
    row.k_used = choose_k(phi, n, options.k_rule);
    res.rows.push_back(row);
  }
  return res;
}

CensusReport census(const AtomMeasure& measure, const Quantizer& quantizer,
                    const Antichain& antichain, const MoranSpec& spec) {
  if (antichain.spec_id != spec.fingerprint()) throw UsageError("antichain was not built from this spec");
  if (measure.source_id() != 0 && measure.source_id() != spec.fingerprint()) {
    throw UsageError("measure was not built from this spec");
  }
  CensusReport rep;
  rep.k = antichain.k;
  rep.counts.assign(antichain.phi(), 0);
  for (double a : quantizer.codepoints) {
    const std::ptrdiff_t m = antichain.locate(a);
    if (m >= 0) ++rep.counts[static_cast<std::size_t>(m)];
  }
  rep.l_min = rep.counts.empty() ? 0 : *std::min_element(rep.counts.begin(), rep.counts.end());
  rep.l_max = rep.counts.empty() ? 0 : *std::max_element(rep.counts.begin(), rep.counts.end());
  for (std::size_t c : rep.counts) {
    rep.total += c;
    if (c == 0) ++rep.zero_count;
  }

  const auto& codes = quantizer.codepoints;
  const auto holds_codepoint = [&](const Cylinder& c) {
    const auto it = std::lower_bound(codes.begin(), codes.end(), c.lo);
    return it != codes.end() && *it <= c.hi;
  };
  std::size_t covered = 0;
  rep.coverage_available = true;
  try {
    for (const Cylinder& sigma : antichain.members) {
      std::vector<Cylinder> frontier{sigma};
      for (int level = 0; level < 3; ++level) {
        std::vector<Cylinder> next;
        for (const Cylinder& c : frontier) {
          auto kids = children(spec, c, antichain.r);
          next.insert(next.end(), kids.begin(), kids.end());
        }
        frontier.swap(next);
      }
      for (const Cylinder& g : frontier) {
        ++rep.grandchildren;
        if (holds_codepoint(g)) ++covered;
      }
    }
  } catch (const SpecError&) {
    rep.coverage_available = false;
  }
  rep.grandchild_coverage =
      rep.coverage_available && rep.grandchildren > 0
          ? static_cast<double>(covered) / static_cast<double>(rep.grandchildren)
          : 0.0;
  return rep;
}

DimensionEstimate dimension_estimate(std::span<const SweepRow> rows, std::size_t n_lo,
                                     std::size_t n_hi, double r, std::optional<double> s_probe) {
  std::vector<double> lx, ly;
  DimensionEstimate est;
  for (const SweepRow& row : rows) {
    if (row.n < n_lo || row.n > n_hi) continue;
    if (!(row.e > 0.0)) throw UsageError("dimension window contains a zero error");
    est.n.push_back(row.n);
    lx.push_back(-std::log(row.e));
    ly.push_back(std::log(static_cast<double>(row.n)));
  }
  if (est.n.size() < 5) {
    throw UsageError("dimension window needs at least 5 rows, got " + std::to_string(est.n.size()));
  }
  est.slope = least_squares_slope(lx, ly);
  if (!std::isfinite(est.slope)) throw UsageError("degenerate dimension window (constant error)");
  est.s_probe = s_probe.value_or(est.slope);
  if (!(est.s_probe > 0.0)) throw UsageError("coefficient probe exponent must be positive");
  est.coefficient_min = std::numeric_limits<double>::infinity();
  est.coefficient_max = 0.0;
  for (const SweepRow& row : rows) {
    if (row.n < n_lo || row.n > n_hi) continue;
    const double coef = std::pow(static_cast<double>(row.n), r / est.s_probe) * row.e_pow_r;
    est.coefficients.push_back(coef);
    est.coefficient_min = std::min(est.coefficient_min, coef);
    est.coefficient_max = std::max(est.coefficient_max, coef);
  }
  return est;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "n,e_pow_r,e,delta,J_min,J_max,ratio_min,ratio_max,ratio_delta,spread,k_used\n";
  for (const SweepRow& row : rows) {
    out << row.n << ',' << format_double(row.e_pow_r) << ',' << format_double(row.e) << ','
        << format_double(row.delta) << ',' << format_double(row.j_min) << ','
        << format_double(row.j_max) << ',' << format_double(row.ratio_min) << ','
        << format_double(row.ratio_max) << ',' << format_double(row.ratio_delta) << ','
        << format_double(row.spread) << ',' << row.k_used << '\n';
  }
}

void write_sweep_jsonl(std::ostream& out, std::span<const SweepRow> rows) {
  for (const SweepRow& row : rows) {
    nlohmann::ordered_json j;
    j["n"] = row.n;
    j["e_pow_r"] = row.e_pow_r;
    j["e"] = row.e;
    j["delta"] = row.delta;
    j["J_min"] = row.j_min;
    j["J_max"] = row.j_max;
    j["ratio_min"] = row.ratio_min;
    j["ratio_max"] = row.ratio_max;
    j["ratio_delta"] = row.ratio_delta;
    j["spread"] = row.spread;
    j["k_used"] = row.k_used;
    out << j.dump() << '\n';
  }
}

}  // namespace moranq
