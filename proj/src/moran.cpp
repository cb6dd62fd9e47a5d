#include "moranq/moran.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "moranq/error.hpp"

namespace moranq {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double sum_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Shared by cylinder() and children(): place child j of a parent interval.
Cylinder make_child(const MoranSpec& spec, const Cylinder& parent,
                    const Level& level, std::size_t j, double r) {
  Cylinder c;
  c.word = parent.word.child(static_cast<int>(j + 1));
  const double ratio = level.ratios[j];
  const double prob = level.probs[j];
  c.ratio = parent.ratio * ratio;
  c.length = spec.base_length() * c.ratio;
  // Clamp so rounding never lets a child poke out of its parent.
  c.lo = std::clamp(parent.lo + level.child_offset(j) * parent.length, parent.lo, parent.hi);
  c.hi = std::clamp(c.lo + c.length, c.lo, parent.hi);
  c.mass = parent.mass * prob;
  c.log_weight = parent.log_weight + std::log(prob) + r * std::log(ratio);
  const double scale = spec.normalize_weights ? c.ratio : c.length;
  c.weight = c.mass * std::pow(scale, r);
  return c;
}

Cylinder root_cylinder(const MoranSpec& spec, double r) {
  Cylinder c;
  c.lo = spec.base_lo;
  c.hi = spec.base_hi;
  c.length = spec.base_length();
  c.ratio = 1.0;
  c.mass = 1.0;
  const double scale = spec.normalize_weights ? 1.0 : c.length;
  c.weight = std::pow(scale, r);
  c.log_weight = 0.0;
  return c;
}

}  // namespace

double Level::child_offset(std::size_t j) const {
  double before = 0.0;
  for (std::size_t i = 0; i < j; ++i) before += ratios[i];
  switch (layout.mode) {
    case LayoutMode::kFlushLeft:
      return before;
    case LayoutMode::kExplicitOffsets:
      return layout.offsets.at(j);
    case LayoutMode::kEvenInternalGaps:
    default: {
      const double slack = std::max(0.0, 1.0 - sum_of(ratios));
      const double gap = count() > 1 ? slack / static_cast<double>(count() - 1) : 0.0;
      return before + static_cast<double>(j) * gap;
    }
  }
}

const Level& MoranSpec::level(std::size_t depth) const {
  if (!has_level(depth)) {
    throw SpecError("construction step " + std::to_string(depth + 1) +
                    " is not defined (spec has " + std::to_string(levels.size()) +
                    " levels and is not cycled)");
  }
  return levels[depth % levels.size()];
}

std::uint64_t MoranSpec::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix = [&](double v) { mix_bytes(&v, sizeof v); };
  mix(base_lo);
  mix(base_hi);
  const unsigned char flags[2] = {static_cast<unsigned char>(cycle),
                                  static_cast<unsigned char>(normalize_weights)};
  mix_bytes(flags, sizeof flags);
  for (const Level& lv : levels) {
    const std::uint64_t n = lv.count();
    mix_bytes(&n, sizeof n);
    for (double c : lv.ratios) mix(c);
    for (double p : lv.probs) mix(p);
    const int mode = static_cast<int>(lv.layout.mode);
    mix_bytes(&mode, sizeof mode);
    for (double o : lv.layout.offsets) mix(o);
  }
  return h;
}

ValidationReport validate_spec(const MoranSpec& spec, double r) {
  ValidationReport rep;
  rep.r = r;
  if (!(r > 0.0)) rep.violations.push_back("order r must be positive, got " + fmt_g(r));
  if (spec.levels.empty()) rep.violations.push_back("spec has no levels");
  if (!(spec.base_hi > spec.base_lo)) {
    rep.violations.push_back("base interval [" + fmt_g(spec.base_lo) + ", " +
                             fmt_g(spec.base_hi) + "] is empty");
  }
  rep.p_min = std::numeric_limits<double>::infinity();
  rep.c_min = std::numeric_limits<double>::infinity();
  rep.p_max = 0.0;
  rep.c_max = 0.0;
  for (std::size_t li = 0; li < spec.levels.size(); ++li) {
    const Level& lv = spec.levels[li];
    const std::string tag = "level " + std::to_string(li + 1) + ": ";
    if (lv.declared_count != 0 && lv.declared_count != lv.count()) {
      rep.violations.push_back(tag + "n=" + std::to_string(lv.declared_count) +
                               " but " + std::to_string(lv.count()) + " ratios given");
    }
    if (lv.count() < 2) rep.violations.push_back(tag + "needs at least 2 children");
    if (lv.probs.size() != lv.count()) {
      rep.violations.push_back(tag + std::to_string(lv.probs.size()) + " probs for " +
                               std::to_string(lv.count()) + " ratios");
    }
    for (double c : lv.ratios) {
      if (!(c > 0.0)) rep.violations.push_back(tag + "ratio " + fmt_g(c) + " is not positive");
      rep.c_min = std::min(rep.c_min, c);
      rep.c_max = std::max(rep.c_max, c);
    }
    for (double p : lv.probs) {
      if (!(p > 0.0)) rep.violations.push_back(tag + "prob " + fmt_g(p) + " is not positive");
      rep.p_min = std::min(rep.p_min, p);
      rep.p_max = std::max(rep.p_max, p);
    }
    const double csum = sum_of(lv.ratios);
    if (csum > 1.0 + 1e-12) rep.violations.push_back(tag + "ratios sum " + fmt_g(csum) + " > 1");
    const double psum = sum_of(lv.probs);
    if (std::abs(psum - 1.0) > 1e-12) {
      rep.violations.push_back(tag + "probs sum " + fmt_g(psum) + " ≠ 1");
    }
    if (lv.layout.mode == LayoutMode::kExplicitOffsets) {
      if (lv.layout.offsets.size() != lv.count()) {
        rep.violations.push_back(tag + "explicit-offsets needs " + std::to_string(lv.count()) +
                                 " offsets, got " + std::to_string(lv.layout.offsets.size()));
      } else {
        for (std::size_t j = 0; j < lv.count(); ++j) {
          const double off = lv.layout.offsets[j];
          const double end = off + lv.ratios[j];
          if (off < -1e-12 || end > 1.0 + 1e-12) {
            rep.violations.push_back(tag + "child " + std::to_string(j + 1) +
                                     " leaves the parent interval");
          }
          if (j + 1 < lv.count() && end > lv.layout.offsets[j + 1] + 1e-12) {
            rep.violations.push_back(tag + "children " + std::to_string(j + 1) + " and " +
                                     std::to_string(j + 2) + " overlap or are out of order");
          }
        }
      }
    }
  }
  if (spec.levels.empty()) {
    rep.p_min = rep.c_min = 0.0;
  }
  rep.eta = rep.p_min * std::pow(rep.c_min, r);
  return rep;
}

void require_admissible(const MoranSpec& spec) {
  const ValidationReport rep = validate_spec(spec, 1.0);
  if (rep.admissible()) return;
  std::string msg = "inadmissible spec:";
  for (const auto& v : rep.violations) msg += "\n  " + v;
  throw SpecError(msg);
}

Word Word::parent() const {
  if (is_root()) throw UsageError("the root word has no parent");
  return prefix(depth() - 1);
}

Word Word::child(int j) const {
  Word w = *this;
  w.indices.push_back(j);
  return w;
}

Word Word::prefix(std::size_t h) const {
  if (h > depth()) throw UsageError("prefix longer than word");
  return Word{std::vector<int>(indices.begin(), indices.begin() + h)};
}

bool Word::is_prefix_of(const Word& other) const {
  return depth() <= other.depth() &&
         std::equal(indices.begin(), indices.end(), other.indices.begin());
}

std::string Word::to_string() const {
  if (is_root()) return "root";
  std::string s;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(indices[i]);
  }
  return s;
}

Word Word::parse(std::string_view text) {
  Word w;
  if (text.empty() || text == "root") return w;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dot = text.find('.', pos);
    const std::string_view part = text.substr(pos, dot == std::string_view::npos ? text.npos : dot - pos);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || v < 1) {
      throw SpecError("malformed word '" + std::string(text) + "'");
    }
    w.indices.push_back(v);
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return w;
}

Cylinder cylinder(const MoranSpec& spec, const Word& word, double r) {
  require_admissible(spec);
  Cylinder c = root_cylinder(spec, r);
  for (std::size_t d = 0; d < word.depth(); ++d) {
    const Level& lv = spec.level(d);
    const int idx = word.indices[d];
    if (idx < 1 || static_cast<std::size_t>(idx) > lv.count()) {
      throw SpecError("index " + std::to_string(idx) + " at position " + std::to_string(d + 1) +
                      " is outside 1.." + std::to_string(lv.count()));
    }
    c = make_child(spec, c, lv, static_cast<std::size_t>(idx - 1), r);
  }
  return c;
}

std::vector<Cylinder> children(const MoranSpec& spec, const Cylinder& parent, double r) {
  const Level& lv = spec.level(parent.word.depth());
  std::vector<Cylinder> out;
  out.reserve(lv.count());
  for (std::size_t j = 0; j < lv.count(); ++j) out.push_back(make_child(spec, parent, lv, j, r));
  return out;
}

std::ptrdiff_t Antichain::locate(double x) const {
  // First member whose right endpoint reaches x; on a shared endpoint this is
  // the left neighbour.
  auto it = std::lower_bound(members.begin(), members.end(), x,
                             [](const Cylinder& c, double v) { return c.hi < v; });
  if (it == members.end() || it->lo > x) return -1;
  return it - members.begin();
}

Antichain antichain(const MoranSpec& spec, int k, double r, std::size_t cap) {
  if (k < 0) throw UsageError("antichain level must be non-negative");
  if (!(r > 0.0)) throw UsageError("order r must be positive");
  require_admissible(spec);
  const ValidationReport rep = validate_spec(spec, r);

  Antichain ac;
  ac.k = k;
  ac.r = r;
  ac.eta = rep.eta;
  ac.spec_id = spec.fingerprint();
  if (k == 0) {
    ac.members.push_back(root_cylinder(spec, r));
    return ac;
  }

  const double threshold = static_cast<double>(k) * std::log(rep.eta);
  std::vector<Cylinder> stack;
  stack.push_back(root_cylinder(spec, r));
  while (!stack.empty()) {
    Cylinder node = std::move(stack.back());
    stack.pop_back();
    // Strictly below the threshold; a tie within tolerance keeps descending.
    if (!node.word.is_root() && node.log_weight < threshold - kLogWeightTolerance) {
      ac.members.push_back(std::move(node));
      if (ac.members.size() > cap) {
        throw ResourceLimit("antichain cardinality exceeds cap " + std::to_string(cap));
      }
      continue;
    }
    std::vector<Cylinder> kids = children(spec, node, r);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(std::move(*it));
  }
  std::stable_sort(ac.members.begin(), ac.members.end(),
                   [](const Cylinder& a, const Cylinder& b) { return a.lo < b.lo; });
  return ac;
}

CensusGrowth census_growth(const MoranSpec& spec, double r, int k_max, std::size_t cap) {
  if (k_max < 2) throw UsageError("census growth needs k_max >= 2");
  require_admissible(spec);
  CensusGrowth g;
  std::size_t prev = antichain(spec, 1, r, cap).phi();
  for (int k = 1; k <= k_max; ++k) {
    const std::size_t next = antichain(spec, k + 1, r, cap).phi();
    CensusGrowthRow row{k, prev, next, static_cast<double>(next) / static_cast<double>(prev)};
    g.max_ratio = std::max(g.max_ratio, row.ratio);
    g.rows.push_back(row);
    prev = next;
  }

  const ValidationReport rep = validate_spec(spec, r);
  std::size_t max_children = 0;
  double max_log_step = -std::numeric_limits<double>::infinity();
  for (const Level& lv : spec.levels) {
    max_children = std::max(max_children, lv.count());
    for (std::size_t j = 0; j < lv.count(); ++j) {
      max_log_step = std::max(max_log_step, std::log(lv.probs[j]) + r * std::log(lv.ratios[j]));
    }
  }
  const double levels_needed = std::ceil(std::log(rep.eta) / max_log_step - 1e-12);
  g.analytic_cap = std::pow(static_cast<double>(max_children), levels_needed);
  return g;
}

double parse_number(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  auto to_double = [&](std::string_view s) {
    s = trim(s);
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
      throw SpecError("malformed number '" + std::string(text) + "'");
    }
    return v;
  };
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return to_double(text);
  const std::string_view num = trim(text.substr(0, slash));
  const std::string_view den = trim(text.substr(slash + 1));
  // Integer fractions are reduced exactly before the single rounding step.
  long long a = 0, b = 0;
  const auto ra = std::from_chars(num.data(), num.data() + num.size(), a);
  const auto rb = std::from_chars(den.data(), den.data() + den.size(), b);
  if (ra.ec == std::errc() && ra.ptr == num.data() + num.size() && rb.ec == std::errc() &&
      rb.ptr == den.data() + den.size()) {
    if (b == 0) throw SpecError("zero denominator in '" + std::string(text) + "'");
    const long long g = std::gcd(a, b);
    return static_cast<double>(a / g) / static_cast<double>(b / g);
  }
  const double d = to_double(den);
  if (d == 0.0) throw SpecError("zero denominator in '" + std::string(text) + "'");
  return to_double(num) / d;
}

namespace {

double json_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number(v.get<std::string>());
  throw SpecError("expected a number or fraction string, got " + v.dump());
}

MoranSpec spec_from_json(const nlohmann::json& doc);

std::vector<double> json_numbers(const nlohmann::json& v, const char* field) {
  if (!v.is_array()) throw SpecError(std::string("'") + field + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(json_number(x));
  return out;
}

}  // namespace

MoranSpec parse_spec_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecParseError(std::string("spec is not valid JSON: ") + e.what());
  }
  try {
    return spec_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed spec field: ") + e.what());
  }
}

namespace {

MoranSpec spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpecError("spec must be a JSON object");
  MoranSpec spec;
  if (doc.contains("base_interval")) {
    const auto bounds = json_numbers(doc["base_interval"], "base_interval");
    if (bounds.size() != 2) throw SpecError("'base_interval' must hold two numbers");
    spec.base_lo = bounds[0];
    spec.base_hi = bounds[1];
  }
  if (doc.contains("cycle")) spec.cycle = doc["cycle"].get<bool>();
  if (doc.contains("normalize_weights")) spec.normalize_weights = doc["normalize_weights"].get<bool>();
  if (!doc.contains("levels") || !doc["levels"].is_array()) {
    throw SpecError("spec needs a 'levels' array");
  }
  for (const auto& jl : doc["levels"]) {
    Level lv;
    if (!jl.contains("ratios") || !jl.contains("probs")) {
      throw SpecError("every level needs 'ratios' and 'probs'");
    }
    lv.ratios = json_numbers(jl["ratios"], "ratios");
    lv.probs = json_numbers(jl["probs"], "probs");
    if (jl.contains("n")) lv.declared_count = jl["n"].get<std::size_t>();
    if (jl.contains("layout")) {
      const auto& lay = jl["layout"];
      const std::string mode = lay.is_string() ? lay.get<std::string>() : lay.value("mode", "even-internal-gaps");
      if (mode == "even-internal-gaps") {
        lv.layout.mode = LayoutMode::kEvenInternalGaps;
      } else if (mode == "flush-left") {
        lv.layout.mode = LayoutMode::kFlushLeft;
      } else if (mode == "explicit-offsets") {
        lv.layout.mode = LayoutMode::kExplicitOffsets;
        if (!lay.is_object() || !lay.contains("offsets")) {
          throw SpecError("explicit-offsets layout needs 'offsets'");
        }
        lv.layout.offsets = json_numbers(lay["offsets"], "offsets");
      } else {
        throw SpecError("unknown layout mode '" + mode + "'");
      }
    }
    spec.levels.push_back(std::move(lv));
  }
  return spec;
}

}  // namespace

MoranSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec_json(ss.str());
}

}  // namespace moranq
