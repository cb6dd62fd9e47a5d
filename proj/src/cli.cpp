#include "moranq/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <ios>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "moranq/analysis.hpp"
#include "moranq/discretize.hpp"
#include "moranq/error.hpp"
#include "moranq/moran.hpp"
#include "moranq/numeric.hpp"
#include "moranq/solver.hpp"

namespace moranq {

namespace {

struct RunConfig {
  std::string spec_path;
  std::string depth = "auto";
  double r = 2.0;
  std::optional<long long> n;
  long long n_min = 2;
  std::optional<long long> n_max;
  std::optional<int> k;
  std::string k_rule = "auto";
  std::string method = "dp";
  std::string epsilons;
  std::string out_path;
  std::string format = "csv";
  bool force = false;
  double safety = 0.01;
};

using Json = nlohmann::ordered_json;

// Non-zero exit carried out of a command.
struct Exit {
  int code;
  std::string message;
};

int resolve_depth(const RunConfig& cfg, const MoranSpec& spec, std::size_t target_n) {
  if (cfg.depth == "auto") {
    if (target_n == 0) throw Exit{kExitUsage, "--depth auto needs a target codebook size"};
    return choose_depth(spec, target_n, cfg.r, cfg.safety);
  }
  try {
    std::size_t used = 0;
    const int d = std::stoi(cfg.depth, &used);
    if (used != cfg.depth.size() || d < 1) throw std::invalid_argument("depth");
    return d;
  } catch (const std::exception&) {
    throw Exit{kExitUsage, "--depth must be a positive integer or 'auto'"};
  }
}

MoranSpec load_admissible(const RunConfig& cfg) {
  MoranSpec spec = load_spec_file(cfg.spec_path);
  const ValidationReport rep = validate_spec(spec, cfg.r);
  if (!rep.admissible()) {
    std::string msg = "inadmissible spec:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw Exit{kExitValidation, msg};
  }
  return spec;
}

std::size_t positive_count(const std::optional<long long>& v, const char* flag) {
  if (!v) throw Exit{kExitUsage, std::string(flag) + " is required"};
  if (*v < 1) throw Exit{kExitUsage, std::string(flag) + " must be at least 1"};
  return static_cast<std::size_t>(*v);
}

void emit_quantizer(std::ostream& out, const RunConfig& cfg, const Quantizer& q) {
  if (cfg.format == "jsonl") {
    Json meta;
    meta["type"] = "quantizer";
    meta["n"] = q.n;
    meta["r"] = q.r;
    meta["cost"] = q.cost;
    meta["method"] = to_string(q.method);
    meta["certified"] = q.certified;
    out << meta.dump() << '\n';
    for (std::size_t k = 0; k < q.codepoints.size(); ++k) {
      Json row;
      row["index"] = k;
      row["codepoint"] = q.codepoints[k];
      out << row.dump() << '\n';
    }
    return;
  }
  write_quantizer_csv(out, q);
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const MoranSpec spec = load_spec_file(cfg.spec_path);
  const ValidationReport rep = validate_spec(spec, cfg.r);
  if (cfg.format == "jsonl") {
    Json j;
    j["admissible"] = rep.admissible();
    j["violations"] = rep.violations;
    j["p_min"] = rep.p_min;
    j["p_max"] = rep.p_max;
    j["c_min"] = rep.c_min;
    j["c_max"] = rep.c_max;
    j["r"] = rep.r;
    j["eta_r"] = rep.eta;
    out << j.dump() << '\n';
  } else {
    out << "admissible: " << (rep.admissible() ? "yes" : "no") << '\n';
    for (const auto& v : rep.violations) out << "violation: " << v << '\n';
    out << "p_min: " << format_double(rep.p_min) << '\n'
        << "p_max: " << format_double(rep.p_max) << '\n'
        << "c_min: " << format_double(rep.c_min) << '\n'
        << "c_max: " << format_double(rep.c_max) << '\n'
        << "r: " << format_double(rep.r) << '\n'
        << "eta_r: " << format_double(rep.eta) << '\n';
  }
  return rep.admissible() ? kExitOk : kExitValidation;
}

int cmd_atoms(const RunConfig& cfg, std::ostream& out) {
  const MoranSpec spec = load_admissible(cfg);
  const std::size_t target = cfg.n ? positive_count(cfg.n, "--n") : 0;
  const AtomMeasure m = discretize(spec, resolve_depth(cfg, spec, target), cfg.r);
  if (cfg.format == "jsonl") {
    for (std::size_t i = 0; i < m.size(); ++i) {
      Json row;
      row["position"] = m.position(i);
      row["weight"] = m.weight(i);
      out << row.dump() << '\n';
    }
  } else {
    write_atoms_csv(out, m);
  }
  return kExitOk;
}

int cmd_antichain(const RunConfig& cfg, std::ostream& out) {
  const MoranSpec spec = load_admissible(cfg);
  const int k = cfg.k.value_or(1);
  if (k < 0) throw Exit{kExitUsage, "--k must be non-negative"};
  const Antichain ac = antichain(spec, k, cfg.r);
  if (cfg.format == "jsonl") {
    for (const Cylinder& c : ac.members) {
      Json row;
      row["word"] = c.word.to_string();
      row["lo"] = c.lo;
      row["hi"] = c.hi;
      row["c"] = c.ratio;
      row["p"] = c.mass;
      row["E"] = c.weight;
      out << row.dump() << '\n';
    }
  } else {
    out << "word,lo,hi,c,p,E\n";
    for (const Cylinder& c : ac.members) {
      out << c.word.to_string() << ',' << format_double(c.lo) << ',' << format_double(c.hi) << ','
          << format_double(c.ratio) << ',' << format_double(c.mass) << ',' << format_double(c.weight)
          << '\n';
    }
  }
  return kExitOk;
}

Quantizer solve(const RunConfig& cfg, const AtomMeasure& m, std::size_t n) {
  if (cfg.method == "lloyd") return lloyd(m, quantile_codebook(m, std::min(n, m.size())), cfg.r).quantizer;
  return dp_optimal(m, n, cfg.r).quantizer(n);
}

void check_adequacy(const RunConfig& cfg, const AtomMeasure& m, std::size_t n, std::ostream& err) {
  const Adequacy a = depth_adequacy(m, std::min(n, m.size()), cfg.r, cfg.safety);
  if (a.adequate) return;
  std::ostringstream msg;
  msg << "depth " << m.depth() << " is not adequate for n=" << n
      << " (w_inf/e = " << format_double(a.bound_ratio) << " > " << format_double(cfg.safety) << ")";
  if (!cfg.force) throw Exit{kExitAdequacy, msg.str() + "; rerun with a larger --depth or --force"};
  err << "warning: " << msg.str() << '\n';
}

int cmd_quantize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::size_t n = positive_count(cfg.n, "--n");
  const MoranSpec spec = load_admissible(cfg);
  const AtomMeasure m = discretize(spec, resolve_depth(cfg, spec, n), cfg.r);
  check_adequacy(cfg, m, n, err);
  const Quantizer q = solve(cfg, m, n);
  for (const auto& w : q.warnings) err << "warning: " << w << '\n';
  emit_quantizer(out, cfg, q);
  return kExitOk;
}

SweepResult run_sweep(const RunConfig& cfg, const MoranSpec& spec, const AtomMeasure& m,
                      std::size_t n_min, std::size_t n_max, std::ostream& err) {
  SweepOptions opts;
  opts.n_min = n_min;
  opts.n_max = n_max;
  opts.k_rule = KRule::parse(cfg.k_rule);
  opts.force = cfg.force;
  opts.safety = cfg.safety;
  SweepResult res = sweep(spec, m, cfg.r, opts);
  for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  return res;
}

std::pair<std::size_t, std::size_t> n_window(const RunConfig& cfg) {
  const std::size_t n_max = positive_count(cfg.n_max, "--n-max");
  if (cfg.n_min < 1) throw Exit{kExitUsage, "--n-min must be at least 1"};
  const auto n_min = static_cast<std::size_t>(cfg.n_min);
  if (n_max < n_min) throw Exit{kExitUsage, "--n-max must not be below --n-min"};
  return {n_min, n_max};
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto [n_min, n_max] = n_window(cfg);
  const MoranSpec spec = load_admissible(cfg);
  const AtomMeasure m = discretize(spec, resolve_depth(cfg, spec, n_max), cfg.r);
  const SweepResult res = run_sweep(cfg, spec, m, n_min, n_max, err);
  if (cfg.format == "jsonl") {
    write_sweep_jsonl(out, res.rows);
  } else {
    write_sweep_csv(out, res.rows);
  }
  return kExitOk;
}

int cmd_census(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::size_t n = positive_count(cfg.n, "--n");
  const MoranSpec spec = load_admissible(cfg);
  const AtomMeasure m = discretize(spec, resolve_depth(cfg, spec, n), cfg.r);
  check_adequacy(cfg, m, n, err);
  const Quantizer q = solve(cfg, m, n);
  int k = 0;
  if (cfg.k) {
    if (*cfg.k < 0) throw Exit{kExitUsage, "--k must be non-negative"};
    k = *cfg.k;
  } else {
    k = choose_k(PhiTable(spec, cfg.r), n, KRule::parse(cfg.k_rule));
  }
  const Antichain ac = antichain(spec, k, cfg.r);
  const CensusReport cen = census(m, q, ac, spec);
  const CellReport cells = cell_report(m, q, ac);

  if (cfg.format == "jsonl") {
    Json meta;
    meta["type"] = "census";
    meta["n"] = q.n;
    meta["k"] = k;
    meta["phi"] = ac.phi();
    meta["L_min"] = cen.l_min;
    meta["L_max"] = cen.l_max;
    meta["zero_count"] = cen.zero_count;
    meta["L_total"] = cen.total;
    meta["grandchild_coverage"] = cen.coverage_available ? Json(cen.grandchild_coverage) : Json(nullptr);
    meta["J_min"] = cells.j_min;
    meta["J_max"] = cells.j_max;
    meta["S_max"] = cells.max_incidence;
    out << meta.dump() << '\n';
    for (std::size_t i = 0; i < ac.phi(); ++i) {
      Json row;
      row["type"] = "cylinder";
      row["word"] = ac.members[i].word.to_string();
      row["lo"] = ac.members[i].lo;
      row["hi"] = ac.members[i].hi;
      row["L"] = cen.counts[i];
      out << row.dump() << '\n';
    }
    for (std::size_t i = 0; i < cells.cells.size(); ++i) {
      const Cell& c = cells.cells[i];
      Json row;
      row["type"] = "cell";
      row["index"] = i;
      row["codepoint"] = c.codepoint;
      row["cell_lo"] = c.lo;
      row["cell_hi"] = c.hi;
      row["mass"] = c.mass;
      row["error"] = c.error;
      row["S"] = c.incidence;
      out << row.dump() << '\n';
    }
    return kExitOk;
  }

  out << "# census n=" << q.n << " k=" << k << " phi=" << ac.phi() << " L_min=" << cen.l_min
      << " L_max=" << cen.l_max << " zero=" << cen.zero_count << " L_total=" << cen.total
      << " grandchild_coverage="
      << (cen.coverage_available ? format_double(cen.grandchild_coverage) : std::string("na")) << '\n';
  out << "word,lo,hi,L\n";
  for (std::size_t i = 0; i < ac.phi(); ++i) {
    const Cylinder& c = ac.members[i];
    out << c.word.to_string() << ',' << format_double(c.lo) << ',' << format_double(c.hi) << ','
        << cen.counts[i] << '\n';
  }
  out << "# incidence J_min=" << format_double(cells.j_min) << " J_max=" << format_double(cells.j_max)
      << " S_max=" << cells.max_incidence << '\n';
  out << "index,codepoint,cell_lo,cell_hi,mass,error,S\n";
  for (std::size_t i = 0; i < cells.cells.size(); ++i) {
    const Cell& c = cells.cells[i];
    out << i << ',' << format_double(c.codepoint) << ',' << format_double(c.lo) << ','
        << format_double(c.hi) << ',' << format_double(c.mass) << ',' << format_double(c.error) << ','
        << c.incidence << '\n';
  }
  return kExitOk;
}

std::vector<double> parse_epsilons(const std::string& text) {
  std::vector<double> eps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      eps.push_back(parse_number(item));
    } catch (const SpecError&) {
      throw Exit{kExitUsage, "malformed --epsilons entry '" + item + "'"};
    }
  }
  return eps;
}

int cmd_dims(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto [n_min, n_max] = n_window(cfg);
  if (n_max - n_min + 1 < 5) throw Exit{kExitUsage, "dimension window needs at least 5 values of n"};
  const MoranSpec spec = load_admissible(cfg);
  const AtomMeasure m = discretize(spec, resolve_depth(cfg, spec, n_max), cfg.r);
  const SweepResult res = run_sweep(cfg, spec, m, n_min, n_max, err);
  const DimensionEstimate est = dimension_estimate(res.rows, n_min, n_max, cfg.r);

  std::optional<BallMassProfile> profile;
  if (!cfg.epsilons.empty()) {
    const std::vector<double> eps = parse_epsilons(cfg.epsilons);
    profile = ball_mass_profile(m, eps, validate_spec(spec, cfg.r));
  }

  if (cfg.format == "jsonl") {
    Json meta;
    meta["type"] = "dimension";
    meta["r"] = cfg.r;
    meta["depth"] = m.depth();
    meta["slope"] = est.slope;
    meta["s_probe"] = est.s_probe;
    meta["coefficient_min"] = est.coefficient_min;
    meta["coefficient_max"] = est.coefficient_max;
    out << meta.dump() << '\n';
    for (std::size_t i = 0; i < est.n.size(); ++i) {
      Json row;
      row["type"] = "coefficient";
      row["n"] = est.n[i];
      row["coefficient"] = est.coefficients[i];
      out << row.dump() << '\n';
    }
    if (profile) {
      Json p;
      p["type"] = "ball_mass";
      p["fitted_exponent"] = profile->fitted_exponent;
      p["reference_exponent"] = profile->reference_exponent;
      p["reference_constant"] = profile->reference_constant;
      p["epsilons"] = profile->epsilons;
      p["sup_mass"] = profile->sup_mass;
      out << p.dump() << '\n';
    }
    return kExitOk;
  }

  out << "# dims r=" << format_double(cfg.r) << " depth=" << m.depth() << " slope=" << format_double(est.slope)
      << " s_probe=" << format_double(est.s_probe) << " coefficient_min=" << format_double(est.coefficient_min)
      << " coefficient_max=" << format_double(est.coefficient_max) << '\n';
  out << "n,e,coefficient\n";
  for (std::size_t i = 0; i < est.n.size(); ++i) {
    const SweepRow& row = res.rows[est.n[i] - n_min];
    out << est.n[i] << ',' << format_double(row.e) << ',' << format_double(est.coefficients[i]) << '\n';
  }
  if (profile) {
    out << "# ball_mass fitted_exponent=" << format_double(profile->fitted_exponent)
        << " reference_exponent=" << format_double(profile->reference_exponent)
        << " reference_constant=" << format_double(profile->reference_constant) << '\n';
    out << "epsilon,sup_mass,reference_bound\n";
    for (std::size_t i = 0; i < profile->epsilons.size(); ++i) {
      out << format_double(profile->epsilons[i]) << ',' << format_double(profile->sup_mass[i]) << ','
          << format_double(profile->reference_bound(profile->epsilons[i])) << '\n';
    }
  }
  return kExitOk;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--spec", cfg.spec_path, "Spec JSON file")->required();
  sub->add_option("--r", cfg.r, "Quantization order r > 0");
  sub->add_option("--out", cfg.out_path, "Output file (default: stdout)");
  sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}));
}

void add_depth(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--depth", cfg.depth, "Discretization depth, or 'auto'");
  sub->add_option("--safety", cfg.safety, "Adequacy safety factor for w_inf/e");
  sub->add_flag("--force", cfg.force, "Run even if the depth is not adequate");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal quantization of Moran measures on the line"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* validate = app.add_subcommand("validate", "Check a spec and report its constants");
  add_common(validate, cfg);

  auto* atoms = app.add_subcommand("atoms", "Dump the midpoint atom measure");
  add_common(atoms, cfg);
  add_depth(atoms, cfg);
  atoms->add_option("--n", cfg.n, "Target codebook size for --depth auto");

  auto* ac = app.add_subcommand("antichain", "List the antichain cylinders at level k");
  add_common(ac, cfg);
  ac->add_option("--k", cfg.k, "Antichain level");

  auto* quantize = app.add_subcommand("quantize", "Compute an n-point quantizer");
  add_common(quantize, cfg);
  add_depth(quantize, cfg);
  quantize->add_option("--n", cfg.n, "Codebook size");
  quantize->add_option("--method", cfg.method, "Solver")->check(CLI::IsMember({"dp", "lloyd"}));

  auto* sw = app.add_subcommand("sweep", "Uniformity statistics over a range of n");
  add_common(sw, cfg);
  add_depth(sw, cfg);
  sw->add_option("--n-min", cfg.n_min, "Smallest n");
  sw->add_option("--n-max", cfg.n_max, "Largest n");
  sw->add_option("--k-rule", cfg.k_rule, "auto or paper:M");

  auto* cen = app.add_subcommand("census", "Codepoints per antichain cylinder and cell incidence");
  add_common(cen, cfg);
  add_depth(cen, cfg);
  cen->add_option("--n", cfg.n, "Codebook size");
  cen->add_option("--k", cfg.k, "Antichain level (default: from --k-rule)");
  cen->add_option("--k-rule", cfg.k_rule, "auto or paper:M");
  cen->add_option("--method", cfg.method, "Solver")->check(CLI::IsMember({"dp", "lloyd"}));

  auto* dims = app.add_subcommand("dims", "Quantization dimension and coefficient probes");
  add_common(dims, cfg);
  add_depth(dims, cfg);
  dims->add_option("--n-min", cfg.n_min, "Window start");
  dims->add_option("--n-max", cfg.n_max, "Window end");
  dims->add_option("--k-rule", cfg.k_rule, "auto or paper:M");
  dims->add_option("--epsilons", cfg.epsilons, "Comma-separated ball radii for the local regularity profile");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  std::ofstream file;
  std::ostringstream buffer;
  std::ostream& sink = cfg.out_path.empty() ? out : static_cast<std::ostream&>(buffer);
  int code = kExitOk;
  try {
    if (!(cfg.r > 0.0) || !std::isfinite(cfg.r)) throw Exit{kExitUsage, "--r must be positive"};
    if (validate->parsed()) code = cmd_validate(cfg, sink);
    else if (atoms->parsed()) code = cmd_atoms(cfg, sink);
    else if (ac->parsed()) code = cmd_antichain(cfg, sink);
    else if (quantize->parsed()) code = cmd_quantize(cfg, sink, err);
    else if (sw->parsed()) code = cmd_sweep(cfg, sink, err);
    else if (cen->parsed()) code = cmd_census(cfg, sink, err);
    else if (dims->parsed()) code = cmd_dims(cfg, sink, err);
  } catch (const Exit& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const AdequacyError& e) {
    err << "error: " << e.what() << '\n';
    return kExitAdequacy;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ResourceLimit& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (!cfg.out_path.empty()) {
    file.open(cfg.out_path, std::ios::binary | std::ios::trunc);
    if (!file) {
      err << "error: cannot write '" << cfg.out_path << "'\n";
      return kExitUsage;
    }
    file << buffer.str();
  }
  return code;
}

}  // namespace moranq
