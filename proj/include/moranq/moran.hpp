#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace moranq {

/// How the children of a cylinder are placed inside it.
enum class LayoutMode { kEvenInternalGaps, kFlushLeft, kExplicitOffsets };

struct Layout {
  LayoutMode mode = LayoutMode::kEvenInternalGaps;
  /// Left offset of each child as a fraction of the parent length
  /// (explicit-offsets only).
  std::vector<double> offsets;
};

/// One construction step: a parent splits into `ratios.size()` children.
struct Level {
  std::vector<double> ratios;
  std::vector<double> probs;
  Layout layout;
  /// Child count as written in the input (0 when not given).
  std::size_t declared_count = 0;

  std::size_t count() const { return ratios.size(); }
  /// Left offset of child j (0-based) as a fraction of the parent.
  double child_offset(std::size_t j) const;
};

/// Generating data of a Moran set E and its product measure.
///
/// Levels are read in order; with `cycle` set they repeat periodically so
/// every depth is defined. Without `cycle` only `levels.size()` construction
/// steps exist.
struct MoranSpec {
  std::vector<Level> levels;
  bool cycle = true;
  double base_lo = 0.0;
  double base_hi = 1.0;
  /// When false, reported cylinder weights use physical lengths
  /// |J| * c_sigma instead of the ratio products c_sigma.
  bool normalize_weights = true;

  double base_length() const { return base_hi - base_lo; }
  /// Whether construction step `depth` (0-based) exists.
  bool has_level(std::size_t depth) const {
    return cycle ? !levels.empty() : depth < levels.size();
  }
  const Level& level(std::size_t depth) const;
  /// Stable fingerprint of the numeric content; used to match measures,
  /// antichains and reports derived from the same spec.
  std::uint64_t fingerprint() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  double p_min = 0.0;
  double p_max = 0.0;
  double c_min = 0.0;
  double c_max = 0.0;
  double r = 0.0;
  /// eta_r = p_min * c_min^r.
  double eta = 0.0;

  bool admissible() const { return violations.empty(); }
};

ValidationReport validate_spec(const MoranSpec& spec, double r);

/// Throws SpecError listing every violation when the spec is inadmissible.
void require_admissible(const MoranSpec& spec);

/// A finite word over the level alphabets. Indices are 1-based; the empty
/// word is the root.
struct Word {
  std::vector<int> indices;

  static Word root() { return {}; }
  std::size_t depth() const { return indices.size(); }
  bool is_root() const { return indices.empty(); }
  Word parent() const;
  Word child(int j) const;
  Word prefix(std::size_t h) const;
  bool is_prefix_of(const Word& other) const;
  /// Dot-separated indices, "root" for the empty word.
  std::string to_string() const;
  static Word parse(std::string_view text);

  friend bool operator==(const Word&, const Word&) = default;
  friend auto operator<=>(const Word&, const Word&) = default;
};

struct Cylinder {
  Word word;
  double lo = 0.0;
  double hi = 0.0;
  /// Physical length |J| * c_sigma.
  double length = 0.0;
  /// Product of ratios along the word (c_sigma).
  double ratio = 1.0;
  /// Product of probabilities along the word (p_sigma).
  double mass = 1.0;
  /// p_sigma * c_sigma^r.
  double weight = 1.0;
  /// sum log p + r * sum log c, accumulated in log space.
  double log_weight = 0.0;
};

/// Cylinder of `word`; throws SpecError for out-of-range indices or depths
/// beyond a non-cycled level list.
Cylinder cylinder(const MoranSpec& spec, const Word& word, double r);

/// The children of `parent`, in left-to-right order.
std::vector<Cylinder> children(const MoranSpec& spec, const Cylinder& parent,
                               double r);

/// Absolute tolerance applied to log-weight threshold comparisons.
inline constexpr double kLogWeightTolerance = 1e-12;
inline constexpr std::size_t kDefaultAntichainCap = 10'000'000;

/// The maximal antichain of words whose weight first drops strictly below
/// eta_r^k. Members are sorted by interval lower endpoint.
struct Antichain {
  int k = 0;
  double r = 0.0;
  double eta = 0.0;
  std::vector<Cylinder> members;
  std::uint64_t spec_id = 0;

  std::size_t phi() const { return members.size(); }
  /// Index of the member containing x, preferring the left cylinder on a
  /// shared endpoint; -1 when x lies in no member.
  std::ptrdiff_t locate(double x) const;
};

/// Builds the antichain at level k. k == 0 yields the root-only antichain
/// used as the "no level" sentinel.
Antichain antichain(const MoranSpec& spec, int k, double r,
                    std::size_t cap = kDefaultAntichainCap);

struct CensusGrowthRow {
  int k = 0;
  std::size_t phi = 0;
  std::size_t phi_next = 0;
  double ratio = 0.0;
};

struct CensusGrowth {
  std::vector<CensusGrowthRow> rows;
  /// Largest observed phi_{k+1} / phi_k.
  double max_ratio = 0.0;
  /// (max_k n_k)^d with d = ceil(log eta_r / max log(p c^r)): the number of
  /// levels after which every descendant of a level-k member has dropped
  /// below eta_r^(k+1).
  double analytic_cap = 0.0;
};

CensusGrowth census_growth(const MoranSpec& spec, double r, int k_max,
                           std::size_t cap = kDefaultAntichainCap);

/// Parses the JSON spec document format.
MoranSpec parse_spec_json(std::string_view text);
MoranSpec load_spec_file(const std::string& path);

/// Parses "a/b" as an exact fraction or a plain decimal.
double parse_number(std::string_view text);

}  // namespace moranq
