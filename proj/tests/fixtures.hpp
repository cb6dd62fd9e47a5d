#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "moranq/discretize.hpp"
#include "moranq/moran.hpp"

namespace moranq::testing {

inline std::string data_path(const std::string& name) { return std::string(MORANQ_DATA_DIR) + "/" + name; }

inline MoranSpec cantor_spec() { return load_spec_file(data_path("cantor.json")); }
inline MoranSpec inhomogeneous_spec() { return load_spec_file(data_path("inhomogeneous.json")); }

/// Random weighted atoms on [0, 1]; positions distinct, weights in [0.05, 1).
inline AtomMeasure random_measure(std::mt19937_64& rng, std::size_t atoms) {
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::uniform_real_distribution<double> wt(0.05, 1.0);
  std::vector<double> x(atoms), w(atoms);
  for (std::size_t i = 0; i < atoms; ++i) {
    x[i] = pos(rng);
    w[i] = wt(rng);
  }
  return AtomMeasure::from_atoms(std::move(x), std::move(w));
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace moranq::testing
