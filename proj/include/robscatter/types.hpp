#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>

#include "robscatter/error.hpp"
#include "robscatter/matrix.hpp"

namespace robscatter {

enum class Family { cov, wcov, m_huber, m_cauchy, tyler, mve, mcd };

enum class Normalization { none, trace_p, det_1 };

struct IRLSSettings {
  int max_iter = 500;
  double tol = 1e-8;  // relative max-norm change between iterates
  Normalization normalization = Normalization::none;
};

struct SubsetSpec {
  std::optional<std::size_t> h;  // default floor((n + p + 1) / 2)
  int n_starts = 500;
  int c_steps = 50;
  std::uint64_t seed = 0x5eed5eedULL;  // elemental starts are keyed to this, never to the data
  bool exact_small = true;             // exact MVE search for n <= 20
};

/// Declarative choice of estimator, shared by plug-in methods and experiments.
struct ScatterSpec {
  Family family = Family::cov;
  double alpha = 2.0;  // wcov exponent
  double q = 0.7;      // Huber: chi-square quantile level of the cutoff
  bool symmetrized = false;
  std::optional<Vector> fixed_location;
  IRLSSettings irls;
  SubsetSpec subset;

  static ScatterSpec of(Family f, bool sym = false) {
    ScatterSpec s;
    s.family = f;
    s.symmetrized = sym;
    return s;
  }
  static ScatterSpec wcov(double a, bool sym = false) {
    auto s = of(Family::wcov, sym);
    s.alpha = a;
    return s;
  }
};

struct ScatterResult {
  SymMatrix scatter;
  std::optional<Vector> location;
  int iterations = 0;
  bool converged = true;
  std::size_t dropped = 0;  // observations or differences skipped at distance zero
  ScatterSpec spec;
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, ScatterResult last)
      : Error(ErrorKind::ConvergenceFailure, what), last_(std::move(last)) {}
  const ScatterResult& last_iterate() const noexcept { return last_; }

 private:
  ScatterResult last_;
};

/// Short name: cov, wcov2, CAU, sCAU, HUB, sHUB, TYL, sTYL, MVE, MCD.
inline std::string spec_tag(const ScatterSpec& s) {
  std::string base;
  switch (s.family) {
    case Family::cov: base = "cov"; break;
    case Family::wcov: {
      std::ostringstream os;
      os << "wcov" << s.alpha;
      base = os.str();
      break;
    }
    case Family::m_huber: base = "HUB"; break;
    case Family::m_cauchy: base = "CAU"; break;
    case Family::tyler: base = "TYL"; break;
    case Family::mve: base = "MVE"; break;
    case Family::mcd: base = "MCD"; break;
  }
  return s.symmetrized ? (base == "cov" || base.starts_with("wcov") ? base + "_sym" : "s" + base) : base;
}

}  // namespace robscatter
