#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>

#include "robscatter/error.hpp"
#include "robscatter/scatter.hpp"
#include "robscatter/subset_scatter.hpp"
#include "robscatter/symmetrize.hpp"
#include "robscatter/types.hpp"

namespace robscatter {

struct ExecutionOptions {
  bool parallel = false;
  std::size_t threads = 0;
  std::size_t memory_budget = std::size_t{1} << 30;
};

/// Runs any ScatterSpec, symmetrized or not.
inline ScatterResult estimate(const DataMatrix& x, const ScatterSpec& spec, const ExecutionOptions& exec = {}) {
  if (spec.symmetrized) {
    SymmetrizedSpec s;
    s.inner = spec;
    s.inner.symmetrized = false;
    s.parallel = exec.parallel;
    s.threads = exec.threads;
    s.memory_budget = exec.memory_budget;
    return symmetrized_estimate(x, s);
  }
  switch (spec.family) {
    case Family::cov: return sample_cov(x, spec.fixed_location);
    case Family::wcov: return wcov(x, spec.alpha, spec.fixed_location);
    case Family::m_huber:
    case Family::m_cauchy:
    case Family::tyler: return m_estimate(x, spec);
    case Family::mve:
      require(!spec.fixed_location, "MVE has no fixed-location mode");
      return mve(x, spec.subset);
    case Family::mcd:
      require(!spec.fixed_location, "MCD has no fixed-location mode");
      return mcd(x, spec.subset);
  }
  fail(ErrorKind::InvalidInput, "unknown estimator family");
}

/// Parses cov, wcov<alpha> (e.g. wcov2, wcov-2.5), CAU/cauchy, HUB/huber,
/// TYL/tyler, MVE, MCD. Symmetrized versions take a leading "s" (sCAU, sHUB,
/// sTYL, scov, swcov2) or a trailing "_sym" (wcov2_sym).
inline ScatterSpec parse_estimator(std::string_view name) {
  std::string s(name);
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  bool sym = false;
  if (lower.size() > 4 && lower.ends_with("_sym")) {  // spec_tag spelling, e.g. wcov2_sym
    sym = true;
    lower.resize(lower.size() - 4);
  } else if (lower.size() > 1 && lower[0] == 's') {
    const std::string rest = lower.substr(1);
    if (rest == "cau" || rest == "cauchy" || rest == "hub" || rest == "huber" || rest == "tyl" || rest == "tyler" ||
        rest == "cov" || rest.starts_with("wcov")) {
      sym = true;
      lower = rest;
    }
  }
  if (lower == "cov") return ScatterSpec::of(Family::cov, sym);
  if (lower.starts_with("wcov")) {
    std::string a = lower.substr(4);
    if (!a.empty() && (a[0] == ':' || a[0] == '_')) a = a.substr(1);
    if (a.empty()) return ScatterSpec::wcov(2.0, sym);
    try {
      std::size_t used = 0;
      const double alpha = std::stod(a, &used);
      if (used == a.size()) return ScatterSpec::wcov(alpha, sym);
    } catch (const std::exception&) {
    }
    fail(ErrorKind::InvalidInput, "bad wcov exponent in estimator name: " + s);
  }
  if (lower == "cau" || lower == "cauchy") return ScatterSpec::of(Family::m_cauchy, sym);
  if (lower == "hub" || lower == "huber") return ScatterSpec::of(Family::m_huber, sym);
  if (lower == "tyl" || lower == "tyler") return ScatterSpec::of(Family::tyler, sym);
  if (lower == "mve") return ScatterSpec::of(Family::mve, sym);
  if (lower == "mcd") return ScatterSpec::of(Family::mcd, sym);
  fail(ErrorKind::InvalidInput, "unknown estimator: " + s);
}

}  // namespace robscatter
