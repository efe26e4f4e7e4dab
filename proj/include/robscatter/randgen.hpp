#pragma once

// Seedable generation of every distribution used by the estimators' tests and
// the Monte Carlo experiments.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the standard.
// Uniforms take the top 53 bits. Normals use the Marsaglia polar method
// (pairs cached), gammas the Marsaglia-Tsang squeeze. None of these depend on
// the standard library's unspecified distribution algorithms, so a seed
// reproduces a stream bit-for-bit on any conforming toolchain with IEEE
// doubles and a correctly rounded std::log/std::sqrt.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/matrix.hpp"

namespace robscatter {

struct Seed {
  std::uint64_t value = 0;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Substream seed for replication `stream`; independent of evaluation order.
constexpr Seed mix(Seed seed, std::uint64_t stream) {
  return Seed{splitmix64(splitmix64(seed.value) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))};
}

class Rng {
 public:
  explicit Rng(Seed seed) : engine_(splitmix64(seed.value)) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

  double normal() {
    if (cached_) {
      const double z = *cached_;
      cached_.reset();
      return z;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    return u * f;
  }

  /// Gamma(shape, scale 1).
  double gamma(double shape) {
    require(shape > 0.0, "gamma shape must be positive");
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform_open(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z, v;
      do {
        z = normal();
        v = 1.0 + c * z;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
      if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chisq(double df) {
    require(df > 0.0, "chi-square degrees of freedom must be positive");
    if (df == 1.0) {
      const double z = normal();
      return z * z;
    }
    return 2.0 * gamma(0.5 * df);
  }

  /// Unit-rate exponential.
  double exponential() { return -std::log(uniform_open()); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    require(n > 0, "index range must be non-empty");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_;
};

// ---------------------------------------------------------------------------
// Distribution specifications

struct StandardNormal {};
/// (chi2_df - df) / sqrt(2 df)
struct ChisqStd {
  double df = 1.0;
};
/// (exp(sigma Z) - exp(sigma^2/2)) / sqrt((exp(sigma^2) - 1) exp(sigma^2))
struct LognormalStd {
  double sigma = 1.0;
};
/// E - 1 for unit-rate E.
struct ExponentialStd {};
/// Uniform on (-sqrt 3, sqrt 3).
struct UniformStd {};
struct Discrete {
  Vector atoms;
  Vector probs;
};
struct MultivariateNormal {
  Vector mu;
  SymMatrix sigma;
};
/// mu + gamma^{1/2} z / sqrt(chi2_df / df).
struct EllipticalT {
  double df = 1.0;
  Vector mu;
  SymMatrix gamma;
};

using DistributionSpec =
    std::variant<StandardNormal, ChisqStd, LognormalStd, ExponentialStd, UniformStd, Discrete, MultivariateNormal, EllipticalT>;

/// Mean and standard deviation of the raw (unstandardized) law behind a standardized kind.
struct Standardization {
  double mean;
  double sd;
};

inline Standardization chisq_standardization(double df) { return {df, std::sqrt(2.0 * df)}; }
inline Standardization lognormal_standardization(double sigma) {
  const double s2 = sigma * sigma;
  return {std::exp(0.5 * s2), std::sqrt(std::expm1(s2) * std::exp(s2))};
}
inline Standardization exponential_standardization() { return {1.0, 1.0}; }

namespace detail {

inline std::size_t dimension(const DistributionSpec& spec) {
  if (const auto* m = std::get_if<MultivariateNormal>(&spec)) return m->mu.size();
  if (const auto* t = std::get_if<EllipticalT>(&spec)) return t->mu.size();
  return 1;
}

inline void validate(const DistributionSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ChisqStd>) {
          require(s.df > 0.0, "chisq_std needs df > 0");
        } else if constexpr (std::is_same_v<T, LognormalStd>) {
          require(s.sigma > 0.0, "lognormal_std needs sigma > 0");
        } else if constexpr (std::is_same_v<T, Discrete>) {
          require(!s.atoms.empty() && s.atoms.size() == s.probs.size(), "discrete law needs matching atoms and probs");
          double total = 0.0;
          for (double q : s.probs) {
            require(q >= 0.0, "discrete probabilities must be non-negative");
            total += q;
          }
          require(std::abs(total - 1.0) <= 1e-12, "discrete probabilities must sum to 1");
        } else if constexpr (std::is_same_v<T, MultivariateNormal>) {
          require(s.mu.size() == s.sigma.dim() && !s.mu.empty(), "multivariate normal dimension mismatch");
        } else if constexpr (std::is_same_v<T, EllipticalT>) {
          require(s.df > 0.0, "elliptical t needs df > 0");
          require(s.mu.size() == s.gamma.dim() && !s.mu.empty(), "elliptical t dimension mismatch");
          const auto e = eig_sym(s.gamma);
          require(e.values.back() > pd_tolerance(e.values), "elliptical t scatter must be positive definite");
        }
      },
      spec);
}

inline double draw_univariate(const DistributionSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StandardNormal>) {
          return rng.normal();
        } else if constexpr (std::is_same_v<T, ChisqStd>) {
          const auto st = chisq_standardization(s.df);
          return (rng.chisq(s.df) - st.mean) / st.sd;
        } else if constexpr (std::is_same_v<T, LognormalStd>) {
          const auto st = lognormal_standardization(s.sigma);
          return (std::exp(s.sigma * rng.normal()) - st.mean) / st.sd;
        } else if constexpr (std::is_same_v<T, ExponentialStd>) {
          return rng.exponential() - 1.0;
        } else if constexpr (std::is_same_v<T, UniformStd>) {
          return std::numbers::sqrt3 * (2.0 * rng.uniform() - 1.0);
        } else if constexpr (std::is_same_v<T, Discrete>) {
          const double u = rng.uniform();
          double acc = 0.0;
          for (std::size_t k = 0; k < s.atoms.size(); ++k) {
            acc += s.probs[k];
            if (u < acc) return s.atoms[k];
          }
          return s.atoms.back();
        } else {
          fail(ErrorKind::InvalidInput, "multivariate law used where a univariate law is required");
        }
      },
      spec);
}

}  // namespace detail

/// n draws from `spec`; univariate kinds give an n x 1 matrix.
inline DataMatrix sample(const DistributionSpec& spec, std::size_t n, Seed seed) {
  require(n >= 1, "sample size must be positive");
  detail::validate(spec);
  Rng rng(seed);
  const std::size_t p = detail::dimension(spec);
  Matrix out(n, p);
  if (const auto* mvn = std::get_if<MultivariateNormal>(&spec)) {
    const SymMatrix root = sqrt_psd(mvn->sigma);
    Vector z(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : z) v = rng.normal();
      const Vector x = root.matrix() * z;
      for (std::size_t j = 0; j < p; ++j) out(i, j) = mvn->mu[j] + x[j];
    }
  } else if (const auto* t = std::get_if<EllipticalT>(&spec)) {
    const SymMatrix root = sqrt_psd(t->gamma);
    Vector z(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : z) v = rng.normal();
      const double scale = 1.0 / std::sqrt(rng.chisq(t->df) / t->df);
      const Vector x = root.matrix() * z;
      for (std::size_t j = 0; j < p; ++j) out(i, j) = t->mu[j] + scale * x[j];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out(i, 0) = detail::draw_univariate(spec, rng);
  }
  return DataMatrix(std::move(out));
}

/// Column j drawn i.i.d. from specs[j]; columns independent.
inline DataMatrix independent_product(const std::vector<DistributionSpec>& specs, std::size_t n, Seed seed) {
  require(n >= 1 && !specs.empty(), "independent_product needs n >= 1 and at least one column");
  for (const auto& s : specs) {
    detail::validate(s);
    require(detail::dimension(s) == 1 && !std::holds_alternative<MultivariateNormal>(s) &&
                !std::holds_alternative<EllipticalT>(s),
            "independent_product needs univariate laws");
  }
  Rng rng(seed);
  Matrix out(n, specs.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < specs.size(); ++j) out(i, j) = detail::draw_univariate(specs[j], rng);
  return DataMatrix(std::move(out));
}

/// Exchangeable sign-symmetric base laws for ess_sample.
enum class EssBase { spherical_normal, spherical_t, uniform_product };

/// Rows omega * y_i + mu with y_i exchangeable sign-symmetric about the origin.
inline DataMatrix ess_sample(EssBase base, const Matrix& omega, const Vector& mu, std::size_t n, Seed seed,
                             double df = 1.0) {
  require(omega.square() && omega.rows() == mu.size(), "ess_sample dimension mismatch");
  require(n >= 1, "sample size must be positive");
  const std::size_t p = mu.size();
  {
    const auto e = eig_sym(SymMatrix(omega.transpose() * omega));
    if (!(e.values.back() > pd_tolerance(e.values))) fail(ErrorKind::InvalidInput, "ess_sample needs full-rank omega");
  }
  require(base != EssBase::spherical_t || df > 0.0, "spherical t needs df > 0");
  Rng rng(seed);
  Matrix out(n, p);
  Vector y(p);
  for (std::size_t i = 0; i < n; ++i) {
    switch (base) {
      case EssBase::spherical_normal:
        for (double& v : y) v = rng.normal();
        break;
      case EssBase::spherical_t: {
        for (double& v : y) v = rng.normal();
        const double scale = 1.0 / std::sqrt(rng.chisq(df) / df);
        for (double& v : y) v *= scale;
        break;
      }
      case EssBase::uniform_product:
        for (double& v : y) v = 2.0 * rng.uniform() - 1.0;
        break;
    }
    const Vector x = omega * y;
    for (std::size_t j = 0; j < p; ++j) out(i, j) = x[j] + mu[j];
  }
  return DataMatrix(std::move(out));
}

}  // namespace robscatter
