#pragma once

// Lifetime laws for basic events, their scaled reference counterparts and
// the solver that ties every reference scale to the common parameter D.
//
// All evaluations are done with tail-accurate expressions: survival
// probabilities of order 1e-14 and below are never formed as 1 - F(t).

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include <boost/math/special_functions/erf.hpp>

#include "dftmc/error.hpp"

namespace dftmc {

enum class Family { Exponential, Weibull, LogNormal, Normal };

/// Keyword used for the family in `.dft` files and reports.
inline std::string_view family_keyword(Family f) {
  switch (f) {
    case Family::Exponential: return "exp";
    case Family::Weibull: return "weibull";
    case Family::LogNormal: return "lognormal";
    case Family::Normal: return "normal";
  }
  return "?";
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double std_normal_sf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double log_std_normal_pdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

// log(1 - Phi(x)), finite far into the upper tail.
inline double log_std_normal_sf(double x) {
  if (x < 0.0) return std::log1p(-std_normal_cdf(x));
  if (x < 30.0) return std::log(std_normal_sf(x));
  // Asymptotic (Mills ratio) expansion; relative error < 1e-12 for x >= 30.
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r));
  return log_std_normal_pdf(x) - std::log(x) + std::log(series);
}

// Phi^{-1} given both tail masses lower = q and upper = 1 - q, so that
// whichever is smaller is used without cancellation.
inline double std_normal_quantile(double lower, double upper) {
  if (lower < 0.5) return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * lower);
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * upper);
}

}  // namespace detail

/// A basic event's failure-time law.
///
/// Parameters by family:
///   Exponential  a = mttf u
///   Weibull      a = scale u, b = shape
///   LogNormal    a = log-median mu, b = log-sd sigma
///   Normal       a = mean m, b = sd s (truncated to t >= 0)
///
/// Normal laws are renormalised by their mass on [0, inf) whenever the mass
/// below zero exceeds 1e-12; below that threshold the truncation is ignored.
class Distribution {
 public:
  static Distribution exponential(double mttf) {
    require(std::isfinite(mttf) && mttf > 0.0, "exponential mttf must be a positive finite number");
    return Distribution(Family::Exponential, mttf, 1.0);
  }

  static Distribution weibull(double scale, double shape) {
    require(std::isfinite(scale) && scale > 0.0, "weibull scale must be a positive finite number");
    require(std::isfinite(shape) && shape > 0.0, "weibull shape must be a positive finite number");
    return Distribution(Family::Weibull, scale, shape);
  }

  static Distribution lognormal(double mu, double sigma) {
    require(std::isfinite(mu), "lognormal mu must be finite");
    require(std::isfinite(sigma) && sigma > 0.0, "lognormal sigma must be a positive finite number");
    return Distribution(Family::LogNormal, mu, sigma);
  }

  static Distribution normal(double mean, double sd) {
    require(std::isfinite(mean), "normal mean must be finite");
    require(std::isfinite(sd) && sd > 0.0, "normal sd must be a positive finite number");
    return Distribution(Family::Normal, mean, sd);
  }

  Family family() const noexcept { return family_; }
  double first() const noexcept { return a_; }
  double second() const noexcept { return b_; }

  bool operator==(const Distribution& o) const noexcept {
    return family_ == o.family_ && a_ == o.a_ && b_ == o.b_;
  }

  double pdf(double t) const {
    switch (family_) {
      case Family::Exponential:
        return t < 0.0 ? 0.0 : std::exp(-t / a_) / a_;
      case Family::Weibull: {
        if (t < 0.0) return 0.0;
        if (t == 0.0) return b_ < 1.0 ? detail::kInf : (b_ == 1.0 ? 1.0 / a_ : 0.0);
        return std::exp(log_pdf(t));
      }
      case Family::LogNormal:
        return t <= 0.0 ? 0.0 : std::exp(log_pdf(t));
      case Family::Normal:
        return t < 0.0 ? 0.0 : std::exp(log_pdf(t));
    }
    return 0.0;
  }

  double log_pdf(double t) const {
    if (t < 0.0) return -detail::kInf;
    switch (family_) {
      case Family::Exponential:
        return -std::log(a_) - t / a_;
      case Family::Weibull: {
        if (t == 0.0) return std::log(pdf(0.0));
        const double r = t / a_;
        return std::log(b_ / a_) + (b_ - 1.0) * std::log(r) - std::pow(r, b_);
      }
      case Family::LogNormal: {
        if (t == 0.0) return -detail::kInf;
        const double x = (std::log(t) - a_) / b_;
        return detail::log_std_normal_pdf(x) - std::log(b_ * t);
      }
      case Family::Normal: {
        const double x = (t - a_) / b_;
        return detail::log_std_normal_pdf(x) - std::log(b_) - log_mass_;
      }
    }
    return -detail::kInf;
  }

  double cdf(double t) const {
    if (t <= 0.0 && family_ != Family::Normal) return 0.0;
    switch (family_) {
      case Family::Exponential:
        return -std::expm1(-t / a_);
      case Family::Weibull:
        return -std::expm1(-std::pow(t / a_, b_));
      case Family::LogNormal:
        return detail::std_normal_cdf((std::log(t) - a_) / b_);
      case Family::Normal: {
        if (t < 0.0) return 0.0;
        const double x = (t - a_) / b_;
        if (x < 0.0) {
          const double c = (detail::std_normal_cdf(x) - lower_) / mass_;
          return c < 0.0 ? 0.0 : c;
        }
        return 1.0 - detail::std_normal_sf(x) / mass_;
      }
    }
    return 0.0;
  }

  double survival(double t) const { return std::exp(log_survival(t)); }

  /// log(1 - F(t)).
  double log_survival(double t) const {
    if (t <= 0.0 && family_ != Family::Normal) return 0.0;
    switch (family_) {
      case Family::Exponential:
        return -t / a_;
      case Family::Weibull:
        return -std::pow(t / a_, b_);
      case Family::LogNormal:
        return detail::log_std_normal_sf((std::log(t) - a_) / b_);
      case Family::Normal: {
        if (t <= 0.0) return 0.0;
        const double x = (t - a_) / b_;
        if (x < 0.0) return std::log1p(-cdf(t));
        return detail::log_std_normal_sf(x) - log_mass_;
      }
    }
    return 0.0;
  }

  /// Inverse CDF on the open interval (0, 1).
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
      throw DistributionError("quantile probability must lie in (0, 1), got " + std::to_string(p));
    }
    switch (family_) {
      case Family::Exponential:
        return -a_ * std::log1p(-p);
      case Family::Weibull:
        return a_ * std::pow(-std::log1p(-p), 1.0 / b_);
      case Family::LogNormal:
        return std::exp(a_ + b_ * detail::std_normal_quantile(p, 1.0 - p));
      case Family::Normal: {
        const double lo = lower_ + p * mass_;
        const double up = (1.0 - p) * mass_;
        const double t = a_ + b_ * detail::std_normal_quantile(lo, up);
        return t < 0.0 ? 0.0 : t;
      }
    }
    return 0.0;
  }

  /// The family's scale: u for Exponential and Weibull, exp(mu) for
  /// LogNormal, the mean for Normal (which must then be positive).
  double scale_parameter() const {
    switch (family_) {
      case Family::Exponential:
      case Family::Weibull: return a_;
      case Family::LogNormal: return std::exp(a_);
      case Family::Normal:
        require(a_ > 0.0, "normal law needs a positive mean to be scaled");
        return a_;
    }
    return a_;
  }

  /// g(t) = f(t / factor) / factor, expressed in the same family.
  Distribution scaled_by(double factor) const {
    require(std::isfinite(factor) && factor > 0.0, "scale factor must be a positive finite number");
    if (factor == 1.0) return *this;
    switch (family_) {
      case Family::Exponential: return exponential(a_ * factor);
      case Family::Weibull: return weibull(a_ * factor, b_);
      case Family::LogNormal: return lognormal(a_ + std::log(factor), b_);
      case Family::Normal: return normal(a_ * factor, b_ * factor);
    }
    return *this;
  }

  /// Whether the Normal law is renormalised on [0, inf).
  bool truncated() const noexcept { return truncated_; }

 private:
  Distribution(Family f, double a, double b) : family_(f), a_(a), b_(b) {
    if (f == Family::Normal) {
      const double below = detail::std_normal_cdf(-a / b);
      if (below > 1e-12) {
        truncated_ = true;
        lower_ = below;
        mass_ = detail::std_normal_cdf(a / b);
        log_mass_ = std::log(mass_);
      }
    }
  }

  static void require(bool ok, const char* msg) {
    if (!ok) throw DistributionError(msg);
  }

  Family family_;
  double a_;
  double b_;
  bool truncated_ = false;
  double lower_ = 0.0;
  double mass_ = 1.0;
  double log_mass_ = 0.0;
};

/// A scaled reference law g for a base law f, parameterised by the
/// reference scale v (the family scale parameter of g).
struct ReferenceDistribution final {
  Distribution base;
  double v;
  Distribution law;
};

inline ReferenceDistribution scale(const Distribution& d, double v) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw DistributionError("reference scale must be a positive finite number");
  }
  const double s = d.scale_parameter();
  if (v == s) return {d, v, d};
  return {d, v, d.scaled_by(v / s)};
}

namespace detail {

inline void check_reference_args(double big_d, double mission_time) {
  if (!(std::isfinite(big_d) && big_d >= 1.0)) {
    throw DistributionError("secondary reference parameter D must be finite and >= 1");
  }
  if (!(std::isfinite(mission_time) && mission_time > 0.0)) {
    throw DistributionError("mission time must be a positive finite number");
  }
}

}  // namespace detail

/// Solves 1 - G(T) = (1 - F(T)) / D for the reference scale v by bisection
/// on log v. Works for every family; the closed forms below are preferred
/// where they exist.
inline double solve_reference_numeric(const Distribution& d, double big_d, double mission_time) {
  detail::check_reference_args(big_d, mission_time);
  const double s = d.scale_parameter();
  if (big_d == 1.0) return s;

  const double target = d.log_survival(mission_time) - std::log(big_d);
  auto log_sf_at = [&](double log_v) {
    return d.scaled_by(std::exp(log_v) / s).log_survival(mission_time);
  };

  double hi = std::log(s);
  double step = std::numbers::ln2;
  double lo = hi - step;
  while (log_sf_at(lo) > target) {
    step *= 2.0;
    lo = hi - step;
    if (step > 1400.0) {
      throw SolverError("no reference scale found: survival at T cannot be reduced by factor D");
    }
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (log_sf_at(mid) > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

/// Reference scale v for secondary parameter D at mission time T.
///
/// Exponential: v = 1 / (1/u + ln D / T).
/// Weibull:     v = T / ((T/u)^b + ln D)^(1/b), shape held fixed.
/// Other families fall back to solve_reference_numeric().
inline double solve_reference(const Distribution& d, double big_d, double mission_time) {
  detail::check_reference_args(big_d, mission_time);
  if (big_d == 1.0) return d.scale_parameter();
  switch (d.family()) {
    case Family::Exponential:
      return 1.0 / (1.0 / d.first() + std::log(big_d) / mission_time);
    case Family::Weibull: {
      const double b = d.second();
      return mission_time / std::pow(std::pow(mission_time / d.first(), b) + std::log(big_d), 1.0 / b);
    }
    case Family::LogNormal:
    case Family::Normal:
      return solve_reference_numeric(d, big_d, mission_time);
  }
  return d.scale_parameter();
}

}  // namespace dftmc
