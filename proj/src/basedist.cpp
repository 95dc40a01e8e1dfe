#include "levyflow/basedist.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "levyflow/special.hpp"

namespace levyflow {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidParameter(what);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::student_t: return "student_t";
    case Family::vg: return "vg";
    case Family::nig: return "nig";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "student_t") return Family::student_t;
  if (name == "vg") return Family::vg;
  if (name == "nig") return Family::nig;
  throw InvalidParameter("unknown family '" + std::string(name) + "'");
}

Family family_of(const BaseParams& p) {
  return std::visit(Overloaded{[](const GaussianParams&) { return Family::gaussian; },
                               [](const StudentTParams&) { return Family::student_t; },
                               [](const VgParams&) { return Family::vg; },
                               [](const NigParams&) { return Family::nig; }},
                    p);
}

BaseParams default_params(Family f) {
  switch (f) {
    case Family::gaussian: return GaussianParams{};
    case Family::student_t: return StudentTParams{};
    case Family::vg: return VgParams{};
    case Family::nig: return NigParams{};
  }
  throw InvalidParameter("unknown family");
}

void validate(const GaussianParams& p) {
  require(finite(p.mu) && finite(p.sigma), "gaussian: parameters must be finite");
  require(p.sigma > 0.0, "gaussian: sigma must be > 0");
}

void validate(const StudentTParams& p) {
  require(finite(p.mu) && finite(p.sigma) && finite(p.nu_df), "student_t: parameters must be finite");
  require(p.nu_df > 0.0, "student_t: nu_df must be > 0");
  require(p.sigma > 0.0, "student_t: sigma must be > 0");
}

void validate(const VgParams& p) {
  require(finite(p.mu) && finite(p.sigma) && finite(p.theta) && finite(p.nu), "vg: parameters must be finite");
  require(p.sigma > 0.0, "vg: sigma must be > 0");
  require(p.nu > 0.0, "vg: nu must be > 0");
}

void validate(const NigParams& p) {
  require(finite(p.alpha) && finite(p.beta) && finite(p.mu) && finite(p.delta), "nig: parameters must be finite");
  require(p.alpha > std::abs(p.beta), "nig: alpha must exceed |beta|");
  require(p.delta > 0.0, "nig: delta must be > 0");
}

void validate(const BaseParams& p) {
  std::visit([](const auto& q) { validate(q); }, p);
}

double gaussian_log_pdf(const GaussianParams& p, double x) {
  validate(p);
  const double t = (x - p.mu) / p.sigma;
  return -0.5 * t * t - kLogSqrt2Pi - std::log(p.sigma);
}

double student_t_log_pdf(const StudentTParams& p, double x) {
  validate(p);
  const double t = (x - p.mu) / p.sigma;
  const double nu = p.nu_df;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         std::log(p.sigma) - 0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

VgDerived vg_derived(const VgParams& p) {
  const double s2 = p.sigma * p.sigma;
  return {p.theta / s2, std::sqrt(2.0 * s2 / p.nu + p.theta * p.theta) / s2, 1.0 / p.nu - 0.5};
}

double vg_log_pdf(const VgParams& p, double x) {
  validate(p);
  const VgDerived d = vg_derived(p);
  const double s2 = p.sigma * p.sigma;
  const double a = std::sqrt(2.0 * s2 / p.nu + p.theta * p.theta);
  const double log_c =
      std::numbers::ln2 - std::log(p.sigma) - kLogSqrt2Pi - std::log(p.nu) / p.nu - special::log_gamma(1.0 / p.nu);
  const double dx = x - p.mu;
  const double r = std::abs(dx);
  const double z = d.beta * r;
  // Near the centre K_order(z) ~ Gamma(order)/2 (2/z)^order; use the limit once
  // the first neglected series term drops below double precision.
  if (d.order > 0.0 && (r == 0.0 || std::pow(0.5 * z, 2.0 * std::min(d.order, 1.0)) < 1e-16)) {
    return log_c + special::log_gamma(d.order) - std::numbers::ln2 + d.order * std::log(2.0 * s2 / (a * a)) +
           d.gamma * dx;
  }
  if (r == 0.0) {
    throw special::DomainError("vg_log_pdf: density is unbounded at x = mu when nu >= 2");
  }
  return log_c + d.order * (std::log(r) - std::log(a)) + special::log_bessel_k(d.order, z) + d.gamma * dx;
}

double nig_log_pdf(const NigParams& p, double x) {
  validate(p);
  const double dx = x - p.mu;
  const double q = std::hypot(p.delta, dx);
  const double g = std::sqrt(p.alpha * p.alpha - p.beta * p.beta);
  return std::log(p.alpha * p.delta / std::numbers::pi) + p.delta * g + p.beta * dx +
         special::log_bessel_k(1.0, p.alpha * q) - std::log(q);
}

double base_log_pdf(const BaseParams& p, double x) {
  return std::visit(Overloaded{[x](const GaussianParams& q) { return gaussian_log_pdf(q, x); },
                               [x](const StudentTParams& q) { return student_t_log_pdf(q, x); },
                               [x](const VgParams& q) { return vg_log_pdf(q, x); },
                               [x](const NigParams& q) { return nig_log_pdf(q, x); }},
                    p);
}

double base_log_pdf_dx(const BaseParams& p, double x) {
  return std::visit(
      Overloaded{[x](const GaussianParams& q) {
                   validate(q);
                   return -(x - q.mu) / (q.sigma * q.sigma);
                 },
                 [x](const StudentTParams& q) {
                   validate(q);
                   const double t = (x - q.mu) / q.sigma;
                   return -(q.nu_df + 1.0) * t / (q.sigma * (q.nu_df + t * t));
                 },
                 [x](const VgParams& q) {
                   validate(q);
                   const VgDerived d = vg_derived(q);
                   const double dx = x - q.mu;
                   if (dx == 0.0) return d.gamma;
                   // d/dx [order ln r + ln K_order(beta r)] = -beta K_{order-1}/K_order
                   const double z = d.beta * std::abs(dx);
                   const double ratio = 1.0 / special::bessel_k_ratio(d.order - 1.0, z);
                   return -std::copysign(d.beta * ratio, dx) + d.gamma;
                 },
                 [x](const NigParams& q) {
                   validate(q);
                   const double dx = x - q.mu;
                   const double s = std::hypot(q.delta, dx);
                   const double k0_over_k1 = 1.0 / special::bessel_k_ratio(0.0, q.alpha * s);
                   return q.beta - dx / s * (q.alpha * k0_over_k1 + 2.0 / s);
                 }},
      p);
}

double base_mean(const BaseParams& p) {
  return std::visit(
      Overloaded{[](const GaussianParams& q) { return q.mu; },
                 [](const StudentTParams& q) {
                   return q.nu_df > 1.0 ? q.mu : std::numeric_limits<double>::quiet_NaN();
                 },
                 [](const VgParams& q) { return q.mu + q.theta; },
                 [](const NigParams& q) {
                   return q.mu + q.delta * q.beta / std::sqrt(q.alpha * q.alpha - q.beta * q.beta);
                 }},
      p);
}

double base_variance(const BaseParams& p) {
  return std::visit(
      Overloaded{[](const GaussianParams& q) { return q.sigma * q.sigma; },
                 [](const StudentTParams& q) {
                   return q.nu_df > 2.0 ? q.sigma * q.sigma * q.nu_df / (q.nu_df - 2.0)
                                        : std::numeric_limits<double>::infinity();
                 },
                 [](const VgParams& q) { return q.sigma * q.sigma + q.theta * q.theta * q.nu; },
                 [](const NigParams& q) {
                   const double g = std::sqrt(q.alpha * q.alpha - q.beta * q.beta);
                   return q.delta * q.alpha * q.alpha / (g * g * g);
                 }},
      p);
}

double gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw InvalidParameter("gamma_variate: shape must be > 0");
  if (shape < 1.0) {
    // G(a) = G(a + 1) U^(1/a)
    const double g = gamma_variate(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double inverse_gaussian_variate(double mean, double shape, Rng& rng) {
  if (!(mean > 0.0) || !(shape > 0.0)) throw InvalidParameter("inverse_gaussian_variate: mean and shape must be > 0");
  // Michael-Schucany-Haas: root of the chi-square(1) transform plus a tie-break draw.
  const double n = rng.normal();
  const double y = n * n;
  const double my = mean * y;
  const double x = mean + mean * my / (2.0 * shape) - mean / (2.0 * shape) * std::sqrt(4.0 * shape * my + my * my);
  const double u = rng.uniform();
  return u <= mean / (mean + x) ? x : mean * mean / x;
}

namespace {

double vg_draw(const VgParams& p, Rng& rng) {
  // G ~ Gamma(shape 1/nu, rate 1/nu): unit mean, variance nu.
  const double g = gamma_variate(1.0 / p.nu, rng) * p.nu;
  return p.mu + p.theta * g + p.sigma * std::sqrt(g) * rng.normal();
}

double nig_draw(const NigParams& p, Rng& rng) {
  const double g = std::sqrt(p.alpha * p.alpha - p.beta * p.beta);
  // Mixing law IG(delta, gamma): mean delta/gamma, shape delta^2.
  const double y = inverse_gaussian_variate(p.delta / g, p.delta * p.delta, rng);
  return p.mu + p.beta * y + std::sqrt(y) * rng.normal();
}

double student_t_draw(const StudentTParams& p, Rng& rng) {
  const double chi2 = 2.0 * gamma_variate(0.5 * p.nu_df, rng);
  return p.mu + p.sigma * rng.normal() / std::sqrt(chi2 / p.nu_df);
}

}  // namespace

double base_draw(const BaseParams& p, Rng& rng) {
  return std::visit(Overloaded{[&rng](const GaussianParams& q) { return q.mu + q.sigma * rng.normal(); },
                               [&rng](const StudentTParams& q) { return student_t_draw(q, rng); },
                               [&rng](const VgParams& q) { return vg_draw(q, rng); },
                               [&rng](const NigParams& q) { return nig_draw(q, rng); }},
                    p);
}

std::vector<double> base_sample(const BaseParams& p, std::size_t n, Rng& rng) {
  validate(p);
  if (n == 0) throw InvalidParameter("base_sample: n must be >= 1");
  std::vector<double> out(n);
  for (auto& v : out) v = base_draw(p, rng);
  return out;
}

std::vector<double> vg_sample(const VgParams& p, std::size_t n, Rng& rng) { return base_sample(p, n, rng); }

std::vector<double> nig_sample(const NigParams& p, std::size_t n, Rng& rng) { return base_sample(p, n, rng); }

}  // namespace levyflow
