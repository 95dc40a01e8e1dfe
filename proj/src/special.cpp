#include "levyflow/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace levyflow::special {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Coefficients of the power series 1/Gamma(x) = sum_k c_k x^k (k = 1..26).
constexpr std::array<double, 26> kRecipGamma = {
    1.0000000000000000,  0.5772156649015329,  -0.6558780715202538,
    -0.0420026350340952, 0.1665386113822915,  -0.0421977345555443,
    -0.0096219715278770, 0.0072189432466630,  -0.0011651675918591,
    -0.0002152416741149, 0.0001280502823882,  -0.0000201348547807,
    -0.0000012504934821, 0.0000011330272320,  -0.0000002056338417,
    0.0000000061160950,  0.0000000050020075,  -0.0000000011812746,
    0.0000000001043427,  0.0000000000077823,  -0.0000000000036968,
    0.0000000000005100,  -0.0000000000000206, -0.0000000000000054,
    0.0000000000000014,  0.0000000000000001};

// Temme's auxiliary functions for |mu| <= 1/2:
//   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
// built from the even/odd parts of the 1/Gamma series so that mu -> 0 is exact.
struct TemmeGammas {
  double gam1;
  double gam2;
  double recip_gamma_plus;   // 1 / Gamma(1 + mu)
  double recip_gamma_minus;  // 1 / Gamma(1 - mu)
};

TemmeGammas temme_gammas(double mu) {
  // 1/Gamma(1+x) = sum_k c_k x^(k-1)
  double even = 0.0;  // sum over odd k (even powers of mu): c1 + c3 mu^2 + ...
  double odd = 0.0;   // sum over even k: c2 + c4 mu^2 + ...  (times mu gives odd part)
  const double mu2 = mu * mu;
  double pw = 1.0;
  for (std::size_t k = 0; k < kRecipGamma.size(); k += 2) {
    even += kRecipGamma[k] * pw;
    odd += kRecipGamma[k + 1] * pw;
    pw *= mu2;
  }
  TemmeGammas g{};
  g.gam1 = -odd;
  g.gam2 = even;
  g.recip_gamma_plus = even + mu * odd;
  g.recip_gamma_minus = even - mu * odd;
  return g;
}

struct LogKPair {
  double log_k;  // ln K_nu(z)
  double ratio;  // K_{nu+1}(z) / K_nu(z)
};

// Upward recurrence K_{m+1} = (2m/z) K_m + K_{m-1}, carried as a ratio so that
// nothing overflows; `base` holds ln K_mu and K_{mu+1}/K_mu.
LogKPair recur_up(LogKPair base, double mu, int steps, double z) {
  double log_k = base.log_k;
  double ratio = base.ratio;
  for (int i = 1; i <= steps; ++i) {
    log_k += std::log(ratio);
    ratio = 2.0 * (mu + i) / z + 1.0 / ratio;
  }
  return {log_k, ratio};
}

// Temme's series for K_mu and K_{mu+1}, |mu| <= 1/2.  Accurate for z <~ 2.
LogKPair temme_series(double mu, double z) {
  const double half_z = 0.5 * z;
  const double pimu = kPi * mu;
  const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(half_z);
  double e = mu * d;
  const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
  const TemmeGammas g = temme_gammas(mu);
  double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / g.recip_gamma_plus;
  double q = 0.5 / (e * g.recip_gamma_minus);
  double c = 1.0;
  d = half_z * half_z;
  double sum1 = p;
  const double mu2 = mu * mu;
  for (int i = 1; i <= kMaxIter; ++i) {
    ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    const double del1 = c * (p - i * ff);
    sum1 += del1;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  const double k_mu = sum;
  const double k_mu1 = sum1 * 2.0 / z;
  return {std::log(k_mu), k_mu1 / k_mu};
}

// Steed's continued fraction (CF2) for K_mu and K_{mu+1}, |mu| <= 1/2.
// Produces the exponentially scaled value directly, so z up to any size is safe.
LogKPair steed_cf(double mu, double z) {
  const double mu2 = mu * mu;
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxIter; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h = a1 * h;
  const double log_k = 0.5 * std::log(kPi / (2.0 * z)) - z - std::log(s);
  const double ratio = (mu + z + 0.5 - h) / z;
  return {log_k, ratio};
}

// ln of the asymptotic series sum_k a_k(nu) / z^k, or false if the terms stop
// shrinking before reaching machine precision.
bool asymptotic_log_sum(double nu, double z, double& out) {
  const double four_nu2 = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (four_nu2 - odd * odd) / (8.0 * k * z);
    const double mag = std::abs(term);
    if (mag > prev) return false;
    sum += term;
    if (mag < 1e-17 * std::abs(sum)) {
      out = std::log(sum);
      return true;
    }
    prev = mag;
  }
  return false;
}

void check_bessel_args(double order, double z) {
  if (!std::isfinite(order)) throw DomainError("log_bessel_k: order must be finite");
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("log_bessel_k: z must be positive and finite");
}

LogKPair log_k_with_ratio(double nu, double z) {
  const int steps = static_cast<int>(nu + 0.5);
  const double mu = nu - steps;
  if (z >= detail::kAsymptoticLower) {
    double lo = 0.0;
    double hi = 0.0;
    if (asymptotic_log_sum(nu, z, lo) && asymptotic_log_sum(nu + 1.0, z, hi)) {
      const double log_k = 0.5 * std::log(kPi / (2.0 * z)) - z + lo;
      return {log_k, std::exp(hi - lo)};
    }
  }
  const LogKPair base = z < detail::kSeriesUpper ? temme_series(mu, z) : steed_cf(mu, z);
  return recur_up(base, mu, steps, z);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: x must be positive and finite");
  return std::lgamma(x);
}

double log_bessel_k(double order, double z) {
  check_bessel_args(order, z);
  return log_k_with_ratio(std::abs(order), z).log_k;
}

double bessel_k_ratio(double order, double z) {
  check_bessel_args(order, z);
  if (order >= 0.0) return log_k_with_ratio(order, z).ratio;
  // K_{v+1}/K_v with v < 0 equals K_{|v+1|}/K_{|v|}.
  return std::exp(log_k_with_ratio(std::abs(order + 1.0), z).log_k - log_k_with_ratio(-order, z).log_k);
}

double chi2_sf(double x, int df) {
  if (df < 1) throw DomainError("chi2_sf: df must be >= 1");
  if (!(x >= 0.0)) throw DomainError("chi2_sf: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("std_normal_quantile: p must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

double log_bessel_k_temme_series(double order, double z) {
  check_bessel_args(order, z);
  const int steps = static_cast<int>(order + 0.5);
  const double mu = order - steps;
  return recur_up(temme_series(mu, z), mu, steps, z).log_k;
}

double log_bessel_k_continued_fraction(double order, double z) {
  check_bessel_args(order, z);
  const int steps = static_cast<int>(order + 0.5);
  const double mu = order - steps;
  return recur_up(steed_cf(mu, z), mu, steps, z).log_k;
}

bool log_bessel_k_asymptotic(double order, double z, double& out) {
  check_bessel_args(order, z);
  double lsum = 0.0;
  if (!asymptotic_log_sum(order, z, lsum)) return false;
  out = 0.5 * std::log(kPi / (2.0 * z)) - z + lsum;
  return true;
}

}  // namespace detail

}  // namespace levyflow::special
