#pragma once

#include <stdexcept>
#include <string>

namespace levyflow::special {

/// Thrown when a special function is evaluated outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Accuracy {
  double rel_tol = 1e-10;
  int max_terms = 500;
};

/// ln Gamma(x) for x > 0.
double log_gamma(double x);

/// ln K_order(z), the log of the modified Bessel function of the second kind.
///
/// Evaluated entirely in log space so that neither K nor the exponentially
/// scaled e^z K is ever materialized outside its representable range.
/// K_{-v} = K_v is applied up front, so any finite order is accepted.
double log_bessel_k(double order, double z);

/// Ratio K_{order+1}(z) / K_order(z).  Used for log-density slopes.
double bessel_k_ratio(double order, double z);

/// Upper tail P(chi2_df > x).
double chi2_sf(double x, int df);

double std_normal_cdf(double x);
double std_normal_pdf(double x);
double std_normal_quantile(double p);

namespace detail {

// Individual evaluation regimes of log K, exposed so that tests can check
// agreement where adjacent regimes overlap.  `order` must be >= 0.
double log_bessel_k_temme_series(double order, double z);
double log_bessel_k_continued_fraction(double order, double z);
// Returns false if the asymptotic series fails to converge for (order, z).
bool log_bessel_k_asymptotic(double order, double z, double& out);

inline constexpr double kSeriesUpper = 2.0;
inline constexpr double kAsymptoticLower = 30.0;

}  // namespace detail

}  // namespace levyflow::special
