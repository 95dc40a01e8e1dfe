#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "levyflow/rng.hpp"

namespace levyflow {

/// Raised when distribution parameters violate their invariants.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { gaussian, student_t, vg, nig };

std::string_view family_name(Family f);
/// Throws InvalidParameter on an unknown name.
Family parse_family(std::string_view name);

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

struct StudentTParams {
  double nu_df = 3.0;
  double mu = 0.0;
  double sigma = 1.0;
};

/// Variance Gamma: Brownian motion with drift `theta` and volatility `sigma`
/// run on a Gamma clock with unit mean and variance `nu`.
struct VgParams {
  double mu = 0.0;
  double sigma = 1.0;
  double theta = -0.2;
  double nu = 0.8;
};

/// Normal-Inverse Gaussian with tail steepness `alpha`, asymmetry `beta`,
/// location `mu` and scale `delta`.
struct NigParams {
  double alpha = 1.5;
  double beta = -0.1;
  double mu = 0.0;
  double delta = 1.0;
};

using BaseParams = std::variant<GaussianParams, StudentTParams, VgParams, NigParams>;

Family family_of(const BaseParams& p);
/// Default (fixed) parameters for each family.
BaseParams default_params(Family f);

void validate(const GaussianParams& p);
void validate(const StudentTParams& p);
void validate(const VgParams& p);
void validate(const NigParams& p);
void validate(const BaseParams& p);

double gaussian_log_pdf(const GaussianParams& p, double x);
double student_t_log_pdf(const StudentTParams& p, double x);
double vg_log_pdf(const VgParams& p, double x);
double nig_log_pdf(const NigParams& p, double x);

double base_log_pdf(const BaseParams& p, double x);
/// d/dx of base_log_pdf.  For VG at x == mu the one-sided limits may differ;
/// the average (the drift term) is returned there.
double base_log_pdf_dx(const BaseParams& p, double x);

/// Analytic mean and variance of the base law (variance is infinite for t with nu <= 2).
double base_mean(const BaseParams& p);
double base_variance(const BaseParams& p);

/// Derived VG constants: exponential tilt and Bessel argument scale.
struct VgDerived {
  double gamma;  // theta / sigma^2
  double beta;   // sqrt(2 sigma^2 / nu + theta^2) / sigma^2
  double order;  // 1/nu - 1/2
};
VgDerived vg_derived(const VgParams& p);

// Samplers.  Each consumes draws from `rng` only; identical streams give
// identical output.
double gamma_variate(double shape, Rng& rng);
double inverse_gaussian_variate(double mean, double shape, Rng& rng);

std::vector<double> vg_sample(const VgParams& p, std::size_t n, Rng& rng);
std::vector<double> nig_sample(const NigParams& p, std::size_t n, Rng& rng);
double base_draw(const BaseParams& p, Rng& rng);
std::vector<double> base_sample(const BaseParams& p, std::size_t n, Rng& rng);

}  // namespace levyflow
