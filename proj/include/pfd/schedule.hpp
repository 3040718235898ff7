#pragma once

#include <cmath>
#include <vector>

namespace pfd {

enum class ScheduleKind { VarianceExploding, VariancePreserving };

/// Noise schedule sigma(t). VE is the identity sigma(t)=t; VP follows the
/// scaled linear schedule with beta_d = sqrt(beta_max) - sqrt(beta_min).
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::VarianceExploding;
  double beta_min = 0.85;
  double beta_max = 12.0;

  double beta_d() const { return std::sqrt(beta_max) - std::sqrt(beta_min); }

  static NoiseSchedule ve() { return NoiseSchedule{}; }
  static NoiseSchedule vp(double beta_min, double beta_max);
};

double sigma_of_t(const NoiseSchedule& schedule, double t);

// Reparameterization of a raw network F into a denoiser
// D(x;sigma) = c_skip*x + c_out*F(c_in*x; c_noise), with
// score(x;sigma) = (D(x;sigma) - x) / sigma^2.
struct ScoreReparam {
  static double c_skip(double) { return 1.0; }
  static double c_out(double sigma) { return -sigma; }
  static double c_in(double sigma) { return 1.0 / std::sqrt(sigma * sigma + 1.0); }
  // The analytic denoiser is conditioned on sigma directly; the schedule
  // inversion a trained discrete-time network would need is not required.
  static double c_noise(double sigma) { return sigma; }
};

enum class StepRule { EdmPolynomial, Uniform };

struct TimeGrid {
  std::vector<double> times;  // strictly decreasing, front()=t_max, back()=t_min
  StepRule rule = StepRule::EdmPolynomial;

  int n_steps() const { return static_cast<int>(times.size()) - 1; }
};

// n_steps+1 strictly decreasing times from t_max to t_min. The polynomial
// rule uses the standard rho=7 spacing.
TimeGrid make_time_grid(int n_steps, double t_min, double t_max, StepRule rule);

inline constexpr double kEdmRho = 7.0;

}  // namespace pfd
