#include "pfd/schedule.hpp"

#include <stdexcept>

namespace pfd {

NoiseSchedule NoiseSchedule::vp(double beta_min, double beta_max) {
  if (beta_min < 0.0) throw std::invalid_argument("vp schedule: beta_min must be >= 0");
  if (beta_max <= beta_min) throw std::invalid_argument("vp schedule: beta_max must exceed beta_min");
  NoiseSchedule s;
  s.kind = ScheduleKind::VariancePreserving;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  return s;
}

double sigma_of_t(const NoiseSchedule& schedule, double t) {
  if (t < 0.0) throw std::domain_error("sigma_of_t: t must be nonnegative");
  if (schedule.kind == ScheduleKind::VarianceExploding) return t;
  const double bd = schedule.beta_d();
  const double e = bd * bd * t * t * t / 3.0 +
                   bd * std::sqrt(schedule.beta_min) * t * t +
                   schedule.beta_min * t;
  return std::sqrt(std::expm1(e));
}

TimeGrid make_time_grid(int n_steps, double t_min, double t_max, StepRule rule) {
  if (n_steps < 1) throw std::invalid_argument("make_time_grid: n_steps must be >= 1");
  if (t_min < 0.0) throw std::invalid_argument("make_time_grid: t_min must be >= 0");
  if (t_min >= t_max) throw std::invalid_argument("make_time_grid: t_min must be below t_max");

  TimeGrid grid;
  grid.rule = rule;
  grid.times.resize(static_cast<std::size_t>(n_steps) + 1);
  if (rule == StepRule::Uniform) {
    for (int i = 0; i <= n_steps; ++i) {
      grid.times[i] = t_max + (t_min - t_max) * static_cast<double>(i) / n_steps;
    }
  } else {
    const double inv_rho = 1.0 / kEdmRho;
    const double a = std::pow(t_max, inv_rho);
    const double b = std::pow(t_min, inv_rho);
    for (int i = 0; i <= n_steps; ++i) {
      const double u = a + (b - a) * static_cast<double>(i) / n_steps;
      grid.times[i] = std::pow(u, kEdmRho);
    }
  }
  // Pin the endpoints exactly; pow round-trips can drift in the last ulp.
  grid.times.front() = t_max;
  grid.times.back() = t_min;
  return grid;
}

}  // namespace pfd
