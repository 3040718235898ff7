#include "pfd/correction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pfd {

double ratio_from_discriminator(double d_value, double floor_eps) {
  const double d = std::clamp(d_value, floor_eps, 1.0 - floor_eps);
  return d / (1.0 - d);
}

double KappaTable::at(int event_index, int object) const {
  if (event_index < 0 || event_index >= n_events())
    throw std::out_of_range("kappa table: event index out of range");
  if (object < 0 || object >= n_objects)
    throw std::out_of_range("kappa table: object index out of range");
  return values[static_cast<std::size_t>(event_index)][static_cast<std::size_t>(object)];
}

KappaTable estimate_kappa(const std::vector<PlainRunRecord>& runs, const MixtureWorld& detector,
                          const std::vector<double>& event_times, const std::string& placement,
                          double threshold, double kappa_default) {
  if (runs.empty()) throw std::invalid_argument("estimate_kappa: empty run set");
  const int n_events = static_cast<int>(event_times.size());
  const int n_objects = detector.n_objects();
  for (const auto& run : runs) {
    if (static_cast<int>(run.f_at_events.size()) != n_events)
      throw std::invalid_argument("estimate_kappa: run record does not cover every event");
  }

  KappaTable table;
  table.n_objects = n_objects;
  table.h_runs = static_cast<int>(runs.size());
  table.event_times = event_times;
  table.placement = placement;
  table.kappa_default = kappa_default;
  table.mention_counts.assign(static_cast<std::size_t>(n_objects), 0);
  table.hit_counts.assign(static_cast<std::size_t>(n_events),
                          std::vector<int>(static_cast<std::size_t>(n_objects), 0));
  table.values.assign(static_cast<std::size_t>(n_events),
                      std::vector<double>(static_cast<std::size_t>(n_objects), kappa_default));

  for (const auto& run : runs) {
    for (int i : run.c.mentioned()) {
      ++table.mention_counts[static_cast<std::size_t>(i)];
      for (int e = 0; e < n_events; ++e) {
        if (detector.detect_object(run.f_at_events[static_cast<std::size_t>(e)], i) >= threshold)
          ++table.hit_counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(i)];
      }
    }
  }
  for (int e = 0; e < n_events; ++e) {
    for (int i = 0; i < n_objects; ++i) {
      const int mentions = table.mention_counts[static_cast<std::size_t>(i)];
      if (mentions == 0) {
        table.defaulted_cells.emplace_back(e, i);
      } else {
        table.values[static_cast<std::size_t>(e)][static_cast<std::size_t>(i)] =
            static_cast<double>(table.hit_counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(i)]) /
            static_cast<double>(mentions);
      }
    }
  }
  return table;
}

void HybridConfig::validate() const {
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("hybrid config: pi must lie in (0,1)");
  if (!(ratio_floor > 0.0 && ratio_floor <= 1e-3))
    throw std::invalid_argument("hybrid config: ratio floor must lie in (0, 1e-3]");
  if (use_unconditional_discriminator && analytic_oracle)
    throw std::invalid_argument("hybrid config: pick one unconditional-ratio source");
}

double mention_numerator(const Vec& x_t, double sigma, const Condition& c, int i,
                         const ScoreProvider& provider, const MixtureWorld& detector) {
  if (!c.mentions(i)) throw std::invalid_argument("mention_numerator: object not mentioned");
  const Vec f = one_step_clean_prediction(x_t, sigma, provider, c);
  return detector.detect_object(f, i);
}

double mention_denominator(const Vec& x_t, double sigma, const Condition& c, int i,
                           const ScoreProvider& provider, const MixtureWorld& detector,
                           double kappa, double pi) {
  const double p_hat = mention_numerator(x_t, sigma, c, i, provider, detector);
  const double escape = ((1.0 - kappa) * pi) / ((1.0 - kappa) * pi + 1.0 - pi);
  return p_hat + (1.0 - p_hat) * escape;
}

CorrectionMode correction_mode_from_string(const std::string& name) {
  if (name == "discriminator") return CorrectionMode::Discriminator;
  if (name == "hybrid") return CorrectionMode::Hybrid;
  if (name == "analytic") return CorrectionMode::Analytic;
  throw std::invalid_argument("unknown correction mode: " + name);
}

std::string to_string(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::Discriminator: return "discriminator";
    case CorrectionMode::Hybrid: return "hybrid";
    case CorrectionMode::Analytic: return "analytic";
  }
  return "?";
}

CorrectionEvaluator::CorrectionEvaluator(CorrectionMode mode, Deps deps)
    : mode_(mode), deps_(std::move(deps)) {
  deps_.hybrid.validate();
  switch (mode_) {
    case CorrectionMode::Discriminator:
      if (!deps_.conditional)
        throw std::invalid_argument("correction: discriminator mode needs a conditional discriminator");
      break;
    case CorrectionMode::Hybrid:
      if (!deps_.world || !deps_.provider || !deps_.kappa)
        throw std::invalid_argument("correction: hybrid mode needs detector, provider and kappa table");
      if (deps_.hybrid.use_unconditional_discriminator && !deps_.unconditional)
        throw std::invalid_argument("correction: hybrid mode configured for a trained unconditional "
                                    "discriminator but none was supplied");
      if (deps_.hybrid.analytic_oracle && !deps_.prior)
        throw std::invalid_argument("correction: analytic unconditional ratio needs a condition prior");
      break;
    case CorrectionMode::Analytic:
      if (!deps_.world) throw std::invalid_argument("correction: analytic mode needs the world");
      break;
  }
}

double CorrectionEvaluator::phi(const Vec& x_t, double sigma, const Condition& c, int event_index) const {
  const double eps = deps_.hybrid.ratio_floor;
  double value = 1.0;
  switch (mode_) {
    case CorrectionMode::Discriminator: {
      value = ratio_from_discriminator(deps_.conditional->value(x_t, sigma, c), eps);
      break;
    }
    case CorrectionMode::Analytic: {
      const double log_ratio = deps_.world->noisy_log_density(c, Dist::P, x_t, sigma) -
                               deps_.world->noisy_log_density(c, Dist::Q, x_t, sigma);
      value = std::exp(std::clamp(log_ratio, std::log(eps), -std::log(eps)));
      break;
    }
    case CorrectionMode::Hybrid: {
      double uncond = 1.0;
      if (deps_.hybrid.use_unconditional_discriminator) {
        uncond = ratio_from_discriminator(deps_.unconditional->value(x_t, sigma, Condition{}), eps);
      } else if (deps_.hybrid.analytic_oracle) {
        const double lr = uncond_noisy_log_density(*deps_.world, *deps_.prior, Dist::P, x_t, sigma) -
                          uncond_noisy_log_density(*deps_.world, *deps_.prior, Dist::Q, x_t, sigma);
        uncond = std::exp(std::clamp(lr, std::log(eps), -std::log(eps)));
      }
      double mention_ratio = 1.0;
      if (!c.empty()) {
        // Share the one-step prediction across the mentioned objects.
        const Vec f = one_step_clean_prediction(x_t, sigma, *deps_.provider, c);
        for (int i : c.mentioned()) {
          const double p_hat = deps_.world->detect_object(f, i);
          const double kappa = deps_.kappa->at(event_index, i);
          const double escape = ((1.0 - kappa) * deps_.hybrid.pi) /
                                ((1.0 - kappa) * deps_.hybrid.pi + 1.0 - deps_.hybrid.pi);
          const double denom = p_hat + (1.0 - p_hat) * escape;
          mention_ratio *= p_hat / std::max(denom, eps);
        }
      }
      value = uncond * mention_ratio;
      break;
    }
  }
  return std::clamp(value, eps, 1.0 / eps);
}

}  // namespace pfd
