#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pfd/rng.hpp"
#include "pfd/schedule.hpp"
#include "pfd/toyworld.hpp"

namespace pfd {

// Score/denoiser surface the samplers integrate against. Non-virtual
// wrappers count function evaluations so runs can report NFE.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;

  Vec score(const Vec& x, double sigma, const Condition& c) const {
    ++n_evals_;
    return do_score(x, sigma, c);
  }

  Vec denoise(const Vec& x, double sigma, const Condition& c) const {
    ++n_evals_;
    Vec d = do_denoise(x, sigma, c);
#ifndef NDEBUG
    assert_tweedie(x, sigma, c, d);
#endif
    return d;
  }

  virtual int dim() const = 0;

  long long nfe() const { return n_evals_; }
  void reset_nfe() const { n_evals_ = 0; }

 protected:
  virtual Vec do_score(const Vec& x, double sigma, const Condition& c) const = 0;
  // Default denoiser is the Tweedie identity x + sigma^2 * score.
  virtual Vec do_denoise(const Vec& x, double sigma, const Condition& c) const;

 private:
  void assert_tweedie(const Vec& x, double sigma, const Condition& c, const Vec& d) const;
  mutable long long n_evals_ = 0;
};

// Exact score/denoiser of one side (p or q) of a MixtureWorld.
class AnalyticScoreProvider : public ScoreProvider {
 public:
  AnalyticScoreProvider(const MixtureWorld& world, Dist which)
      : world_(&world), which_(which) {}

  int dim() const override { return world_->dim(); }
  const MixtureWorld& world() const { return *world_; }
  Dist which() const { return which_; }

 protected:
  Vec do_score(const Vec& x, double sigma, const Condition& c) const override {
    return world_->noisy_score(c, which_, x, sigma);
  }
  Vec do_denoise(const Vec& x, double sigma, const Condition& c) const override;

 private:
  const MixtureWorld* world_;
  Dist which_;
};

// EDM-style stochastic sampler configuration. resample_steps lists the step
// indices at which the particle filter hooks fire.
struct EdmConfig {
  int n_steps = 32;
  double s_churn = 0.0;
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::infinity();
  std::vector<int> resample_steps;
  double t_min = 1e-3;
  double t_max = 10.0;

  void validate() const;
  double churn_gamma(double t) const;

  // "N, {n_1, ..., n_m}" steps/resampling-indices syntax.
  static EdmConfig parse(const std::string& text);
  std::string format() const;
};

struct RestartInterval {
  int n_restart = 4;
  int repeats = 1;
  double t_min = 0.0;
  double t_max = 0.0;
};

// Restart sampler configuration: a main backward pass plus noise-and-denoise
// excursions over fixed intervals, ordered by decreasing t_max.
struct RestartConfig {
  int n_main = 24;
  std::vector<RestartInterval> intervals;
  double t_min = 1e-3;
  double t_max = 10.0;

  void validate() const;

  // "N_main, {(N_restart, K, t_min, t_max), ...}" tuple syntax.
  static RestartConfig parse(const std::string& text);
  std::string format() const;

  // Default toy-scale schedule: 16 main steps plus three restart windows
  // spanning the range where the slot components separate.
  static RestartConfig toy_default();
};

struct SamplerEvent {
  enum class Phase { BeforeNoise, AfterNoise };
  Phase phase;
  int event_index;   // 0-based across the run
  int interval;      // restart interval index, or EDM step index
  int repetition;    // 1-based repetition within the interval (always 1 for EDM)
  double t;          // time level the states currently live at
  double t_high;     // noise target level of this event
};

// Hook invoked at a barrier across the whole ensemble; may permute or
// replace states in place (this is where resampling attaches).
using EnsembleHook = std::function<void(const SamplerEvent&, std::vector<Vec>&)>;

// Per-(particle, step) random stream, honoring the seed derivation contract.
using StepStreamFn = std::function<rng::Stream(int particle, int step)>;

// Static description of the noise-injection events a config will produce.
struct EventSchedule {
  int interval;
  int repetition;
  double t_low;   // level before adding noise
  double t_high;  // level right after adding noise
};
std::vector<EventSchedule> event_schedule(const RestartConfig& cfg);
std::vector<EventSchedule> event_schedule(const EdmConfig& cfg);

// One churn-then-integrate step in VE coordinates: lift noise from t_from to
// t_hat = t_from*(1+gamma_churn), then solve the probability-flow ODE down
// to t_to with Heun's method (plain Euler when t_to is terminal zero).
Vec edm_step(const Vec& x, double t_from, double t_to, const ScoreProvider& provider,
             const Condition& c, double gamma_churn, rng::Stream& noise);

struct RunResult {
  std::vector<Vec> terminal_states;  // raw states at t_min
  std::vector<Vec> finals;           // one-step denoised predictions at t_min
  std::vector<EventSchedule> events;
  double t_terminal = 0.0;
};

RunResult edm_run(std::vector<Vec> states, const EdmConfig& cfg, const ScoreProvider& provider,
                  const Condition& c, const StepStreamFn& streams, const EnsembleHook& hook = {});

RunResult restart_run(std::vector<Vec> states, const RestartConfig& cfg, const ScoreProvider& provider,
                      const Condition& c, const StepStreamFn& streams, const EnsembleHook& hook = {});

// f(X_t): one-step prediction of the clean sample.
inline Vec one_step_clean_prediction(const Vec& x, double sigma, const ScoreProvider& provider,
                                     const Condition& c) {
  return provider.denoise(x, sigma, c);
}

}  // namespace pfd
