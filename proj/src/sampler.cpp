#include "pfd/sampler.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pfd {

Vec ScoreProvider::do_denoise(const Vec& x, double sigma, const Condition& c) const {
  const Vec s = do_score(x, sigma, c);
  Vec d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] + sigma * sigma * s[i];
  return d;
}

void ScoreProvider::assert_tweedie(const Vec& x, double sigma, const Condition& c, const Vec& d) const {
#ifndef NDEBUG
  const Vec s = do_score(x, sigma, c);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = x[i] + sigma * sigma * s[i];
    assert(std::abs(d[i] - expect) <= 1e-6 * std::max(1.0, std::abs(expect)) &&
           "denoiser violates Tweedie consistency");
  }
#else
  (void)x; (void)sigma; (void)c; (void)d;
#endif
}

Vec AnalyticScoreProvider::do_denoise(const Vec& x, double sigma, const Condition& c) const {
  if (which_ == Dist::Q) return world_->mmse_denoise(c, x, sigma);
  // p-side denoiser via the (exact) Tweedie identity.
  return ScoreProvider::do_denoise(x, sigma, c);
}

void EdmConfig::validate() const {
  if (n_steps < 1) throw std::invalid_argument("edm config: n_steps must be >= 1");
  if (s_churn < 0.0) throw std::invalid_argument("edm config: s_churn must be >= 0");
  if (s_min > s_max) throw std::invalid_argument("edm config: s_min must not exceed s_max");
  if (t_min < 0.0 || t_min >= t_max) throw std::invalid_argument("edm config: need 0 <= t_min < t_max");
  for (int n : resample_steps) {
    if (n < 0 || n >= n_steps) throw std::invalid_argument("edm config: resample step outside [0, n_steps)");
  }
  if (!std::is_sorted(resample_steps.begin(), resample_steps.end()))
    throw std::invalid_argument("edm config: resample steps must be ordered");
}

double EdmConfig::churn_gamma(double t) const {
  if (s_churn <= 0.0 || t < s_min || t > s_max) return 0.0;
  constexpr double kMaxGamma = 0.41421356237309515;  // sqrt(2) - 1
  return std::min(s_churn / n_steps, kMaxGamma);
}

void RestartConfig::validate() const {
  if (n_main < 1) throw std::invalid_argument("restart config: n_main must be >= 1");
  if (t_min < 0.0 || t_min >= t_max) throw std::invalid_argument("restart config: need 0 <= t_min < t_max");
  double prev_high = std::numeric_limits<double>::infinity();
  for (const auto& iv : intervals) {
    if (iv.n_restart < 1) throw std::invalid_argument("restart config: interval steps must be >= 1");
    if (iv.repeats < 1) throw std::invalid_argument("restart config: interval repeats must be >= 1");
    if (!(iv.t_min < iv.t_max)) throw std::invalid_argument("restart config: interval needs t_min < t_max");
    if (iv.t_min < t_min || iv.t_max > t_max)
      throw std::invalid_argument("restart config: interval outside the sampling range");
    if (iv.t_max > prev_high)
      throw std::invalid_argument("restart config: intervals must be ordered by decreasing t_max");
    prev_high = iv.t_max;
  }
}

namespace {

// Shared tokenizer for the "N, {...}" config strings.
struct Cursor {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!eat(c)) throw std::invalid_argument(std::string("config parse: expected '") + c + "' in " + what);
  }
  double number(const char* what) {
    skip_ws();
    std::size_t end = pos;
    while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' ||
                              s[end] == '-' || s[end] == '+' || s[end] == 'e' || s[end] == 'E'))
      ++end;
    if (end == pos) throw std::invalid_argument(std::string("config parse: expected number in ") + what);
    const double v = std::stod(s.substr(pos, end - pos));
    pos = end;
    return v;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
};

char open_bracket(Cursor& cur, const char* what) {
  cur.skip_ws();
  if (cur.eat('{')) return '}';
  if (cur.eat('[')) return ']';
  throw std::invalid_argument(std::string("config parse: expected '{' or '[' in ") + what);
}

}  // namespace

EdmConfig EdmConfig::parse(const std::string& text) {
  EdmConfig cfg;
  Cursor cur{text};
  cfg.n_steps = static_cast<int>(cur.number("edm config"));
  cur.expect(',', "edm config");
  const char close = open_bracket(cur, "edm config");
  cfg.resample_steps.clear();
  if (!cur.eat(close)) {
    for (;;) {
      cfg.resample_steps.push_back(static_cast<int>(cur.number("edm resample step")));
      if (cur.eat(close)) break;
      cur.expect(',', "edm config");
    }
  }
  if (!cur.done()) throw std::invalid_argument("config parse: trailing characters in edm config");
  cfg.validate();
  return cfg;
}

std::string EdmConfig::format() const {
  std::ostringstream out;
  out << n_steps << ", {";
  for (std::size_t i = 0; i < resample_steps.size(); ++i) {
    if (i) out << ", ";
    out << resample_steps[i];
  }
  out << "}";
  return out.str();
}

RestartConfig RestartConfig::parse(const std::string& text) {
  RestartConfig cfg;
  Cursor cur{text};
  cfg.n_main = static_cast<int>(cur.number("restart config"));
  cur.expect(',', "restart config");
  const char close = open_bracket(cur, "restart config");
  cfg.intervals.clear();
  if (!cur.eat(close)) {
    for (;;) {
      cur.expect('(', "restart interval");
      RestartInterval iv;
      iv.n_restart = static_cast<int>(cur.number("restart interval"));
      cur.expect(',', "restart interval");
      iv.repeats = static_cast<int>(cur.number("restart interval"));
      cur.expect(',', "restart interval");
      iv.t_min = cur.number("restart interval");
      cur.expect(',', "restart interval");
      iv.t_max = cur.number("restart interval");
      cur.expect(')', "restart interval");
      cfg.intervals.push_back(iv);
      if (cur.eat(close)) break;
      cur.expect(',', "restart config");
    }
  }
  if (!cur.done()) throw std::invalid_argument("config parse: trailing characters in restart config");
  return cfg;
}

RestartConfig RestartConfig::toy_default() {
  RestartConfig cfg;
  cfg.n_main = 16;
  cfg.intervals = {{4, 1, 1.0, 2.5}, {4, 2, 0.4, 1.0}, {4, 2, 0.06, 0.4}};
  cfg.t_min = 1e-3;
  cfg.t_max = 10.0;
  return cfg;
}

std::string RestartConfig::format() const {
  std::ostringstream out;
  out << n_main << ", {";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (i) out << ", ";
    out << "(" << intervals[i].n_restart << ", " << intervals[i].repeats << ", "
        << intervals[i].t_min << ", " << intervals[i].t_max << ")";
  }
  out << "}";
  return out.str();
}

Vec edm_step(const Vec& x, double t_from, double t_to, const ScoreProvider& provider,
             const Condition& c, double gamma_churn, rng::Stream& noise) {
  if (t_to >= t_from) throw std::invalid_argument("edm_step: t_to must be below t_from");
  if (t_to < 0.0) throw std::invalid_argument("edm_step: t_to must be >= 0");

  double t_hat = t_from;
  Vec cur = x;
  if (gamma_churn > 0.0) {
    t_hat = t_from * (1.0 + gamma_churn);
    const double add_sd = std::sqrt(t_hat * t_hat - t_from * t_from);
    for (double& v : cur) v += add_sd * noise.gaussian();
  }

  // dx/dt = (x - D(x;t)) / t along the probability-flow ODE.
  const Vec d1v = provider.denoise(cur, t_hat, c);
  Vec drift(cur.size());
  for (std::size_t i = 0; i < cur.size(); ++i) drift[i] = (cur[i] - d1v[i]) / t_hat;

  Vec next(cur.size());
  const double dt = t_to - t_hat;
  for (std::size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] + dt * drift[i];
  if (t_to > 0.0) {
    const Vec d2v = provider.denoise(next, t_to, c);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double drift2 = (next[i] - d2v[i]) / t_to;
      next[i] = cur[i] + dt * 0.5 * (drift[i] + drift2);
    }
  }
  return next;
}

namespace {

// Plain Euler ODE sub-step (no churn), used by the restart main pass.
Vec euler_step(const Vec& x, double t_from, double t_to, const ScoreProvider& provider,
               const Condition& c) {
  const Vec d = provider.denoise(x, t_from, c);
  Vec next(x.size());
  const double dt = t_to - t_from;
  for (std::size_t i = 0; i < x.size(); ++i) next[i] = x[i] + dt * (x[i] - d[i]) / t_from;
  return next;
}

RunResult finish_run(std::vector<Vec> states, double t_terminal, const ScoreProvider& provider,
                     const Condition& c, std::vector<EventSchedule> events) {
  RunResult res;
  res.t_terminal = t_terminal;
  res.finals.reserve(states.size());
  for (const Vec& x : states) res.finals.push_back(provider.denoise(x, t_terminal, c));
  res.terminal_states = std::move(states);
  res.events = std::move(events);
  return res;
}

}  // namespace

std::vector<EventSchedule> event_schedule(const RestartConfig& cfg) {
  cfg.validate();
  const TimeGrid grid = make_time_grid(cfg.n_main, cfg.t_min, cfg.t_max, StepRule::EdmPolynomial);
  std::vector<EventSchedule> events;
  std::size_t next_interval = 0;
  for (int j = 1; j <= cfg.n_main && next_interval < cfg.intervals.size(); ++j) {
    const double t_now = grid.times[static_cast<std::size_t>(j)];
    while (next_interval < cfg.intervals.size() && t_now <= cfg.intervals[next_interval].t_min) {
      const auto& iv = cfg.intervals[next_interval];
      for (int rep = 1; rep <= iv.repeats; ++rep) {
        events.push_back({static_cast<int>(next_interval), rep, t_now, iv.t_max});
      }
      ++next_interval;
    }
  }
  return events;
}

std::vector<EventSchedule> event_schedule(const EdmConfig& cfg) {
  cfg.validate();
  const TimeGrid grid = make_time_grid(cfg.n_steps, cfg.t_min, cfg.t_max, StepRule::EdmPolynomial);
  std::vector<EventSchedule> events;
  for (int step : cfg.resample_steps) {
    const double t = grid.times[static_cast<std::size_t>(step)];
    const double gamma = cfg.churn_gamma(t);
    events.push_back({step, 1, t, t * (1.0 + gamma)});
  }
  return events;
}

RunResult restart_run(std::vector<Vec> states, const RestartConfig& cfg, const ScoreProvider& provider,
                      const Condition& c, const StepStreamFn& streams, const EnsembleHook& hook) {
  cfg.validate();
  const int k = static_cast<int>(states.size());
  const TimeGrid main_grid = make_time_grid(cfg.n_main, cfg.t_min, cfg.t_max, StepRule::EdmPolynomial);

  std::vector<EventSchedule> events;
  std::vector<int> step_counter(states.size(), 0);  // per-particle noise-step index
  int event_index = 0;
  std::size_t next_interval = 0;

  for (int j = 0; j < cfg.n_main; ++j) {
    const double t_from = main_grid.times[static_cast<std::size_t>(j)];
    const double t_to = main_grid.times[static_cast<std::size_t>(j) + 1];
    for (int p = 0; p < k; ++p) states[static_cast<std::size_t>(p)] = euler_step(states[static_cast<std::size_t>(p)], t_from, t_to, provider, c);

    while (next_interval < cfg.intervals.size() && t_to <= cfg.intervals[next_interval].t_min) {
      const auto& iv = cfg.intervals[next_interval];
      const double t_low = t_to;
      const TimeGrid rgrid = make_time_grid(iv.n_restart, t_low, iv.t_max, StepRule::EdmPolynomial);
      for (int rep = 1; rep <= iv.repeats; ++rep) {
        events.push_back({static_cast<int>(next_interval), rep, t_low, iv.t_max});
        if (hook) {
          const SamplerEvent ev{SamplerEvent::Phase::BeforeNoise, event_index,
                                static_cast<int>(next_interval), rep, t_low, iv.t_max};
          hook(ev, states);
        }
        const double add_sd = std::sqrt(iv.t_max * iv.t_max - t_low * t_low);
        for (int p = 0; p < k; ++p) {
          rng::Stream noise = streams(p, step_counter[static_cast<std::size_t>(p)]++);
          for (double& v : states[static_cast<std::size_t>(p)]) v += add_sd * noise.gaussian();
        }
        if (hook) {
          const SamplerEvent ev{SamplerEvent::Phase::AfterNoise, event_index,
                                static_cast<int>(next_interval), rep, iv.t_max, iv.t_max};
          hook(ev, states);
        }
        ++event_index;
        // Heun backward pass over the excursion grid.
        rng::Stream unused(0);
        for (int p = 0; p < k; ++p) {
          Vec& x = states[static_cast<std::size_t>(p)];
          for (int r = 0; r < iv.n_restart; ++r) {
            const double rt_from = rgrid.times[static_cast<std::size_t>(r)];
            const double rt_to = rgrid.times[static_cast<std::size_t>(r) + 1];
            x = edm_step(x, rt_from, rt_to, provider, c, 0.0, unused);
          }
        }
      }
      ++next_interval;
    }
  }
  return finish_run(std::move(states), cfg.t_min, provider, c, std::move(events));
}

RunResult edm_run(std::vector<Vec> states, const EdmConfig& cfg, const ScoreProvider& provider,
                  const Condition& c, const StepStreamFn& streams, const EnsembleHook& hook) {
  cfg.validate();
  const int k = static_cast<int>(states.size());
  const TimeGrid grid = make_time_grid(cfg.n_steps, cfg.t_min, cfg.t_max, StepRule::EdmPolynomial);

  std::vector<EventSchedule> events;
  std::vector<int> step_counter(states.size(), 0);
  int event_index = 0;
  std::size_t next_resample = 0;

  for (int j = 0; j < cfg.n_steps; ++j) {
    const double t_from = grid.times[static_cast<std::size_t>(j)];
    const double t_to = grid.times[static_cast<std::size_t>(j) + 1];
    const double gamma = cfg.churn_gamma(t_from);
    const bool resample_here =
        next_resample < cfg.resample_steps.size() && cfg.resample_steps[next_resample] == j;
    const double t_hat = t_from * (1.0 + gamma);

    if (resample_here) {
      events.push_back({j, 1, t_from, t_hat});
      if (hook) {
        const SamplerEvent ev{SamplerEvent::Phase::BeforeNoise, event_index, j, 1, t_from, t_hat};
        hook(ev, states);
      }
    }
    // Churn noise, then the deterministic remainder of the step.
    if (gamma > 0.0) {
      const double add_sd = std::sqrt(t_hat * t_hat - t_from * t_from);
      for (int p = 0; p < k; ++p) {
        rng::Stream noise = streams(p, step_counter[static_cast<std::size_t>(p)]++);
        for (double& v : states[static_cast<std::size_t>(p)]) v += add_sd * noise.gaussian();
      }
    }
    if (resample_here) {
      if (hook) {
        const SamplerEvent ev{SamplerEvent::Phase::AfterNoise, event_index, j, 1, t_hat, t_hat};
        hook(ev, states);
      }
      ++event_index;
      ++next_resample;
    }
    rng::Stream unused(0);
    for (int p = 0; p < k; ++p) {
      states[static_cast<std::size_t>(p)] =
          edm_step(states[static_cast<std::size_t>(p)], t_hat, t_to, provider, c, 0.0, unused);
    }
  }
  return finish_run(std::move(states), cfg.t_min, provider, c, std::move(events));
}

}  // namespace pfd
