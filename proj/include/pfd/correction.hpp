#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfd/discriminator.hpp"
#include "pfd/sampler.hpp"
#include "pfd/toyworld.hpp"

namespace pfd {

// Eq-8 likelihood ratio d/(1-d) with saturation guarding.
double ratio_from_discriminator(double d_value, double floor_eps);

// Occurrence statistics from an initial, filter-free generation round:
// kappa[event][object] is the fraction of runs mentioning the object whose
// denoised prediction at that event was detected. The last row is the
// terminal time so phi_0-style selection has an entry too.
struct KappaTable {
  int n_objects = 0;
  int h_runs = 0;
  std::vector<double> event_times;  // one per resampling event, + terminal
  std::string placement;            // "before-noise" or "after-noise"
  std::vector<std::vector<double>> values;       // [event][object]
  std::vector<std::vector<int>> hit_counts;      // [event][object]
  std::vector<int> mention_counts;               // [object]
  double kappa_default = 0.5;
  std::vector<std::pair<int, int>> defaulted_cells;  // (event, object), flagged

  int n_events() const { return static_cast<int>(event_times.size()); }
  double at(int event_index, int object) const;
};

// One filter-free trajectory: its condition plus the denoised prediction
// f(x_t) captured at every resampling event and at the terminal time.
struct PlainRunRecord {
  Condition c;
  std::vector<Vec> f_at_events;
};

KappaTable estimate_kappa(const std::vector<PlainRunRecord>& runs, const MixtureWorld& detector,
                          const std::vector<double>& event_times, const std::string& placement,
                          double threshold = 0.5, double kappa_default = 0.5);

struct HybridConfig {
  double pi = 0.5;
  double ratio_floor = 1e-6;
  bool use_unconditional_discriminator = true;
  bool analytic_oracle = false;  // exact unconditional ratio instead of a trained one

  void validate() const;
};

// p(O_Ci=1 | X_t): detector on the one-step clean prediction.
double mention_numerator(const Vec& x_t, double sigma, const Condition& c, int i,
                         const ScoreProvider& provider, const MixtureWorld& detector);

// q(O_Ci=1 | X_t): numerator plus the missed-object escape mass governed by
// kappa and the mention prior pi.
double mention_denominator(const Vec& x_t, double sigma, const Condition& c, int i,
                           const ScoreProvider& provider, const MixtureWorld& detector,
                           double kappa, double pi);

enum class CorrectionMode { Discriminator, Hybrid, Analytic };

CorrectionMode correction_mode_from_string(const std::string& name);
std::string to_string(CorrectionMode mode);

// Dispatch for CalcCorrection: given a particle state at noise level sigma,
// produce the multiplicative correction phi, clamped to [eps, 1/eps].
class CorrectionEvaluator {
 public:
  struct Deps {
    const MixtureWorld* world = nullptr;          // analytic mode + detector
    const ScoreProvider* provider = nullptr;      // hybrid mode (for f(X_t))
    const Discriminator* conditional = nullptr;   // discriminator mode
    const Discriminator* unconditional = nullptr; // hybrid quality term
    const KappaTable* kappa = nullptr;            // hybrid mention term
    const ConditionPrior* prior = nullptr;        // analytic unconditional ratio
    HybridConfig hybrid;
  };

  CorrectionEvaluator(CorrectionMode mode, Deps deps);

  // event_index indexes the kappa table; pass the table's terminal row (or
  // any valid row when no kappa is involved) for phi_0-style evaluation.
  double phi(const Vec& x_t, double sigma, const Condition& c, int event_index) const;

  CorrectionMode mode() const { return mode_; }
  double clamp_eps() const { return deps_.hybrid.ratio_floor; }

 private:
  CorrectionMode mode_;
  Deps deps_;
};

}  // namespace pfd
