#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfd/correction.hpp"
#include "pfd/particle_filter.hpp"
#include "pfd/sampler.hpp"
#include "pfd/schedule.hpp"
#include "pfd/toyworld.hpp"

namespace pfd {

// Configuration problems carry the offending file/line so the CLI can point
// at them.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method {
  Plain,
  PfDiscriminator,
  PfHybrid,
  PfAnalytic,
  ObjectSelect,
  DSelect,
  DGuidance,
};

Method method_from_string(const std::string& name);
std::string to_string(Method method);

enum class UncondRatioSource { None, Analytic, Discriminator };

struct RunConfig {
  MixtureWorld::Params world;
  NoiseSchedule schedule;

  SamplerConfig sampler{RestartConfig::toy_default()};

  Method method = Method::Plain;
  int k_particles = 1;
  Placement placement = Placement::BeforeNoise;
  double pi = 0.5;
  double ratio_floor = 1e-6;
  double ess_trigger = 0.0;

  // kappa source: "estimate" or "load:<path>"
  bool kappa_estimate = true;
  std::string kappa_path;
  int kappa_runs = 200;

  UncondRatioSource uncond_ratio = UncondRatioSource::Analytic;
  std::string uncond_disc_path;
  std::string cond_disc_path;

  // d-select scoring: analytic or discriminator
  bool selection_analytic = true;
  // d-guidance: analytic or learned gradient
  bool guidance_analytic = true;
  double sigma_gate = 5.0;

  int n_conditions = 200;
  double mention_prob = 0.5;
  bool conditional = true;
  uint64_t seed = 0;
  std::string output_dir = "out";
  bool compare_with_plain = false;
  bool emit_plots = false;

  // Discriminator training (cmd_train_disc).
  std::string disc_which = "both";
  TrainOptions disc_train;
  std::string disc_out_conditional = "cond_disc.json";
  std::string disc_out_unconditional = "uncond_disc.json";

  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& text, const std::string& origin);

  // Dependency-closure validation; throws ConfigError before any compute.
  void validate() const;

  // Canonical serialization backing the config hash in reports.
  std::string canonical() const;
  uint64_t hash() const;
};

// Low-level section/key view of an INI-style file, with line tracking.
struct IniFile {
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::string origin;

  static IniFile parse(const std::string& text, const std::string& origin);
  const Entry* find(const std::string& section, const std::string& key) const;
  void check_all_used() const;  // unknown keys are config errors
};

std::vector<double> parse_double_list(const std::string& text);

}  // namespace pfd
