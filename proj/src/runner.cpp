#include "pfd/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "pfd/baselines.hpp"

namespace pfd {

namespace fs = std::filesystem;

namespace {

Condition draw_condition(const ExperimentSetup& setup, uint64_t cond_seed) {
  if (!setup.cfg.conditional) return Condition{};
  rng::Stream stream(rng::derive(cond_seed, {rng::kWorld}));
  return setup.prior.sample(setup.world.n_objects(), stream);
}

std::vector<double> placement_event_times(const SamplerConfig& sampler, Placement placement) {
  std::vector<double> times;
  for (const EventSchedule& ev : sampler.events()) {
    times.push_back(placement == Placement::BeforeNoise ? ev.t_low : ev.t_high);
  }
  times.push_back(sampler.t_min());  // terminal row
  return times;
}

// Plain runs with a recorder capturing f(x_t) at each placement event plus
// the terminal prediction.
std::vector<PlainRunRecord> plain_records(const RunConfig& cfg, const MixtureWorld& world,
                                          const ConditionPrior& prior, int n_runs, uint64_t root_seed) {
  AnalyticScoreProvider provider(world, Dist::Q);
  const SamplerEvent::Phase phase = cfg.placement == Placement::BeforeNoise
                                        ? SamplerEvent::Phase::BeforeNoise
                                        : SamplerEvent::Phase::AfterNoise;
  std::vector<PlainRunRecord> records;
  records.reserve(static_cast<std::size_t>(n_runs));
  for (int h = 0; h < n_runs; ++h) {
    const uint64_t run_seed = rng::derive(root_seed, {rng::kKappa, static_cast<uint64_t>(h)});
    rng::Stream cstream(rng::derive(run_seed, {rng::kWorld}));
    PlainRunRecord rec;
    rec.c = cfg.conditional ? prior.sample(world.n_objects(), cstream) : Condition{};

    rng::Stream init_stream(rng::derive(run_seed, {rng::kInit}));
    ParticleEnsemble init = pf_init(1, cfg.sampler.t_max(), provider.dim(), init_stream);
    StepStreamFn streams = [&](int particle, int step) {
      return rng::Stream(rng::derive(run_seed, {rng::kParticle, static_cast<uint64_t>(particle),
                                                rng::kStep, static_cast<uint64_t>(step)}));
    };
    EnsembleHook hook = [&](const SamplerEvent& ev, std::vector<Vec>& states) {
      if (ev.phase != phase) return;
      rec.f_at_events.push_back(provider.denoise(states[0], ev.t, rec.c));
    };
    RunResult run = cfg.sampler.is_restart()
                        ? restart_run(std::move(init.states), std::get<RestartConfig>(cfg.sampler.cfg),
                                      provider, rec.c, streams, hook)
                        : edm_run(std::move(init.states), std::get<EdmConfig>(cfg.sampler.cfg), provider,
                                  rec.c, streams, hook);
    rec.f_at_events.push_back(run.finals[0]);  // terminal row
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

KappaTable estimate_kappa_for(const RunConfig& cfg, const MixtureWorld& world, uint64_t seed) {
  ConditionPrior prior{cfg.mention_prob, !cfg.conditional};
  const std::vector<PlainRunRecord> records =
      plain_records(cfg, world, prior, cfg.kappa_runs, seed);
  return estimate_kappa(records, world, placement_event_times(cfg.sampler, cfg.placement),
                        to_string(cfg.placement));
}

ExperimentSetup ExperimentSetup::prepare(RunConfig cfg) {
  cfg.validate();
  ExperimentSetup setup(std::move(cfg));
  const uint64_t world_hash = setup.world.hash();

  auto load_disc = [&](const std::string& path, bool want_conditional) {
    DiscriminatorArtifact art = load_discriminator(path);
    if (art.world_hash != world_hash)
      throw ConfigError("discriminator artifact '" + path + "' was trained on a different world");
    if (art.discriminator.conditional() != want_conditional)
      throw ConfigError("discriminator artifact '" + path + "' has the wrong conditioning");
    return std::move(art.discriminator);
  };

  const Method m = setup.cfg.method;
  if (m == Method::PfDiscriminator || (m == Method::DSelect && !setup.cfg.selection_analytic) ||
      (m == Method::DGuidance && !setup.cfg.guidance_analytic)) {
    setup.cond_disc = load_disc(setup.cfg.cond_disc_path, setup.cfg.conditional);
  }
  if (m == Method::PfHybrid) {
    if (setup.cfg.uncond_ratio == UncondRatioSource::Discriminator) {
      setup.uncond_disc = load_disc(setup.cfg.uncond_disc_path, false);
    }
    if (setup.cfg.kappa_estimate) {
      setup.kappa = estimate_kappa_for(setup.cfg, setup.world, setup.cfg.seed);
    } else {
      KappaArtifact art = load_kappa(setup.cfg.kappa_path);
      if (art.world_hash != world_hash)
        throw ConfigError("kappa artifact '" + setup.cfg.kappa_path +
                          "' was estimated on a different world");
      const std::vector<double> expect =
          placement_event_times(setup.cfg.sampler, setup.cfg.placement);
      bool match = art.table.placement == to_string(setup.cfg.placement) &&
                   art.table.event_times.size() == expect.size();
      if (match) {
        for (std::size_t i = 0; i < expect.size(); ++i) {
          if (std::abs(art.table.event_times[i] - expect[i]) > 1e-9) match = false;
        }
      }
      if (!match)
        throw ConfigError("kappa artifact '" + setup.cfg.kappa_path +
                          "' does not match this run's resampling schedule; re-estimate it");
      setup.kappa = std::move(art.table);
    }
  }
  return setup;
}

namespace {

CorrectionEvaluator make_correction(const ExperimentSetup& setup, const ScoreProvider& provider,
                                    CorrectionMode mode) {
  CorrectionEvaluator::Deps deps;
  deps.world = &setup.world;
  deps.provider = &provider;
  deps.prior = &setup.prior;
  deps.hybrid.pi = setup.cfg.pi;
  deps.hybrid.ratio_floor = setup.cfg.ratio_floor;
  if (mode == CorrectionMode::Hybrid) {
    deps.kappa = &*setup.kappa;
    switch (setup.cfg.uncond_ratio) {
      case UncondRatioSource::Discriminator:
        deps.hybrid.use_unconditional_discriminator = true;
        deps.hybrid.analytic_oracle = false;
        deps.unconditional = &*setup.uncond_disc;
        break;
      case UncondRatioSource::Analytic:
        deps.hybrid.use_unconditional_discriminator = false;
        deps.hybrid.analytic_oracle = true;
        break;
      case UncondRatioSource::None:
        deps.hybrid.use_unconditional_discriminator = false;
        deps.hybrid.analytic_oracle = false;
        break;
    }
  } else {
    deps.hybrid.use_unconditional_discriminator = false;
  }
  if (mode == CorrectionMode::Discriminator) deps.conditional = &*setup.cond_disc;
  return CorrectionEvaluator(mode, deps);
}

}  // namespace

MethodOutputs run_method(const ExperimentSetup& setup) {
  const RunConfig& cfg = setup.cfg;
  AnalyticScoreProvider provider(setup.world, Dist::Q);
  provider.reset_nfe();

  std::optional<GuidedScoreProvider> guided;
  const ScoreProvider* active = &provider;
  if (cfg.method == Method::DGuidance) {
    CorrectionGradient grad = cfg.guidance_analytic
                                  ? analytic_correction_gradient(setup.world)
                                  : learned_correction_gradient(*setup.cond_disc);
    guided.emplace(provider, std::move(grad), cfg.sigma_gate);
    active = &*guided;
  }

  std::optional<CorrectionEvaluator> correction;
  switch (cfg.method) {
    case Method::PfAnalytic:
      correction.emplace(make_correction(setup, provider, CorrectionMode::Analytic));
      break;
    case Method::PfHybrid:
      correction.emplace(make_correction(setup, provider, CorrectionMode::Hybrid));
      break;
    case Method::PfDiscriminator:
      correction.emplace(make_correction(setup, provider, CorrectionMode::Discriminator));
      break;
    case Method::DSelect:
      correction.emplace(make_correction(setup, provider,
                                         cfg.selection_analytic ? CorrectionMode::Analytic
                                                                : CorrectionMode::Discriminator));
      break;
    default:
      break;
  }

  MethodOutputs out;
  out.event_times = placement_event_times(cfg.sampler, cfg.placement);
  const int n_events = static_cast<int>(out.event_times.size()) - 1;
  const int terminal_event = n_events;
  std::vector<double> ess_sum(static_cast<std::size_t>(n_events), 0.0);
  out.ess_min = static_cast<double>(cfg.k_particles);

  const bool is_pf = cfg.method == Method::PfAnalytic || cfg.method == Method::PfHybrid ||
                     cfg.method == Method::PfDiscriminator;

  PfConfig pf;
  pf.k_particles = cfg.k_particles;
  pf.placement = cfg.placement;
  pf.ess_trigger = cfg.ess_trigger;

  for (int i = 0; i < cfg.n_conditions; ++i) {
    const uint64_t cond_seed = rng::derive(cfg.seed, {rng::kCondition, static_cast<uint64_t>(i)});
    const Condition c = draw_condition(setup, cond_seed);

    PfRunResult run = is_pf ? pf_run(pf, cfg.sampler, *active, *correction, c, cond_seed)
                            : plain_run(cfg.k_particles, cfg.sampler, *active, c, cond_seed);

    int chosen = 0;
    if (is_pf) {
      chosen = static_cast<int>(std::max_element(run.final_phis.begin(), run.final_phis.end()) -
                                run.final_phis.begin());
    } else if (cfg.method == Method::ObjectSelect) {
      chosen = object_select(run.finals, c, setup.world).chosen_index;
    } else if (cfg.method == Method::DSelect) {
      chosen = d_select(run.finals, c, *correction, terminal_event).chosen_index;
    }

    std::vector<Vec> refs;
    refs.reserve(static_cast<std::size_t>(cfg.k_particles));
    for (int p = 0; p < cfg.k_particles; ++p) {
      rng::Stream ref_stream(rng::derive(cond_seed, {rng::kReference, static_cast<uint64_t>(p)}));
      refs.push_back(setup.world.sample(c, Dist::P, ref_stream));
    }

    for (const TraceRow& row : run.trace.rows) {
      if (row.particle == 0 && row.event >= 0 && row.event < n_events) {
        ess_sum[static_cast<std::size_t>(row.event)] += row.ess;
        out.ess_min = std::min(out.ess_min, row.ess);
      }
      out.trace.rows.push_back(row);
    }
    out.conditions.push_back(c);
    out.finals.push_back(std::move(run.finals));
    out.references.push_back(std::move(refs));
    out.selected.push_back(chosen);
    out.final_phis.push_back(std::move(run.final_phis));
  }

  if (is_pf && cfg.n_conditions > 0) {
    out.ess_event_mean.resize(ess_sum.size());
    for (std::size_t e = 0; e < ess_sum.size(); ++e)
      out.ess_event_mean[e] = ess_sum[e] / cfg.n_conditions;
  }
  out.nfe = provider.nfe();
  return out;
}

MethodMetrics compute_metrics(const ExperimentSetup& setup, const MethodOutputs& outputs) {
  MethodMetrics m;
  m.nfe = outputs.nfe;

  std::vector<Vec> pooled, pooled_ref, chosen, chosen_ref;
  std::vector<Condition> pooled_conds, chosen_conds;
  for (std::size_t i = 0; i < outputs.finals.size(); ++i) {
    for (std::size_t p = 0; p < outputs.finals[i].size(); ++p) {
      pooled.push_back(outputs.finals[i][p]);
      pooled_ref.push_back(outputs.references[i][p]);
      pooled_conds.push_back(outputs.conditions[i]);
    }
    chosen.push_back(outputs.finals[i][static_cast<std::size_t>(outputs.selected[i])]);
    chosen_ref.push_back(outputs.references[i][0]);
    chosen_conds.push_back(outputs.conditions[i]);
  }

  m.frechet_ensemble = frechet_distance(pooled, pooled_ref).value;
  m.frechet_selected = frechet_distance(chosen, chosen_ref).value;
  if (setup.cfg.conditional) {
    const OccurrenceReport ens = occurrence_rate(pooled, pooled_conds, setup.world);
    const OccurrenceReport sel = occurrence_rate(chosen, chosen_conds, setup.world);
    m.occurrence_ensemble = ens.mean;
    m.occurrence_selected = sel.mean;
    m.per_object_occurrence = sel.per_object;
  }
  return m;
}

MethodMetrics evaluate_method(RunConfig cfg) {
  const ExperimentSetup setup = ExperimentSetup::prepare(std::move(cfg));
  const MethodOutputs outputs = run_method(setup);
  return compute_metrics(setup, outputs);
}

std::string resolve_output_dir(const std::string& configured) {
  fs::path p(configured);
  if (p.is_absolute()) return p.string();
  if (const char* root = std::getenv("PFD_OUTPUT_ROOT")) return (fs::path(root) / p).string();
  return p.string();
}

namespace {

void write_samples_csv(const fs::path& path, const MethodOutputs& outputs) {
  std::ofstream out(path);
  out << "condition,particle,selected";
  const std::size_t dim = outputs.finals.front().front().size();
  for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < outputs.finals.size(); ++i) {
    for (std::size_t p = 0; p < outputs.finals[i].size(); ++p) {
      out << i << ',' << p << ',' << (static_cast<int>(p) == outputs.selected[i] ? 1 : 0);
      for (double v : outputs.finals[i][p]) out << ',' << v;
      out << '\n';
    }
  }
}

void write_refs_csv(const fs::path& path, const MethodOutputs& outputs) {
  std::ofstream out(path);
  out << "condition,particle";
  const std::size_t dim = outputs.references.front().front().size();
  for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < outputs.references.size(); ++i) {
    for (std::size_t p = 0; p < outputs.references[i].size(); ++p) {
      out << i << ',' << p;
      for (double v : outputs.references[i][p]) out << ',' << v;
      out << '\n';
    }
  }
}

void write_conditions_csv(const fs::path& path, const MethodOutputs& outputs, int n_objects) {
  std::ofstream out(path);
  out << "condition,mask\n";
  for (std::size_t i = 0; i < outputs.conditions.size(); ++i) {
    out << i << ',' << outputs.conditions[i].mask_string(n_objects) << '\n';
  }
}

nlohmann::json metrics_json(const MethodMetrics& m, bool conditional) {
  nlohmann::json j;
  j["frechet_ensemble"] = m.frechet_ensemble;
  j["frechet_selected"] = m.frechet_selected;
  j["nfe"] = m.nfe;
  if (conditional) {
    j["occurrence_ensemble"] = m.occurrence_ensemble;
    j["occurrence_selected"] = m.occurrence_selected;
    j["per_object_occurrence"] = m.per_object_occurrence;
  }
  return j;
}

void emit_plot_files(const fs::path& dir, const std::vector<std::pair<std::string, MethodMetrics>>& rows) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "occurrence_vs_frechet.csv");
    csv << "method,occurrence,frechet\n";
    for (const auto& [name, m] : rows)
      csv << name << ',' << m.occurrence_selected << ',' << m.frechet_selected << '\n';
  }
  std::ofstream gp(dir / "occurrence_vs_frechet.gp");
  gp << "set datafile separator ','\n"
     << "set xlabel 'object occurrence'\n"
     << "set ylabel 'Frechet score'\n"
     << "set key outside\n"
     << "set term pngcairo size 800,600\n"
     << "set output 'occurrence_vs_frechet.png'\n"
     << "plot 'occurrence_vs_frechet.csv' using 2:3:1 skip 1 with labels point pt 7 offset char 1,1 notitle\n";
}

}  // namespace

int cmd_run(const std::string& config_path, const CliOverrides& overrides) {
  RunConfig cfg = RunConfig::load(config_path);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;

  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSetup setup = ExperimentSetup::prepare(cfg);
  const MethodOutputs outputs = run_method(setup);
  const MethodMetrics metrics = compute_metrics(setup, outputs);

  const fs::path dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);

  nlohmann::json report;
  report["method"] = to_string(cfg.method);
  report["seed"] = cfg.seed;
  report["config_hash"] = cfg.hash();
  report["world_hash"] = setup.world.hash();
  report["k_particles"] = cfg.k_particles;
  report["n_conditions"] = cfg.n_conditions;
  report["sampler"] = cfg.sampler.is_restart() ? "restart" : "edm";
  report["placement"] = to_string(cfg.placement);
  report["event_times"] = outputs.event_times;
  report["metrics"] = metrics_json(metrics, cfg.conditional);
  if (!outputs.ess_event_mean.empty()) {
    report["ess"] = {{"per_event_mean", outputs.ess_event_mean}, {"min", outputs.ess_min}};
  }
  if (setup.kappa) {
    report["kappa"] = {{"h_runs", setup.kappa->h_runs},
                       {"defaulted_cells", setup.kappa->defaulted_cells.size()}};
  }

  std::vector<std::pair<std::string, MethodMetrics>> plot_rows{{to_string(cfg.method), metrics}};
  if (cfg.compare_with_plain && cfg.method != Method::Plain) {
    RunConfig plain_cfg = cfg;
    plain_cfg.method = Method::Plain;
    const MethodMetrics plain_metrics = evaluate_method(plain_cfg);
    nlohmann::json cmp;
    cmp["plain"] = metrics_json(plain_metrics, cfg.conditional);
    cmp["frechet_ensemble_delta"] = metrics.frechet_ensemble - plain_metrics.frechet_ensemble;
    cmp["frechet_ensemble_ratio"] =
        plain_metrics.frechet_ensemble > 0.0 ? metrics.frechet_ensemble / plain_metrics.frechet_ensemble
                                             : 0.0;
    if (cfg.conditional)
      cmp["occurrence_selected_delta"] = metrics.occurrence_selected - plain_metrics.occurrence_selected;
    report["comparison"] = cmp;
    plot_rows.emplace_back("plain", plain_metrics);
  }

  const auto t1 = std::chrono::steady_clock::now();
  report["timing"] = {
      {"wall_ms", std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()}};

  {
    std::ofstream out(dir / "report.json");
    out << report.dump(2) << "\n";
  }
  write_samples_csv(dir / "samples.csv", outputs);
  write_refs_csv(dir / "ref_samples.csv", outputs);
  write_conditions_csv(dir / "conditions.csv", outputs, setup.world.n_objects());
  save_world((dir / "world.json").string(), setup.cfg.world);
  if (!outputs.trace.rows.empty()) {
    std::ofstream trace(dir / "trace.csv");
    trace.precision(17);
    outputs.trace.write_csv(trace);
  }
  if (cfg.emit_plots) emit_plot_files(dir / "plots", plot_rows);

  std::cout << "run complete: " << to_string(cfg.method) << " seed=" << cfg.seed << "\n"
            << "  frechet (ensemble)  " << metrics.frechet_ensemble << "\n"
            << "  frechet (selected)  " << metrics.frechet_selected << "\n";
  if (cfg.conditional) {
    std::cout << "  occurrence (ensemble) " << metrics.occurrence_ensemble << "\n"
              << "  occurrence (selected) " << metrics.occurrence_selected << "\n";
  }
  std::cout << "  nfe " << metrics.nfe << "\n  report " << (dir / "report.json").string() << std::endl;
  return kExitOk;
}

int cmd_kappa(const std::string& config_path, const CliOverrides& overrides) {
  RunConfig cfg = RunConfig::load(config_path);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  if (cfg.kappa_runs < 50) throw ConfigError("kappa estimation requires kappa_runs >= 50");

  const MixtureWorld world(cfg.world);
  const KappaTable table = estimate_kappa_for(cfg, world, cfg.seed);
  const fs::path dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);
  const fs::path path = dir / "kappa.json";
  save_kappa(path.string(), table, world.hash(), cfg.seed);
  std::cout << "kappa table (" << table.h_runs << " runs, " << table.n_events()
            << " rows) written to " << path.string() << std::endl;
  if (!table.defaulted_cells.empty()) {
    std::cout << "warning: " << table.defaulted_cells.size()
              << " cells had no mentions and use kappa_default=" << table.kappa_default << std::endl;
  }
  return kExitOk;
}

int cmd_train_disc(const std::string& config_path, const CliOverrides& overrides) {
  RunConfig cfg = RunConfig::load(config_path);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;

  const MixtureWorld world(cfg.world);
  const ConditionPrior prior{cfg.mention_prob, !cfg.conditional};
  const fs::path dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);

  auto train_one = [&](bool conditional, const std::string& filename) {
    ExampleSampler real = [&](rng::Stream& s) {
      const Condition c = prior.sample(world.n_objects(), s);
      return std::make_pair(world.sample(c, Dist::P, s), c);
    };
    ExampleSampler fake = [&](rng::Stream& s) {
      const Condition c = prior.sample(world.n_objects(), s);
      return std::make_pair(world.sample(c, Dist::Q, s), c);
    };
    rng::Stream stream(rng::derive(cfg.seed, {rng::kTraining, conditional ? 1ull : 0ull}));
    const TrainResult result = train_discriminator(real, fake, cfg.schedule, conditional,
                                                   world.n_objects(), cfg.disc_train, stream);
    const fs::path path = dir / filename;
    save_discriminator(path.string(), result, world.hash(), cfg.seed);
    std::cout << (conditional ? "conditional" : "unconditional") << " discriminator: train loss "
              << result.final_train_loss << ", held-out loss " << result.heldout_loss << ", held-out acc "
              << result.heldout_accuracy << " -> " << path.string() << std::endl;
  };

  if (cfg.disc_which == "conditional" || cfg.disc_which == "both")
    train_one(true, cfg.disc_out_conditional);
  if (cfg.disc_which == "unconditional" || cfg.disc_which == "both")
    train_one(false, cfg.disc_out_unconditional);
  if (cfg.disc_which != "conditional" && cfg.disc_which != "unconditional" && cfg.disc_which != "both")
    throw ConfigError("discriminator.which must be conditional, unconditional or both");
  return kExitOk;
}

int cmd_metrics(const std::string& run_dir) {
  const fs::path dir(run_dir);
  auto read_csv = [](const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      rows.push_back(std::move(cells));
    }
    return rows;
  };

  const auto conds_rows = read_csv(dir / "conditions.csv");
  std::vector<Condition> conditions;
  int n_objects = 0;
  for (std::size_t r = 1; r < conds_rows.size(); ++r) {
    conditions.push_back(Condition::from_mask_string(conds_rows[r].at(1)));
    n_objects = static_cast<int>(conds_rows[r].at(1).size());
  }

  auto parse_points = [](const std::vector<std::vector<std::string>>& rows, std::size_t skip_cols) {
    std::vector<Vec> points;
    std::vector<int> cond_idx;
    std::vector<int> flags;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      Vec x;
      for (std::size_t cidx = skip_cols; cidx < rows[r].size(); ++cidx)
        x.push_back(std::stod(rows[r][cidx]));
      points.push_back(std::move(x));
      cond_idx.push_back(std::stoi(rows[r][0]));
      flags.push_back(skip_cols >= 3 ? std::stoi(rows[r][2]) : 0);
    }
    return std::tuple{points, cond_idx, flags};
  };

  const auto [samples, sample_cond, selected_flags] = parse_points(read_csv(dir / "samples.csv"), 3);
  const auto [refs, ref_cond, ref_flags] = parse_points(read_csv(dir / "ref_samples.csv"), 2);
  (void)ref_flags;

  std::vector<Condition> sample_conds, chosen_conds;
  std::vector<Vec> chosen, chosen_ref;
  for (std::size_t i = 0; i < samples.size(); ++i)
    sample_conds.push_back(conditions.at(static_cast<std::size_t>(sample_cond[i])));
  std::map<int, Vec> first_ref;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!first_ref.count(ref_cond[i])) first_ref[ref_cond[i]] = refs[i];
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (selected_flags[i]) {
      chosen.push_back(samples[i]);
      chosen_ref.push_back(first_ref.at(sample_cond[i]));
      chosen_conds.push_back(sample_conds[i]);
    }
  }

  nlohmann::json j;
  j["frechet_ensemble"] = frechet_distance(samples, refs).value;
  j["frechet_selected"] = frechet_distance(chosen, chosen_ref).value;
  bool any_mentions = false;
  for (const Condition& c : conditions) any_mentions |= !c.empty();
  if (any_mentions) {
    const MixtureWorld detector(load_world((dir / "world.json").string()));
    if (detector.n_objects() != n_objects)
      throw std::runtime_error("stored world does not match the condition masks");
    j["occurrence_ensemble"] = occurrence_rate(samples, sample_conds, detector).mean;
    j["occurrence_selected"] = occurrence_rate(chosen, chosen_conds, detector).mean;
  }
  std::ofstream out(dir / "metrics.json");
  out << j.dump(2) << "\n";
  std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

}  // namespace pfd
