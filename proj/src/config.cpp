#include "pfd/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

namespace pfd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream out;
  out << origin << ":" << line << ": " << msg;
  throw ConfigError(out.str());
}

double to_double(const IniFile::Entry& e, const std::string& origin) {
  try {
    if (trim(e.value) == "inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (trim(e.value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  fail(origin, e.line, "expected a number, got '" + e.value + "'");
}

int to_int(const IniFile::Entry& e, const std::string& origin) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(e.value, &used);
    if (trim(e.value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  fail(origin, e.line, "expected an integer, got '" + e.value + "'");
}

bool to_bool(const IniFile::Entry& e, const std::string& origin) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(origin, e.line, "expected a boolean, got '" + e.value + "'");
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw std::invalid_argument("empty entry in number list");
    out.push_back(std::stod(t));
  }
  return out;
}

IniFile IniFile::parse(const std::string& text, const std::string& origin) {
  IniFile ini;
  ini.origin = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(origin, line_no, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail(origin, line_no, "empty section name");
      ini.sections[section];
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    if (section.empty()) fail(origin, line_no, "key outside any [section]");
    auto [it, inserted] = ini.sections[section].emplace(key, Entry{value, line_no, false});
    if (!inserted) fail(origin, line_no, "duplicate key '" + key + "' in [" + section + "]");
  }
  return ini;
}

const IniFile::Entry* IniFile::find(const std::string& section, const std::string& key) const {
  const auto sec = sections.find(section);
  if (sec == sections.end()) return nullptr;
  const auto it = sec->second.find(key);
  if (it == sec->second.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void IniFile::check_all_used() const {
  for (const auto& [section, entries] : sections) {
    for (const auto& [key, entry] : entries) {
      if (!entry.used)
        fail(origin, entry.line, "unknown key '" + key + "' in [" + section + "]");
    }
  }
}

Method method_from_string(const std::string& name) {
  if (name == "plain") return Method::Plain;
  if (name == "pf-discriminator") return Method::PfDiscriminator;
  if (name == "pf-hybrid") return Method::PfHybrid;
  if (name == "pf-analytic") return Method::PfAnalytic;
  if (name == "object-select") return Method::ObjectSelect;
  if (name == "d-select") return Method::DSelect;
  if (name == "d-guidance") return Method::DGuidance;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Plain: return "plain";
    case Method::PfDiscriminator: return "pf-discriminator";
    case Method::PfHybrid: return "pf-hybrid";
    case Method::PfAnalytic: return "pf-analytic";
    case Method::ObjectSelect: return "object-select";
    case Method::DSelect: return "d-select";
    case Method::DGuidance: return "d-guidance";
  }
  return "?";
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  const IniFile ini = IniFile::parse(text, origin);
  RunConfig cfg;

  // [world]
  if (const auto* e = ini.find("world", "n_objects")) cfg.world.n_objects = to_int(*e, origin);
  if (const auto* e = ini.find("world", "mu_present")) {
    const auto v = parse_double_list(e->value);
    if (v.size() != 2) fail(origin, e->line, "mu_present needs two coordinates");
    cfg.world.slot.mu_present = {v[0], v[1]};
  }
  if (const auto* e = ini.find("world", "mu_absent")) {
    const auto v = parse_double_list(e->value);
    if (v.size() != 2) fail(origin, e->line, "mu_absent needs two coordinates");
    cfg.world.slot.mu_absent = {v[0], v[1]};
  }
  if (const auto* e = ini.find("world", "var_present")) cfg.world.slot.var_present = to_double(*e, origin);
  if (const auto* e = ini.find("world", "var_absent")) cfg.world.slot.var_absent = to_double(*e, origin);
  if (const auto* e = ini.find("world", "miss_rate")) {
    try {
      cfg.world.miss_rate = parse_double_list(e->value);
    } catch (const std::exception& ex) {
      fail(origin, e->line, ex.what());
    }
  }
  if (const auto* e = ini.find("world", "quality_inflation")) cfg.world.quality_inflation = to_double(*e, origin);

  // [schedule]
  if (const auto* e = ini.find("schedule", "kind")) {
    const std::string v = trim(e->value);
    if (v == "ve") {
      cfg.schedule = NoiseSchedule::ve();
    } else if (v == "vp") {
      cfg.schedule.kind = ScheduleKind::VariancePreserving;
    } else {
      fail(origin, e->line, "schedule kind must be 've' or 'vp'");
    }
  }
  if (const auto* e = ini.find("schedule", "beta_min")) cfg.schedule.beta_min = to_double(*e, origin);
  if (const auto* e = ini.find("schedule", "beta_max")) cfg.schedule.beta_max = to_double(*e, origin);

  // [sampler]
  std::string sampler_kind = "restart";
  if (const auto* e = ini.find("sampler", "kind")) sampler_kind = trim(e->value);
  double t_min = 1e-3, t_max = 10.0;
  if (const auto* e = ini.find("sampler", "t_min")) t_min = to_double(*e, origin);
  if (const auto* e = ini.find("sampler", "t_max")) t_max = to_double(*e, origin);
  if (sampler_kind == "restart") {
    RestartConfig rc = RestartConfig::toy_default();
    if (const auto* e = ini.find("sampler", "restart")) {
      try {
        rc = RestartConfig::parse(e->value);
      } catch (const std::exception& ex) {
        fail(origin, e->line, ex.what());
      }
    }
    rc.t_min = t_min;
    rc.t_max = t_max;
    cfg.sampler.cfg = rc;
    if (const auto* e = ini.find("sampler", "edm"))
      fail(origin, e->line, "edm steps given but sampler kind is restart");
  } else if (sampler_kind == "edm") {
    EdmConfig ec;
    if (const auto* e = ini.find("sampler", "edm")) {
      try {
        ec = EdmConfig::parse(e->value);
      } catch (const std::exception& ex) {
        fail(origin, e->line, ex.what());
      }
    }
    ec.t_min = t_min;
    ec.t_max = t_max;
    if (const auto* e = ini.find("sampler", "s_churn")) ec.s_churn = to_double(*e, origin);
    if (const auto* e = ini.find("sampler", "s_min")) ec.s_min = to_double(*e, origin);
    if (const auto* e = ini.find("sampler", "s_max")) ec.s_max = to_double(*e, origin);
    cfg.sampler.cfg = ec;
    if (const auto* e = ini.find("sampler", "restart"))
      fail(origin, e->line, "restart intervals given but sampler kind is edm");
  } else {
    fail(origin, 0, "sampler kind must be 'restart' or 'edm'");
  }

  // [method]
  if (const auto* e = ini.find("method", "name")) {
    try {
      cfg.method = method_from_string(trim(e->value));
    } catch (const std::exception& ex) {
      fail(origin, e->line, ex.what());
    }
  }
  if (const auto* e = ini.find("method", "k_particles")) cfg.k_particles = to_int(*e, origin);
  if (const auto* e = ini.find("method", "placement")) {
    try {
      cfg.placement = placement_from_string(trim(e->value));
    } catch (const std::exception& ex) {
      fail(origin, e->line, ex.what());
    }
  }
  if (const auto* e = ini.find("method", "pi")) cfg.pi = to_double(*e, origin);
  if (const auto* e = ini.find("method", "ratio_floor")) cfg.ratio_floor = to_double(*e, origin);
  if (const auto* e = ini.find("method", "ess_trigger")) cfg.ess_trigger = to_double(*e, origin);
  if (const auto* e = ini.find("method", "kappa")) {
    const std::string v = trim(e->value);
    if (v == "estimate") {
      cfg.kappa_estimate = true;
    } else if (v.rfind("load:", 0) == 0) {
      cfg.kappa_estimate = false;
      cfg.kappa_path = trim(v.substr(5));
      if (cfg.kappa_path.empty()) fail(origin, e->line, "kappa load path is empty");
    } else {
      fail(origin, e->line, "kappa must be 'estimate' or 'load:<path>'");
    }
  }
  if (const auto* e = ini.find("method", "kappa_runs")) cfg.kappa_runs = to_int(*e, origin);
  if (const auto* e = ini.find("method", "uncond_ratio")) {
    const std::string v = trim(e->value);
    if (v == "analytic") {
      cfg.uncond_ratio = UncondRatioSource::Analytic;
    } else if (v == "none") {
      cfg.uncond_ratio = UncondRatioSource::None;
    } else if (v.rfind("discriminator:", 0) == 0) {
      cfg.uncond_ratio = UncondRatioSource::Discriminator;
      cfg.uncond_disc_path = trim(v.substr(14));
      if (cfg.uncond_disc_path.empty()) fail(origin, e->line, "unconditional discriminator path is empty");
    } else {
      fail(origin, e->line, "uncond_ratio must be 'analytic', 'none' or 'discriminator:<path>'");
    }
  }
  if (const auto* e = ini.find("method", "cond_disc")) cfg.cond_disc_path = trim(e->value);
  if (const auto* e = ini.find("method", "selection_correction")) {
    const std::string v = trim(e->value);
    if (v == "analytic") {
      cfg.selection_analytic = true;
    } else if (v == "discriminator") {
      cfg.selection_analytic = false;
    } else {
      fail(origin, e->line, "selection_correction must be 'analytic' or 'discriminator'");
    }
  }
  if (const auto* e = ini.find("method", "guidance_mode")) {
    const std::string v = trim(e->value);
    if (v == "analytic") {
      cfg.guidance_analytic = true;
    } else if (v == "learned") {
      cfg.guidance_analytic = false;
    } else {
      fail(origin, e->line, "guidance_mode must be 'analytic' or 'learned'");
    }
  }
  if (const auto* e = ini.find("method", "sigma_gate")) cfg.sigma_gate = to_double(*e, origin);

  // [run]
  if (const auto* e = ini.find("run", "n_conditions")) cfg.n_conditions = to_int(*e, origin);
  if (const auto* e = ini.find("run", "mention_prob")) cfg.mention_prob = to_double(*e, origin);
  if (const auto* e = ini.find("run", "conditional")) cfg.conditional = to_bool(*e, origin);
  if (const auto* e = ini.find("run", "seed")) cfg.seed = static_cast<uint64_t>(std::stoull(e->value));
  if (const auto* e = ini.find("run", "output_dir")) cfg.output_dir = trim(e->value);
  if (const auto* e = ini.find("run", "compare_with_plain")) cfg.compare_with_plain = to_bool(*e, origin);
  if (const auto* e = ini.find("run", "emit_plots")) cfg.emit_plots = to_bool(*e, origin);

  // [discriminator]
  if (const auto* e = ini.find("discriminator", "which")) cfg.disc_which = trim(e->value);
  if (const auto* e = ini.find("discriminator", "n_samples")) cfg.disc_train.n_samples = to_int(*e, origin);
  if (const auto* e = ini.find("discriminator", "epochs")) cfg.disc_train.epochs = to_int(*e, origin);
  if (const auto* e = ini.find("discriminator", "batch_size")) cfg.disc_train.batch_size = to_int(*e, origin);
  if (const auto* e = ini.find("discriminator", "learning_rate"))
    cfg.disc_train.learning_rate = to_double(*e, origin);
  if (const auto* e = ini.find("discriminator", "out_conditional")) cfg.disc_out_conditional = trim(e->value);
  if (const auto* e = ini.find("discriminator", "out_unconditional"))
    cfg.disc_out_unconditional = trim(e->value);

  ini.check_all_used();
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  MixtureWorld world_check(world);  // throws on bad world parameters
  (void)world_check;
  if (schedule.kind == ScheduleKind::VariancePreserving)
    throw ConfigError("sampling runs operate on the variance-exploding schedule; kind=vp is only "
                      "available for schedule inspection");
  if (k_particles < 1) throw ConfigError("k_particles must be >= 1");
  if (n_conditions < 1) throw ConfigError("n_conditions must be >= 1");
  if (!(mention_prob > 0.0 && mention_prob < 1.0)) throw ConfigError("mention_prob must lie in (0,1)");
  if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0,1)");
  if (!(ratio_floor > 0.0 && ratio_floor <= 1e-3)) throw ConfigError("ratio_floor must lie in (0, 1e-3]");
  if (sampler.is_restart()) {
    std::get<RestartConfig>(sampler.cfg).validate();
  } else {
    std::get<EdmConfig>(sampler.cfg).validate();
  }

  // Method dependency closure.
  switch (method) {
    case Method::PfDiscriminator:
      if (cond_disc_path.empty())
        throw ConfigError("method pf-discriminator requires cond_disc = <artifact path>");
      break;
    case Method::PfHybrid:
      if (uncond_ratio == UncondRatioSource::Discriminator && uncond_disc_path.empty())
        throw ConfigError("pf-hybrid with a trained quality term requires discriminator:<path>");
      if (!kappa_estimate && kappa_path.empty())
        throw ConfigError("pf-hybrid with kappa=load requires a path");
      if (kappa_estimate && kappa_runs < 50)
        throw ConfigError("kappa estimation requires kappa_runs >= 50");
      break;
    case Method::DSelect:
      if (!selection_analytic && cond_disc_path.empty())
        throw ConfigError("d-select with discriminator scoring requires cond_disc = <artifact path>");
      break;
    case Method::DGuidance:
      if (!guidance_analytic && cond_disc_path.empty())
        throw ConfigError("d-guidance with a learned gradient requires cond_disc = <artifact path>");
      break;
    default:
      break;
  }
  if (!conditional &&
      (method == Method::PfHybrid || method == Method::ObjectSelect))
    throw ConfigError("unconditional mode supports plain, pf-discriminator, pf-analytic, d-select "
                      "and d-guidance only");
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "world:" << world.n_objects << ',' << world.slot.mu_present[0] << ',' << world.slot.mu_present[1]
      << ',' << world.slot.mu_absent[0] << ',' << world.slot.mu_absent[1] << ',' << world.slot.var_present
      << ',' << world.slot.var_absent << ",[";
  for (double r : world.miss_rate) out << r << ';';
  out << "]," << world.quality_inflation << '\n';
  out << "schedule:" << (schedule.kind == ScheduleKind::VarianceExploding ? "ve" : "vp") << ','
      << schedule.beta_min << ',' << schedule.beta_max << '\n';
  if (sampler.is_restart()) {
    const auto& rc = std::get<RestartConfig>(sampler.cfg);
    out << "sampler:restart," << rc.format() << ",t:" << rc.t_min << ',' << rc.t_max << '\n';
  } else {
    const auto& ec = std::get<EdmConfig>(sampler.cfg);
    out << "sampler:edm," << ec.format() << ",t:" << ec.t_min << ',' << ec.t_max << ",churn:" << ec.s_churn
        << ',' << ec.s_min << ',' << ec.s_max << '\n';
  }
  out << "method:" << to_string(method) << ",k:" << k_particles << ',' << to_string(placement)
      << ",pi:" << pi << ",eps:" << ratio_floor << ",ess:" << ess_trigger
      << ",kappa:" << (kappa_estimate ? "estimate" : kappa_path) << ',' << kappa_runs << '\n';
  out << "run:" << n_conditions << ',' << mention_prob << ',' << (conditional ? 1 : 0) << ",seed:" << seed
      << '\n';
  return out.str();
}

uint64_t RunConfig::hash() const {
  const std::string s = canonical();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pfd
