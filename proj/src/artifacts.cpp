#include "pfd/artifacts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pfd {

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open artifact: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write artifact: " + path);
  out << text;
}

}  // namespace

void save_discriminator(const std::string& path, const TrainResult& result, uint64_t world_hash,
                        uint64_t seed) {
  nlohmann::json j;
  j["kind"] = "discriminator";
  j["conditional"] = result.discriminator.conditional();
  j["n_objects"] = result.discriminator.features().n_objects();
  j["weights"] = result.discriminator.weights();
  j["bias"] = result.discriminator.bias();
  j["world_hash"] = world_hash;
  j["seed"] = seed;
  j["final_train_loss"] = result.final_train_loss;
  j["heldout_loss"] = result.heldout_loss;
  j["heldout_accuracy"] = result.heldout_accuracy;
  write_text(path, j.dump(2) + "\n");
}

DiscriminatorArtifact load_discriminator(const std::string& path) {
  const nlohmann::json j = read_json(path);
  if (j.value("kind", "") != "discriminator")
    throw std::runtime_error("artifact is not a discriminator: " + path);
  const bool conditional = j.at("conditional").get<bool>();
  const int n_objects = j.at("n_objects").get<int>();
  DiscFeatureMap fmap(n_objects, conditional);
  DiscriminatorArtifact artifact{
      Discriminator(fmap, j.at("weights").get<Vec>(), j.at("bias").get<double>()),
      j.at("world_hash").get<uint64_t>(),
      j.at("seed").get<uint64_t>(),
      j.at("final_train_loss").get<double>(),
      j.at("heldout_loss").get<double>(),
      j.at("heldout_accuracy").get<double>(),
  };
  return artifact;
}

void save_kappa(const std::string& path, const KappaTable& table, uint64_t world_hash, uint64_t seed) {
  nlohmann::json j;
  j["kind"] = "kappa";
  j["n_objects"] = table.n_objects;
  j["h_runs"] = table.h_runs;
  j["event_times"] = table.event_times;
  j["placement"] = table.placement;
  j["values"] = table.values;
  j["hit_counts"] = table.hit_counts;
  j["mention_counts"] = table.mention_counts;
  j["kappa_default"] = table.kappa_default;
  j["defaulted_cells"] = table.defaulted_cells;
  j["world_hash"] = world_hash;
  j["seed"] = seed;
  write_text(path, j.dump(2) + "\n");
}

void save_world(const std::string& path, const MixtureWorld::Params& params) {
  nlohmann::json j;
  j["kind"] = "world";
  j["n_objects"] = params.n_objects;
  j["mu_present"] = params.slot.mu_present;
  j["mu_absent"] = params.slot.mu_absent;
  j["var_present"] = params.slot.var_present;
  j["var_absent"] = params.slot.var_absent;
  j["miss_rate"] = params.miss_rate;
  j["quality_inflation"] = params.quality_inflation;
  write_text(path, j.dump(2) + "\n");
}

MixtureWorld::Params load_world(const std::string& path) {
  const nlohmann::json j = read_json(path);
  if (j.value("kind", "") != "world") throw std::runtime_error("artifact is not a world: " + path);
  MixtureWorld::Params params;
  params.n_objects = j.at("n_objects").get<int>();
  params.slot.mu_present = j.at("mu_present").get<std::array<double, 2>>();
  params.slot.mu_absent = j.at("mu_absent").get<std::array<double, 2>>();
  params.slot.var_present = j.at("var_present").get<double>();
  params.slot.var_absent = j.at("var_absent").get<double>();
  params.miss_rate = j.at("miss_rate").get<std::vector<double>>();
  params.quality_inflation = j.at("quality_inflation").get<double>();
  return params;
}

KappaArtifact load_kappa(const std::string& path) {
  const nlohmann::json j = read_json(path);
  if (j.value("kind", "") != "kappa") throw std::runtime_error("artifact is not a kappa table: " + path);
  KappaArtifact artifact;
  artifact.table.n_objects = j.at("n_objects").get<int>();
  artifact.table.h_runs = j.at("h_runs").get<int>();
  artifact.table.event_times = j.at("event_times").get<std::vector<double>>();
  artifact.table.placement = j.at("placement").get<std::string>();
  artifact.table.values = j.at("values").get<std::vector<std::vector<double>>>();
  artifact.table.hit_counts = j.at("hit_counts").get<std::vector<std::vector<int>>>();
  artifact.table.mention_counts = j.at("mention_counts").get<std::vector<int>>();
  artifact.table.kappa_default = j.at("kappa_default").get<double>();
  artifact.table.defaulted_cells = j.at("defaulted_cells").get<std::vector<std::pair<int, int>>>();
  artifact.world_hash = j.at("world_hash").get<uint64_t>();
  artifact.seed = j.at("seed").get<uint64_t>();
  return artifact;
}

}  // namespace pfd
