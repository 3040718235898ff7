#pragma once

#include <cstdint>
#include <string>

#include "pfd/correction.hpp"
#include "pfd/discriminator.hpp"

namespace pfd {

// Trained discriminators and kappa tables persist as structured text (JSON)
// with the run seed and world hash embedded, so downstream runs can refuse
// artifacts built against a different world or schedule.

struct DiscriminatorArtifact {
  Discriminator discriminator;
  uint64_t world_hash = 0;
  uint64_t seed = 0;
  double final_train_loss = 0.0;
  double heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
};

void save_discriminator(const std::string& path, const TrainResult& result, uint64_t world_hash,
                        uint64_t seed);
DiscriminatorArtifact load_discriminator(const std::string& path);

struct KappaArtifact {
  KappaTable table;
  uint64_t world_hash = 0;
  uint64_t seed = 0;
};

void save_kappa(const std::string& path, const KappaTable& table, uint64_t world_hash, uint64_t seed);
KappaArtifact load_kappa(const std::string& path);

// World parameters travel with each run directory so metrics can be
// recomputed later from the stored samples alone.
void save_world(const std::string& path, const MixtureWorld::Params& params);
MixtureWorld::Params load_world(const std::string& path);

}  // namespace pfd
