#pragma once

#include "pathosyn/trainer.hpp"

namespace pathosyn::testing {

/// A training config small enough for unit tests at the given resolution.
inline TrainConfig tiny_config(int resolution, Precision precision = Precision::f64) {
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.precision = precision;
  c.validation_subjects = 2;
  c.validation_ddim_steps = 2;
  c.schedule.steps = 100;
  c.substrate_net.base_width = 4;
  c.substrate_net.resolution = resolution;
  c.noise_net.base_width = 8;
  c.noise_net.time_embed_dim = 16;
  c.noise_net.attention_resolution = resolution / 2;
  c.noise_net.resolution = resolution;
  return c;
}

}  // namespace pathosyn::testing
