#pragma once

#include <cstdint>

namespace prefscore {

/// One training run's hyperparameters. JSON/CLI keys use these exact names.
struct TrainConfig {
  double learning_rate = 2e-4;  // preset grid: 2e-5, 2e-4, 3e-4
  int grad_accum = 8;           // preset grid: 4, 8, 16, 32, 64, 128
  int epochs = 5;               // preset range: 1-20
  std::uint64_t seed = 0;
  bool label_input = true;
  bool truncate_right = true;

  // Extensions beyond the preset grid, all off by default.
  bool use_sgd = false;   // plain SGD instead of the adaptive-moment update
  int per_task_cap = 0;   // max pairs per task per epoch; 0 = unlimited
};

}  // namespace prefscore
