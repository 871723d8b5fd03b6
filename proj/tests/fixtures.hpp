#pragma once

#include "mohaq/sru_net.hpp"
#include "mohaq/synthetic_task.hpp"
#include "mohaq/trainer.hpp"

namespace fixtures {

// The desk-scale task and a baseline trained with the default preset, built once per process.
const mohaq::Dataset& reference_data();
const mohaq::SruNetwork& reference_baseline();
mohaq::TrainConfig reference_train_config();

}  // namespace fixtures
