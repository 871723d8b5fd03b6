#include "fixtures.hpp"

#include "mohaq/experiment.hpp"

namespace fixtures {

mohaq::TrainConfig reference_train_config() { return mohaq::ExperimentConfig{}.train; }

const mohaq::Dataset& reference_data() {
  static const mohaq::Dataset data = mohaq::make_synthetic_task(mohaq::TaskConfig{});
  return data;
}

const mohaq::SruNetwork& reference_baseline() {
  static const mohaq::SruNetwork net =
      mohaq::train_baseline(mohaq::NetworkDims{}, reference_data(), reference_train_config());
  return net;
}

}  // namespace fixtures
