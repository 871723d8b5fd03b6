#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mohaq/genome.hpp"
#include "mohaq/sru_net.hpp"
#include "mohaq/synthetic_task.hpp"

namespace mohaq {

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  // Sanity bound on the baseline's validation error; unset disables the check.
  std::optional<double> max_validation_error = 0.2;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BeaconKind { General, FirstLayer2Bit, FirstLayerFix16, Dynamic };

std::string to_string(BeaconKind kind);

struct Beacon {
  SruNetwork parameters;  // always full precision
  Genome source_genome;
  QuantAssignment source_assignment;
  BeaconKind kind = BeaconKind::General;
};

// Maps the stored weights to the weights used by forward and backward passes and
// marks which entries let gradient through.
class WeightTransform {
 public:
  virtual ~WeightTransform() = default;
  virtual void apply(std::size_t layer, std::size_t index, const Matrix& weights, Matrix& used,
                     std::vector<std::uint8_t>& passes) const = 0;
};

class IdentityTransform final : public WeightTransform {
 public:
  void apply(std::size_t layer, std::size_t index, const Matrix& weights, Matrix& used,
             std::vector<std::uint8_t>& passes) const override;
};

// Binary-connect view: integer layers use MMSE-clipped, dequantized weights and a
// straight-through gradient (identity inside the clip range, zero outside).
class BinaryConnectTransform final : public WeightTransform {
 public:
  BinaryConnectTransform(const SruNetwork& net, QuantAssignment assignment);
  // Recomputes clip thresholds from the current weights.
  void refresh(const SruNetwork& net);
  void apply(std::size_t layer, std::size_t index, const Matrix& weights, Matrix& used,
             std::vector<std::uint8_t>& passes) const override;

 private:
  QuantAssignment assignment_;
  std::vector<std::vector<IntQuantParams>> params_;
  std::vector<std::vector<FixedPointFormat>> formats_;
};

using Gradients = std::vector<LayerParams>;

Gradients zero_gradients(const SruNetwork& net);

// Sum over steps of the cross-entropy; gradients of that sum are added to `grads`.
double accumulate_gradients(const SruNetwork& net, const LabeledSequence& seq, Gradients& grads);

// Mean cross-entropy per step over `batch`.
double batch_loss(const SruNetwork& net, std::span<const LabeledSequence* const> batch,
                  const WeightTransform* transform = nullptr);

// Gradient of batch_loss with respect to the stored weights, routed through `transform`.
Gradients batch_gradients(const SruNetwork& net, std::span<const LabeledSequence* const> batch,
                          const WeightTransform* transform, double* loss = nullptr);

// One SGD update; parameters are kept float32-representable. Returns the batch loss.
double sgd_step(SruNetwork& net, std::span<const LabeledSequence* const> batch, double learning_rate,
                const WeightTransform* transform = nullptr);

struct TrainReport {
  std::vector<double> epoch_loss;
  double validation_error = 0.0;
};

SruNetwork train(SruNetwork net, std::span<const LabeledSequence> data, const TrainConfig& cfg,
                 BinaryConnectTransform* transform = nullptr, TrainReport* report = nullptr);

double classification_error(const SruNetwork& net, std::span<const LabeledSequence> data);

SruNetwork train_baseline(const NetworkDims& dims, const Dataset& data, const TrainConfig& cfg,
                          TrainReport* report = nullptr);

Beacon retrain_binary_connect(const SruNetwork& net, const QuantAssignment& assignment,
                              const Genome& genome, BeaconKind kind,
                              std::span<const LabeledSequence> data, const TrainConfig& cfg);

}  // namespace mohaq
