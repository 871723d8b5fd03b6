#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mohaq/precision.hpp"
#include "mohaq/quant.hpp"

namespace mohaq {

// Row-major dense matrix. Also used for sequences (rows = time steps).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool operator==(const Matrix&) const = default;
};

enum class LayerKind : std::uint32_t { BiSru = 0, Projection = 1, Fc = 2 };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::BiSru;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;      // BiSru: directions * hidden
  std::size_t directions = 1;   // BiSru only

  std::size_t hidden() const { return kind == LayerKind::BiSru ? out_dim / directions : out_dim; }
  // Quantizable M×V matrices: 3 per direction for SRU, 1 otherwise.
  std::size_t matrix_count() const { return kind == LayerKind::BiSru ? 3 * directions : 1; }
  std::size_t weight_count_mxv() const;
  // Biases; always kept in 16-bit fixed point.
  std::size_t aux_param_count() const;
  std::size_t total_param_count() const { return weight_count_mxv() + aux_param_count(); }
  std::size_t mac_count_per_step() const;
  // Element-wise multiplies of the recurrence (c_t and h_t updates).
  std::size_t elementwise_ops_per_step() const;
  std::size_t mac_count(std::size_t seq_len) const { return mac_count_per_step() * seq_len; }
  bool operator==(const LayerSpec&) const = default;
};

struct NetworkDims {
  std::size_t input_size = 16;
  std::size_t hidden_size = 32;
  std::size_t num_directions = 2;
  std::size_t output_classes = 8;
  std::size_t sru_layers = 4;
  bool operator==(const NetworkDims&) const = default;
};

struct LayerParams {
  std::vector<Matrix> mxv;                 // SRU order per direction: W, W_f, W_r
  std::vector<std::vector<double>> aux;    // SRU per direction: b_f, b_r; FC: bias
  bool operator==(const LayerParams&) const = default;
};

// Bi-SRU, (projection, Bi-SRU)*, FC.
struct SruNetwork {
  NetworkDims dims;
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;

  std::size_t total_param_count() const;
  bool operator==(const SruNetwork&) const = default;
};

std::vector<LayerSpec> make_architecture(const NetworkDims& dims);
SruNetwork make_zero_network(const NetworkDims& dims);
SruNetwork make_random_network(const NetworkDims& dims, std::uint64_t seed);
// Throws std::invalid_argument when shapes disagree with the layer table.
void validate_network(const SruNetwork& net);

struct LayerPrecision {
  Precision weight = Precision::Fix16;
  Precision activation = Precision::Fix16;
  bool operator==(const LayerPrecision&) const = default;
};

struct QuantAssignment {
  std::vector<LayerPrecision> layers;

  static QuantAssignment uniform(std::size_t layer_count, Precision p) {
    return {std::vector<LayerPrecision>(layer_count, LayerPrecision{p, p})};
  }
  bool operator==(const QuantAssignment&) const = default;
};

std::string to_string(const QuantAssignment& assignment);

// One SRU time step. Weight matrices are hidden x in; c_prev only enters element-wise.
struct SruCellParams {
  const Matrix& w;
  const Matrix& w_f;
  const Matrix& w_r;
  std::span<const double> b_f;
  std::span<const double> b_r;
};

struct SruCellOutput {
  std::vector<double> h;
  std::vector<double> c;
};

SruCellOutput sru_cell_forward(std::span<const double> x_t, std::span<const double> c_prev,
                               const SruCellParams& params);

// Names of the activation sites that calibration records.
std::string site_input(std::size_t layer);
std::string site_mxv(std::size_t layer, std::size_t matrix);
std::string site_cell(std::size_t layer, std::size_t direction);
std::string site_hidden(std::size_t layer, std::size_t direction);

class ActivationObserver {
 public:
  virtual ~ActivationObserver() = default;
  virtual void observe(const std::string& site, std::span<const double> values) = 0;
};

// Softmax class scores, one row per time step.
Matrix network_forward(const SruNetwork& net, const Matrix& sequence,
                       ActivationObserver* observer = nullptr);

struct SiteRange {
  double expected = 1.0;  // median over sequences of the per-sequence max|v|
  double peak = 1.0;      // max over sequences
};

class CalibrationTable {
 public:
  void set(const std::string& site, SiteRange range);
  const SiteRange& at(const std::string& site) const;
  bool contains(const std::string& site) const { return sites_.contains(site); }
  std::size_t size() const { return sites_.size(); }
  const std::map<std::string, SiteRange>& sites() const { return sites_; }

 private:
  std::map<std::string, SiteRange> sites_;
};

// Median; even counts average the middle pair.
double median(std::vector<double> values);

// Records every site of the network; one table serves any assignment.
CalibrationTable calibrate(const SruNetwork& net, std::span<const Matrix> sequences);

struct QuantizedMatrix {
  Precision precision = Precision::Fix16;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> levels_t;  // transposed (cols x rows); integer levels or fixed-point values
  double scale = 1.0;            // real ≈ level / scale; 1 for FIX16
  IntQuantParams int_params;     // meaningful for integer precisions only
  FixedPointFormat fixed_format; // meaningful for FIX16 only
};

// Quantized weights of one parameter set for every precision, computed once.
class WeightBank {
 public:
  explicit WeightBank(const SruNetwork& net);

  const QuantizedMatrix& matrix(std::size_t layer, std::size_t index, Precision p) const;
  const std::vector<double>& aux(std::size_t layer, std::size_t index) const;
  const FixedPointFormat& aux_format(std::size_t layer, std::size_t index) const;

 private:
  struct LayerEntry {
    std::vector<std::array<QuantizedMatrix, 4>> matrices;
    std::vector<std::vector<double>> aux;
    std::vector<FixedPointFormat> aux_formats;
  };
  std::vector<LayerEntry> layers_;
};

QuantizedMatrix quantize_matrix(const Matrix& m, Precision p);

// Inference with M×V operands quantized per assignment and every element-wise
// value held in 16-bit fixed point.
class QuantizedModel {
 public:
  QuantizedModel(const SruNetwork& net, std::shared_ptr<const WeightBank> bank,
                 QuantAssignment assignment, const CalibrationTable& calib);

  Matrix forward(const Matrix& sequence) const;
  const QuantAssignment& assignment() const { return assignment_; }

 private:
  struct ActivationQuant {
    Precision precision = Precision::Fix16;
    IntQuantParams int_params;
    FixedPointFormat fixed_format;
  };
  struct LayerPlan {
    LayerSpec spec;
    ActivationQuant input;
    std::vector<const QuantizedMatrix*> matrices;
    std::vector<FixedPointFormat> mxv_formats;
    std::vector<FixedPointFormat> cell_formats;
    std::vector<FixedPointFormat> hidden_formats;
  };

  std::vector<double> mxv(const LayerPlan& plan, std::size_t index, const Matrix& xq,
                          double activation_scale) const;

  const SruNetwork* net_;
  std::shared_ptr<const WeightBank> bank_;
  QuantAssignment assignment_;
  std::vector<LayerPlan> plans_;
};

Matrix quantized_forward(const SruNetwork& net, const QuantAssignment& assignment,
                         const CalibrationTable& calib, const Matrix& sequence);

namespace detail {

// Y[T x out] = X[T x in] * W^T for W stored out x in.
void matmul_xwt(const Matrix& x, const Matrix& w, Matrix& y);
double sigmoid(double v);

// Activations kept for back-propagation.
struct SruDirectionCache {
  Matrix u, f, r, c;
};
struct LayerCache {
  Matrix input;
  std::vector<SruDirectionCache> dirs;
  Matrix output;  // SRU: concatenated h; projection: y; FC: softmax probabilities
};
struct ForwardCache {
  std::vector<LayerCache> layers;
};

Matrix forward_full(const SruNetwork& net, const Matrix& sequence, ForwardCache* cache,
                    ActivationObserver* observer);

}  // namespace detail

}  // namespace mohaq
