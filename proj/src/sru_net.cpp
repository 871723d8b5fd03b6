#include "mohaq/sru_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mohaq {

namespace {

constexpr FixedPointFormat kUnitFormat{0, 15};  // gates and tanh outputs

void softmax_rows(Matrix& m) {
  for (std::size_t t = 0; t < m.rows; ++t) {
    auto row = m.row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::BiSru: return "bi-sru";
    case LayerKind::Projection: return "projection";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

std::size_t LayerSpec::weight_count_mxv() const { return matrix_count() * hidden() * in_dim; }

std::size_t LayerSpec::aux_param_count() const {
  switch (kind) {
    case LayerKind::BiSru: return 2 * out_dim;  // b_f and b_r per direction
    case LayerKind::Projection: return 0;
    case LayerKind::Fc: return out_dim;
  }
  return 0;
}

std::size_t LayerSpec::mac_count_per_step() const { return weight_count_mxv(); }

std::size_t LayerSpec::elementwise_ops_per_step() const {
  return kind == LayerKind::BiSru ? 4 * out_dim : 0;
}

std::size_t SruNetwork::total_param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.total_param_count();
  return n;
}

std::vector<LayerSpec> make_architecture(const NetworkDims& d) {
  require(d.sru_layers >= 1, "at least one SRU layer required");
  require(d.num_directions == 1 || d.num_directions == 2, "num_directions must be 1 or 2");
  require(d.input_size > 0 && d.hidden_size > 0 && d.output_classes > 0, "dimensions must be positive");
  std::vector<LayerSpec> layers;
  const std::size_t sru_out = d.num_directions * d.hidden_size;
  layers.push_back({LayerKind::BiSru, d.input_size, sru_out, d.num_directions});
  for (std::size_t i = 1; i < d.sru_layers; ++i) {
    layers.push_back({LayerKind::Projection, sru_out, d.hidden_size, 1});
    layers.push_back({LayerKind::BiSru, d.hidden_size, sru_out, d.num_directions});
  }
  layers.push_back({LayerKind::Fc, sru_out, d.output_classes, 1});
  return layers;
}

SruNetwork make_zero_network(const NetworkDims& dims) {
  SruNetwork net;
  net.dims = dims;
  net.layers = make_architecture(dims);
  for (const auto& spec : net.layers) {
    LayerParams p;
    for (std::size_t m = 0; m < spec.matrix_count(); ++m) p.mxv.emplace_back(spec.hidden(), spec.in_dim);
    if (spec.kind == LayerKind::BiSru) {
      for (std::size_t k = 0; k < 2 * spec.directions; ++k) p.aux.emplace_back(spec.hidden(), 0.0);
    } else if (spec.kind == LayerKind::Fc) {
      p.aux.emplace_back(spec.out_dim, 0.0);
    }
    net.params.push_back(std::move(p));
  }
  return net;
}

SruNetwork make_random_network(const NetworkDims& dims, std::uint64_t seed) {
  SruNetwork net = make_zero_network(dims);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.layers[l];
    const double bound = std::sqrt(3.0 / static_cast<double>(spec.in_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& m : net.params[l].mxv) {
      for (double& w : m.data) w = static_cast<float>(dist(rng));
    }
  }
  return net;
}

void validate_network(const SruNetwork& net) {
  require(net.layers == make_architecture(net.dims), "layer table does not match dimensions");
  require(net.params.size() == net.layers.size(), "parameter count does not match layer table");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.layers[l];
    const auto& p = net.params[l];
    require(p.mxv.size() == spec.matrix_count(), "layer " + std::to_string(l) + ": wrong matrix count");
    for (const auto& m : p.mxv) {
      require(m.rows == spec.hidden() && m.cols == spec.in_dim && m.data.size() == m.rows * m.cols,
              "layer " + std::to_string(l) + ": matrix shape mismatch");
    }
    std::size_t aux = 0;
    for (const auto& v : p.aux) aux += v.size();
    require(aux == spec.aux_param_count(), "layer " + std::to_string(l) + ": aux parameter mismatch");
  }
}

std::string to_string(const QuantAssignment& assignment) {
  std::ostringstream os;
  for (std::size_t i = 0; i < assignment.layers.size(); ++i) {
    if (i) os << ' ';
    os << bit_width(assignment.layers[i].weight) << '/' << bit_width(assignment.layers[i].activation);
  }
  return os.str();
}

SruCellOutput sru_cell_forward(std::span<const double> x_t, std::span<const double> c_prev,
                               const SruCellParams& p) {
  const std::size_t hidden = c_prev.size();
  const std::size_t in = x_t.size();
  for (const Matrix* m : {&p.w, &p.w_f, &p.w_r}) {
    if (m->rows != hidden || m->cols != in) throw std::invalid_argument("sru cell: weight shape mismatch");
  }
  if (p.b_f.size() != hidden || p.b_r.size() != hidden) {
    throw std::invalid_argument("sru cell: bias shape mismatch");
  }
  SruCellOutput out{std::vector<double>(hidden), std::vector<double>(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    double u = 0.0, fp = p.b_f[j], rp = p.b_r[j];
    for (std::size_t i = 0; i < in; ++i) {
      u += p.w(j, i) * x_t[i];
      fp += p.w_f(j, i) * x_t[i];
      rp += p.w_r(j, i) * x_t[i];
    }
    const double f = detail::sigmoid(fp);
    const double r = detail::sigmoid(rp);
    const double c = f * c_prev[j] + (1.0 - f) * u;
    const double skip = j < in ? x_t[j] : 0.0;
    out.c[j] = c;
    out.h[j] = r * std::tanh(c) + (1.0 - r) * skip;
  }
  return out;
}

std::string site_input(std::size_t layer) { return "L" + std::to_string(layer) + ".in"; }
std::string site_mxv(std::size_t layer, std::size_t matrix) {
  return "L" + std::to_string(layer) + ".mxv" + std::to_string(matrix);
}
std::string site_cell(std::size_t layer, std::size_t direction) {
  return "L" + std::to_string(layer) + ".c" + std::to_string(direction);
}
std::string site_hidden(std::size_t layer, std::size_t direction) {
  return "L" + std::to_string(layer) + ".h" + std::to_string(direction);
}

namespace detail {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void matmul_xwt(const Matrix& x, const Matrix& w, Matrix& y) {
  if (x.cols != w.cols) throw std::invalid_argument("matmul: inner dimension mismatch");
  y = Matrix(x.rows, w.rows);
  Matrix wt(w.cols, w.rows);
  for (std::size_t o = 0; o < w.rows; ++o)
    for (std::size_t i = 0; i < w.cols; ++i) wt(i, o) = w(o, i);
  for (std::size_t t = 0; t < x.rows; ++t) {
    double* yr = y.data.data() + t * y.cols;
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double a = x(t, i);
      const double* wr = wt.data.data() + i * wt.cols;
      for (std::size_t o = 0; o < wt.cols; ++o) yr[o] += a * wr[o];
    }
  }
}

Matrix forward_full(const SruNetwork& net, const Matrix& sequence, ForwardCache* cache,
                    ActivationObserver* observer) {
  if (sequence.rows == 0) throw std::invalid_argument("empty sequence");
  if (sequence.cols != net.dims.input_size) throw std::invalid_argument("sequence width mismatch");
  if (cache) cache->layers.assign(net.layers.size(), {});
  Matrix x = sequence;
  const std::size_t T = sequence.rows;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerSpec& spec = net.layers[l];
    const LayerParams& p = net.params[l];
    if (observer) observer->observe(site_input(l), x.data);
    Matrix out;
    if (spec.kind == LayerKind::BiSru) {
      const std::size_t H = spec.hidden();
      out = Matrix(T, spec.out_dim);
      std::vector<SruDirectionCache> dirs(spec.directions);
      for (std::size_t d = 0; d < spec.directions; ++d) {
        Matrix u, fp, rp;
        matmul_xwt(x, p.mxv[3 * d], u);
        matmul_xwt(x, p.mxv[3 * d + 1], fp);
        matmul_xwt(x, p.mxv[3 * d + 2], rp);
        if (observer) {
          observer->observe(site_mxv(l, 3 * d), u.data);
          observer->observe(site_mxv(l, 3 * d + 1), fp.data);
          observer->observe(site_mxv(l, 3 * d + 2), rp.data);
        }
        const auto& bf = p.aux[2 * d];
        const auto& br = p.aux[2 * d + 1];
        Matrix f(T, H), r(T, H), c(T, H), h(T, H);
        std::vector<double> state(H, 0.0);
        for (std::size_t s = 0; s < T; ++s) {
          const std::size_t t = d == 0 ? s : T - 1 - s;
          for (std::size_t j = 0; j < H; ++j) {
            const double fg = sigmoid(fp(t, j) + bf[j]);
            const double rg = sigmoid(rp(t, j) + br[j]);
            state[j] = fg * state[j] + (1.0 - fg) * u(t, j);
            const double skip = j < spec.in_dim ? x(t, j) : 0.0;
            const double hv = rg * std::tanh(state[j]) + (1.0 - rg) * skip;
            f(t, j) = fg;
            r(t, j) = rg;
            c(t, j) = state[j];
            h(t, j) = hv;
            out(t, d * H + j) = hv;
          }
        }
        if (observer) {
          observer->observe(site_cell(l, d), c.data);
          observer->observe(site_hidden(l, d), h.data);
        }
        if (cache) dirs[d] = {std::move(u), std::move(f), std::move(r), std::move(c)};
      }
      if (cache) cache->layers[l].dirs = std::move(dirs);
    } else {
      matmul_xwt(x, p.mxv[0], out);
      if (observer) observer->observe(site_mxv(l, 0), out.data);
      if (spec.kind == LayerKind::Fc) {
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t o = 0; o < out.cols; ++o) out(t, o) += p.aux[0][o];
        softmax_rows(out);
      }
    }
    if (cache) {
      cache->layers[l].input = std::move(x);
      cache->layers[l].output = out;
    }
    x = std::move(out);
  }
  return x;
}

}  // namespace detail

Matrix network_forward(const SruNetwork& net, const Matrix& sequence, ActivationObserver* observer) {
  return detail::forward_full(net, sequence, nullptr, observer);
}

void CalibrationTable::set(const std::string& site, SiteRange range) {
  if (!(range.expected > 0.0) || !(range.peak > 0.0)) {
    throw std::invalid_argument("calibrated range must be positive: " + site);
  }
  sites_[site] = range;
}

const SiteRange& CalibrationTable::at(const std::string& site) const {
  auto it = sites_.find(site);
  if (it == sites_.end()) throw std::out_of_range("uncalibrated site: " + site);
  return it->second;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

class RangeRecorder : public ActivationObserver {
 public:
  void observe(const std::string& site, std::span<const double> values) override {
    per_sequence_[site].push_back(max_abs(values));
  }
  const std::map<std::string, std::vector<double>>& ranges() const { return per_sequence_; }

 private:
  std::map<std::string, std::vector<double>> per_sequence_;
};

}  // namespace

CalibrationTable calibrate(const SruNetwork& net, std::span<const Matrix> sequences) {
  if (sequences.empty()) throw std::invalid_argument("calibration needs at least one sequence");
  RangeRecorder recorder;
  for (const auto& seq : sequences) network_forward(net, seq, &recorder);
  CalibrationTable table;
  for (const auto& [site, maxima] : recorder.ranges()) {
    SiteRange range{median(maxima), *std::max_element(maxima.begin(), maxima.end())};
    // A site that never fires gets the degenerate unit range.
    if (range.expected == 0.0) range.expected = 1.0;
    if (range.peak == 0.0) range.peak = 1.0;
    table.set(site, range);
  }
  return table;
}

QuantizedMatrix quantize_matrix(const Matrix& m, Precision p) {
  QuantizedMatrix q;
  q.precision = p;
  q.rows = m.rows;
  q.cols = m.cols;
  std::vector<double> values(m.data.size());
  if (is_integer(p)) {
    q.int_params = mmse_clip_threshold(m.data, p);
    q.scale = q.int_params.scale;
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = quantize_int_scalar(m.data[i], q.int_params);
    }
  } else {
    q.fixed_format = fixed16_format_for(m.data);
    values = quantize_fixed16(m.data, q.fixed_format);
  }
  q.levels_t.resize(values.size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) q.levels_t[c * m.rows + r] = values[r * m.cols + c];
  return q;
}

WeightBank::WeightBank(const SruNetwork& net) {
  validate_network(net);
  layers_.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& entry = layers_[l];
    for (const auto& m : net.params[l].mxv) {
      std::array<QuantizedMatrix, 4> qs;
      for (Precision p : kAllPrecisions) qs[encoded(p) - 1] = quantize_matrix(m, p);
      entry.matrices.push_back(std::move(qs));
    }
    for (const auto& v : net.params[l].aux) {
      const FixedPointFormat fmt = v.empty() ? FixedPointFormat{} : fixed16_format_for(v);
      entry.aux_formats.push_back(fmt);
      entry.aux.push_back(quantize_fixed16(v, fmt));
    }
  }
}

const QuantizedMatrix& WeightBank::matrix(std::size_t layer, std::size_t index, Precision p) const {
  return layers_.at(layer).matrices.at(index)[encoded(p) - 1];
}

const std::vector<double>& WeightBank::aux(std::size_t layer, std::size_t index) const {
  return layers_.at(layer).aux.at(index);
}

const FixedPointFormat& WeightBank::aux_format(std::size_t layer, std::size_t index) const {
  return layers_.at(layer).aux_formats.at(index);
}

QuantizedModel::QuantizedModel(const SruNetwork& net, std::shared_ptr<const WeightBank> bank,
                               QuantAssignment assignment, const CalibrationTable& calib)
    : net_(&net), bank_(std::move(bank)), assignment_(std::move(assignment)) {
  if (assignment_.layers.size() != net.layers.size()) {
    throw std::invalid_argument("assignment has " + std::to_string(assignment_.layers.size()) +
                                " layers, network has " + std::to_string(net.layers.size()));
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerSpec& spec = net.layers[l];
    const LayerPrecision lp = assignment_.layers[l];
    LayerPlan plan;
    plan.spec = spec;
    const SiteRange& in = calib.at(site_input(l));
    plan.input.precision = lp.activation;
    plan.input.fixed_format = fixed16_format_for_range(in.peak);
    if (is_integer(lp.activation)) plan.input.int_params = make_int_params(in.expected, lp.activation);
    for (std::size_t m = 0; m < spec.matrix_count(); ++m) {
      plan.matrices.push_back(&bank_->matrix(l, m, lp.weight));
      plan.mxv_formats.push_back(fixed16_format_for_range(calib.at(site_mxv(l, m)).peak));
    }
    if (spec.kind == LayerKind::BiSru) {
      for (std::size_t d = 0; d < spec.directions; ++d) {
        plan.cell_formats.push_back(fixed16_format_for_range(calib.at(site_cell(l, d)).peak));
        plan.hidden_formats.push_back(fixed16_format_for_range(calib.at(site_hidden(l, d)).peak));
      }
    }
    plans_.push_back(std::move(plan));
  }
}

std::vector<double> QuantizedModel::mxv(const LayerPlan& plan, std::size_t index, const Matrix& xq,
                                        double activation_scale) const {
  const QuantizedMatrix& w = *plan.matrices[index];
  const std::size_t T = xq.rows;
  const std::size_t out = w.rows;
  std::vector<double> acc(T * out, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double* yr = acc.data() + t * out;
    for (std::size_t i = 0; i < w.cols; ++i) {
      const double a = xq(t, i);
      if (a == 0.0) continue;
      const double* wr = w.levels_t.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += a * wr[o];
    }
  }
  return requantize_to_fixed16(acc, RequantScale{w.scale * activation_scale}, plan.mxv_formats[index]);
}

Matrix QuantizedModel::forward(const Matrix& sequence) const {
  if (sequence.rows == 0) throw std::invalid_argument("empty sequence");
  if (sequence.cols != net_->dims.input_size) throw std::invalid_argument("sequence width mismatch");
  const std::size_t T = sequence.rows;
  Matrix x = sequence;
  for (std::size_t l = 0; l < plans_.size(); ++l) {
    const LayerPlan& plan = plans_[l];
    const LayerSpec& spec = plan.spec;
    // Fixed-point view of the input (skip path) and the M×V operand.
    Matrix xf(T, x.cols);
    xf.data = quantize_fixed16(x.data, plan.input.fixed_format);
    Matrix xq = xf;
    double a_scale = 1.0;
    if (is_integer(plan.input.precision)) {
      for (std::size_t i = 0; i < x.data.size(); ++i) {
        xq.data[i] = quantize_int_scalar(x.data[i], plan.input.int_params);
      }
      a_scale = plan.input.int_params.scale;
    }
    Matrix out;
    if (spec.kind == LayerKind::BiSru) {
      const std::size_t H = spec.hidden();
      out = Matrix(T, spec.out_dim);
      for (std::size_t d = 0; d < spec.directions; ++d) {
        const auto u = mxv(plan, 3 * d, xq, a_scale);
        const auto fp = mxv(plan, 3 * d + 1, xq, a_scale);
        const auto rp = mxv(plan, 3 * d + 2, xq, a_scale);
        const auto& bf = bank_->aux(l, 2 * d);
        const auto& br = bank_->aux(l, 2 * d + 1);
        const FixedPointFormat& cf = plan.cell_formats[d];
        const FixedPointFormat& hf = plan.hidden_formats[d];
        std::vector<double> state(H, 0.0);
        for (std::size_t s = 0; s < T; ++s) {
          const std::size_t t = d == 0 ? s : T - 1 - s;
          for (std::size_t j = 0; j < H; ++j) {
            const std::size_t k = t * H + j;
            const double fg = quantize_fixed16_scalar(detail::sigmoid(fp[k] + bf[j]), kUnitFormat);
            const double rg = quantize_fixed16_scalar(detail::sigmoid(rp[k] + br[j]), kUnitFormat);
            state[j] = quantize_fixed16_scalar(fg * state[j] + (1.0 - fg) * u[k], cf);
            const double th = quantize_fixed16_scalar(std::tanh(state[j]), kUnitFormat);
            const double skip = j < spec.in_dim ? xf(t, j) : 0.0;
            out(t, d * H + j) = quantize_fixed16_scalar(rg * th + (1.0 - rg) * skip, hf);
          }
        }
      }
    } else {
      const auto y = mxv(plan, 0, xq, a_scale);
      out = Matrix(T, spec.out_dim);
      out.data = y;
      if (spec.kind == LayerKind::Fc) {
        const auto& b = bank_->aux(l, 0);
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t o = 0; o < out.cols; ++o) out(t, o) += b[o];
        softmax_rows(out);
      }
    }
    x = std::move(out);
  }
  return x;
}

Matrix quantized_forward(const SruNetwork& net, const QuantAssignment& assignment,
                         const CalibrationTable& calib, const Matrix& sequence) {
  auto bank = std::make_shared<const WeightBank>(net);
  return QuantizedModel(net, bank, assignment, calib).forward(sequence);
}

}  // namespace mohaq
