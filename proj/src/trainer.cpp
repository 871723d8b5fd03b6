#include "mohaq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mohaq {

std::string to_string(BeaconKind kind) {
  switch (kind) {
    case BeaconKind::General: return "general";
    case BeaconKind::FirstLayer2Bit: return "first-layer-2bit";
    case BeaconKind::FirstLayerFix16: return "first-layer-fix16";
    case BeaconKind::Dynamic: return "dynamic";
  }
  return "?";
}

void IdentityTransform::apply(std::size_t, std::size_t, const Matrix& weights, Matrix& used,
                              std::vector<std::uint8_t>& passes) const {
  used = weights;
  passes.assign(weights.data.size(), 1);
}

BinaryConnectTransform::BinaryConnectTransform(const SruNetwork& net, QuantAssignment assignment)
    : assignment_(std::move(assignment)) {
  if (assignment_.layers.size() != net.layers.size()) {
    throw std::invalid_argument("assignment length does not match network");
  }
  refresh(net);
}

void BinaryConnectTransform::refresh(const SruNetwork& net) {
  params_.assign(net.layers.size(), {});
  formats_.assign(net.layers.size(), {});
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Precision p = assignment_.layers[l].weight;
    for (const auto& m : net.params[l].mxv) {
      if (is_integer(p)) {
        params_[l].push_back(mmse_clip_threshold(m.data, p));
        formats_[l].push_back({});
      } else {
        params_[l].push_back({});
        formats_[l].push_back(fixed16_format_for(m.data));
      }
    }
  }
}

void BinaryConnectTransform::apply(std::size_t layer, std::size_t index, const Matrix& weights,
                                   Matrix& used, std::vector<std::uint8_t>& passes) const {
  used = weights;
  passes.assign(weights.data.size(), 1);
  const Precision p = assignment_.layers.at(layer).weight;
  if (is_integer(p)) {
    const IntQuantParams& q = params_.at(layer).at(index);
    for (std::size_t i = 0; i < weights.data.size(); ++i) {
      const double w = weights.data[i];
      used.data[i] = static_cast<double>(quantize_int_scalar(w, q)) / q.scale;
      passes[i] = std::abs(w) <= q.clip_threshold ? 1 : 0;
    }
  } else {
    const FixedPointFormat& fmt = formats_.at(layer).at(index);
    for (std::size_t i = 0; i < weights.data.size(); ++i) {
      const double w = weights.data[i];
      used.data[i] = quantize_fixed16_scalar(w, fmt);
      passes[i] = (w >= fmt.min_value() && w <= fmt.max_value()) ? 1 : 0;
    }
  }
}

Gradients zero_gradients(const SruNetwork& net) {
  Gradients g = net.params;
  for (auto& lp : g) {
    for (auto& m : lp.mxv) std::fill(m.data.begin(), m.data.end(), 0.0);
    for (auto& a : lp.aux) std::fill(a.begin(), a.end(), 0.0);
  }
  return g;
}

namespace {

// dW(out x in) += dY^T X
void add_outer(const Matrix& dy, const Matrix& x, Matrix& dw) {
  for (std::size_t t = 0; t < dy.rows; ++t) {
    for (std::size_t o = 0; o < dy.cols; ++o) {
      const double a = dy(t, o);
      if (a == 0.0) continue;
      double* wr = dw.data.data() + o * dw.cols;
      const double* xr = x.data.data() + t * x.cols;
      for (std::size_t i = 0; i < dw.cols; ++i) wr[i] += a * xr[i];
    }
  }
}

// dX(T x in) += dY W
void add_input_grad(const Matrix& dy, const Matrix& w, Matrix& dx) {
  for (std::size_t t = 0; t < dy.rows; ++t) {
    double* xr = dx.data.data() + t * dx.cols;
    for (std::size_t o = 0; o < dy.cols; ++o) {
      const double a = dy(t, o);
      if (a == 0.0) continue;
      const double* wr = w.data.data() + o * w.cols;
      for (std::size_t i = 0; i < w.cols; ++i) xr[i] += a * wr[i];
    }
  }
}

}  // namespace

double accumulate_gradients(const SruNetwork& net, const LabeledSequence& seq, Gradients& grads) {
  detail::ForwardCache cache;
  const Matrix probs = detail::forward_full(net, seq.features, &cache, nullptr);
  const std::size_t T = probs.rows;
  if (seq.labels.size() != T) throw std::invalid_argument("label length mismatch");

  double loss = 0.0;
  Matrix dy(T, probs.cols);
  for (std::size_t t = 0; t < T; ++t) {
    const auto label = static_cast<std::size_t>(seq.labels[t]);
    loss -= std::log(probs(t, label));
    for (std::size_t o = 0; o < probs.cols; ++o) dy(t, o) = probs(t, o) - (o == label ? 1.0 : 0.0);
  }

  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const LayerSpec& spec = net.layers[li];
    const LayerParams& p = net.params[li];
    LayerParams& g = grads[li];
    const detail::LayerCache& lc = cache.layers[li];
    const Matrix& x = lc.input;
    Matrix dx(T, spec.in_dim);
    if (spec.kind == LayerKind::BiSru) {
      const std::size_t H = spec.hidden();
      for (std::size_t d = 0; d < spec.directions; ++d) {
        const auto& dc_cache = lc.dirs[d];
        Matrix du(T, H), dfp(T, H), drp(T, H);
        std::vector<double> carry(H, 0.0);
        auto& dbf = g.aux[2 * d];
        auto& dbr = g.aux[2 * d + 1];
        for (std::size_t s = T; s-- > 0;) {
          const std::size_t t = d == 0 ? s : T - 1 - s;
          const bool has_prev = s > 0;
          const std::size_t tp = d == 0 ? t - 1 : t + 1;
          for (std::size_t j = 0; j < H; ++j) {
            const double dh = dy(t, d * H + j);
            const double c = dc_cache.c(t, j);
            const double tc = std::tanh(c);
            const double skip = j < spec.in_dim ? x(t, j) : 0.0;
            const double r = dc_cache.r(t, j);
            const double f = dc_cache.f(t, j);
            const double u = dc_cache.u(t, j);
            const double c_prev = has_prev ? dc_cache.c(tp, j) : 0.0;
            const double dr = dh * (tc - skip);
            const double dc = carry[j] + dh * r * (1.0 - tc * tc);
            if (j < spec.in_dim) dx(t, j) += dh * (1.0 - r);
            const double df = dc * (c_prev - u);
            du(t, j) = dc * (1.0 - f);
            carry[j] = dc * f;
            dfp(t, j) = df * f * (1.0 - f);
            drp(t, j) = dr * r * (1.0 - r);
            dbf[j] += dfp(t, j);
            dbr[j] += drp(t, j);
          }
        }
        add_outer(du, x, g.mxv[3 * d]);
        add_outer(dfp, x, g.mxv[3 * d + 1]);
        add_outer(drp, x, g.mxv[3 * d + 2]);
        add_input_grad(du, p.mxv[3 * d], dx);
        add_input_grad(dfp, p.mxv[3 * d + 1], dx);
        add_input_grad(drp, p.mxv[3 * d + 2], dx);
      }
    } else {
      add_outer(dy, x, g.mxv[0]);
      add_input_grad(dy, p.mxv[0], dx);
      if (spec.kind == LayerKind::Fc) {
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t o = 0; o < dy.cols; ++o) g.aux[0][o] += dy(t, o);
      }
    }
    dy = std::move(dx);
  }
  return loss;
}

namespace {

struct TransformedNet {
  SruNetwork used;
  std::vector<std::vector<std::vector<std::uint8_t>>> passes;
};

TransformedNet transform_net(const SruNetwork& net, const WeightTransform& transform) {
  TransformedNet out{net, {}};
  out.passes.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    out.passes[l].resize(net.params[l].mxv.size());
    for (std::size_t m = 0; m < net.params[l].mxv.size(); ++m) {
      transform.apply(l, m, net.params[l].mxv[m], out.used.params[l].mxv[m], out.passes[l][m]);
    }
  }
  return out;
}

}  // namespace

Gradients batch_gradients(const SruNetwork& net, std::span<const LabeledSequence* const> batch,
                          const WeightTransform* transform, double* loss) {
  std::optional<TransformedNet> tn;
  if (transform) tn = transform_net(net, *transform);
  const SruNetwork& used = tn ? tn->used : net;
  Gradients g = zero_gradients(net);
  double total = 0.0;
  std::size_t steps = 0;
  for (const LabeledSequence* seq : batch) {
    total += accumulate_gradients(used, *seq, g);
    steps += seq->labels.size();
  }
  if (steps == 0) throw std::invalid_argument("empty batch");
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::size_t l = 0; l < g.size(); ++l) {
    for (std::size_t m = 0; m < g[l].mxv.size(); ++m) {
      auto& d = g[l].mxv[m].data;
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] *= inv;
        if (tn && !tn->passes[l][m][i]) d[i] = 0.0;
      }
    }
    for (auto& a : g[l].aux)
      for (double& v : a) v *= inv;
  }
  if (loss) *loss = total * inv;
  return g;
}

double batch_loss(const SruNetwork& net, std::span<const LabeledSequence* const> batch,
                  const WeightTransform* transform) {
  std::optional<TransformedNet> tn;
  if (transform) tn = transform_net(net, *transform);
  const SruNetwork& used = tn ? tn->used : net;
  double total = 0.0;
  std::size_t steps = 0;
  for (const LabeledSequence* seq : batch) {
    const Matrix probs = network_forward(used, seq->features);
    for (std::size_t t = 0; t < probs.rows; ++t) {
      total -= std::log(probs(t, static_cast<std::size_t>(seq->labels[t])));
    }
    steps += probs.rows;
  }
  return total / static_cast<double>(steps);
}

double sgd_step(SruNetwork& net, std::span<const LabeledSequence* const> batch, double learning_rate,
                const WeightTransform* transform) {
  double loss = 0.0;
  const Gradients g = batch_gradients(net, batch, transform, &loss);
  if (!std::isfinite(loss)) throw TrainingDiverged("training diverged (loss is not finite)");
  auto update = [&](double& w, double grad) {
    w = static_cast<float>(w - learning_rate * grad);
  };
  for (std::size_t l = 0; l < net.params.size(); ++l) {
    for (std::size_t m = 0; m < net.params[l].mxv.size(); ++m) {
      auto& w = net.params[l].mxv[m].data;
      for (std::size_t i = 0; i < w.size(); ++i) update(w[i], g[l].mxv[m].data[i]);
    }
    for (std::size_t a = 0; a < net.params[l].aux.size(); ++a) {
      auto& v = net.params[l].aux[a];
      for (std::size_t i = 0; i < v.size(); ++i) update(v[i], g[l].aux[a][i]);
    }
  }
  return loss;
}

SruNetwork train(SruNetwork net, std::span<const LabeledSequence> data, const TrainConfig& cfg,
                 BinaryConnectTransform* transform, TrainReport* report) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and non-negative");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (data.empty()) throw std::invalid_argument("no training data");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const LabeledSequence*> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    if (transform) transform->refresh(net);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&data[order[k]]);
      }
      epoch_loss += sgd_step(net, batch, cfg.learning_rate, transform);
      ++batches;
    }
    if (report) report->epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return net;
}

double classification_error(const SruNetwork& net, std::span<const LabeledSequence> data) {
  ErrorCount total;
  for (const auto& seq : data) {
    const ErrorCount e = count_errors(network_forward(net, seq.features), seq.labels);
    total.wrong += e.wrong;
    total.total += e.total;
  }
  return total.rate();
}

SruNetwork train_baseline(const NetworkDims& dims, const Dataset& data, const TrainConfig& cfg,
                          TrainReport* report) {
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  SruNetwork net = train(make_random_network(dims, cfg.seed), data.train, cfg, nullptr, &rep);
  rep.validation_error = classification_error(net, data.validation);
  if (cfg.max_validation_error && rep.validation_error > *cfg.max_validation_error) {
    throw std::runtime_error("baseline validation error " + std::to_string(rep.validation_error) +
                             " exceeds sanity bound " + std::to_string(*cfg.max_validation_error));
  }
  return net;
}

Beacon retrain_binary_connect(const SruNetwork& net, const QuantAssignment& assignment,
                              const Genome& genome, BeaconKind kind,
                              std::span<const LabeledSequence> data, const TrainConfig& cfg) {
  BinaryConnectTransform transform(net, assignment);
  Beacon b;
  b.parameters = train(net, data, cfg, &transform);
  b.source_genome = genome;
  b.source_assignment = assignment;
  b.kind = kind;
  return b;
}

}  // namespace mohaq
