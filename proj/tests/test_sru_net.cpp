#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mohaq/sru_net.hpp"
#include "mohaq/synthetic_task.hpp"
#include "oracles.hpp"

using namespace mohaq;

namespace {

Matrix random_sequence(oracle::Gen& g, std::size_t T, std::size_t d, double amp) {
  Matrix m(T, d);
  for (double& v : m.data) v = g.uniform(-amp, amp);
  return m;
}

NetworkDims small_dims(std::size_t sru_layers = 2) {
  NetworkDims d;
  d.input_size = 5;
  d.hidden_size = 6;
  d.output_classes = 4;
  d.sru_layers = sru_layers;
  return d;
}

void randomize_biases(SruNetwork& net, oracle::Gen& g) {
  for (auto& p : net.params)
    for (auto& v : p.aux)
      for (double& b : v) b = g.uniform(-0.5, 0.5);
}

// Straight transcription of the cell equations for one direction of one layer.
std::vector<std::vector<double>> scalar_direction(const Matrix& x, const Matrix& w, const Matrix& wf,
                                                  const Matrix& wr, const std::vector<double>& bf,
                                                  const std::vector<double>& br, bool reverse) {
  const std::size_t T = x.rows, H = w.rows, I = x.cols;
  std::vector<std::vector<double>> h(T, std::vector<double>(H));
  std::vector<double> c(H, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    std::size_t t = reverse ? T - 1 - s : s;
    for (std::size_t j = 0; j < H; ++j) {
      double u = 0, f = bf[j], r = br[j];
      for (std::size_t i = 0; i < I; ++i) {
        u += w(j, i) * x(t, i);
        f += wf(j, i) * x(t, i);
        r += wr(j, i) * x(t, i);
      }
      f = oracle::sigmoid(f);
      r = oracle::sigmoid(r);
      c[j] = f * c[j] + (1 - f) * u;
      double skip = j < I ? x(t, j) : 0.0;
      h[t][j] = r * std::tanh(c[j]) + (1 - r) * skip;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("architecture layout") {
  NetworkDims d;
  auto arch = make_architecture(d);
  REQUIRE(arch.size() == 8);
  CHECK(arch[0].kind == LayerKind::BiSru);
  CHECK(arch[0].out_dim == 2 * d.hidden_size);
  for (std::size_t i = 1; i + 1 < arch.size(); i += 2) {
    CHECK(arch[i].kind == LayerKind::Projection);
    CHECK(arch[i].in_dim == 2 * d.hidden_size);
    CHECK(arch[i].out_dim == d.hidden_size);
    CHECK(arch[i + 1].kind == LayerKind::BiSru);
  }
  CHECK(arch.back().kind == LayerKind::Fc);
  d.sru_layers = 6;
  CHECK(make_architecture(d).size() == 12);
  auto net = make_zero_network(NetworkDims{});
  std::size_t total = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    std::size_t counted = 0;
    for (const auto& m : net.params[l].mxv) counted += m.data.size();
    CHECK(counted == net.layers[l].weight_count_mxv());
    std::size_t aux = 0;
    for (const auto& v : net.params[l].aux) aux += v.size();
    CHECK(aux == net.layers[l].aux_param_count());
    total += counted + aux;
  }
  CHECK(total == net.total_param_count());
  CHECK(total == 28160 + 520);
}

TEST_CASE("sru cell closed forms") {
  SUBCASE("zero parameters and input halve the state") {
    Matrix w(3, 2), wf(3, 2), wr(3, 2);
    std::vector<double> bf(3, 0.0), br(3, 0.0), x(2, 0.0), c_prev{1.0, -2.0, 0.5};
    auto out = sru_cell_forward(x, c_prev, {w, wf, wr, bf, br});
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(out.c[j] == doctest::Approx(0.5 * c_prev[j]).epsilon(1e-15));
    }
    // h = r*tanh(c) with r = 0.5; the skip input is zero.
    for (std::size_t j = 0; j < 3; ++j) CHECK(out.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * c_prev[j])));
  }
  SUBCASE("hidden size one by hand") {
    Matrix w(1, 1), wf(1, 1), wr(1, 1);
    w(0, 0) = 0.7;
    wf(0, 0) = -0.3;
    wr(0, 0) = 1.1;
    std::vector<double> bf{0.2}, br{-0.4}, x{0.9}, c_prev{0.25};
    auto out = sru_cell_forward(x, c_prev, {w, wf, wr, bf, br});
    double f = 1.0 / (1.0 + std::exp(-(-0.3 * 0.9 + 0.2)));
    double r = 1.0 / (1.0 + std::exp(-(1.1 * 0.9 - 0.4)));
    double c = f * 0.25 + (1 - f) * 0.7 * 0.9;
    double h = r * std::tanh(c) + (1 - r) * 0.9;
    CHECK(out.c[0] == doctest::Approx(c).epsilon(1e-14));
    CHECK(out.h[0] == doctest::Approx(h).epsilon(1e-14));
  }
  SUBCASE("saturated forget gate keeps a zero state") {
    Matrix w(2, 2), wf(2, 2), wr(2, 2);
    w(0, 0) = w(1, 1) = 3.0;
    std::vector<double> bf(2, 60.0), br(2, 0.0), x{1.0, -1.0}, c_prev(2, 0.0);
    auto out = sru_cell_forward(x, c_prev, {w, wf, wr, bf, br});
    for (double c : out.c) CHECK(std::fabs(c) < 1e-20);
  }
  SUBCASE("shape mismatch") {
    Matrix w(2, 3), wf(2, 3), wr(2, 3);
    std::vector<double> bf(2), br(2), x(2), c_prev(2);
    CHECK_THROWS_AS(sru_cell_forward(x, c_prev, {w, wf, wr, bf, br}), std::invalid_argument);
  }
}

TEST_CASE("network forward") {
  SUBCASE("zero network gives uniform scores") {
    auto net = make_zero_network(NetworkDims{});
    oracle::Gen g(1);
    auto out = network_forward(net, random_sequence(g, 7, 16, 1.0));
    CHECK(out.rows == 7);
    CHECK(out.cols == 8);
    for (double v : out.data) CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  }
  SUBCASE("single-layer network against the scalar reference") {
    oracle::Gen g(2);
    NetworkDims d = small_dims(1);
    auto net = make_random_network(d, 9);
    randomize_biases(net, g);
    Matrix x = random_sequence(g, 3, d.input_size, 1.0);
    auto out = network_forward(net, x);
    const auto& p = net.params[0];
    auto fwd = scalar_direction(x, p.mxv[0], p.mxv[1], p.mxv[2], p.aux[0], p.aux[1], false);
    auto bwd = scalar_direction(x, p.mxv[3], p.mxv[4], p.mxv[5], p.aux[2], p.aux[3], true);
    const auto& fc = net.params[1];
    for (std::size_t t = 0; t < 3; ++t) {
      std::vector<double> h(fwd[t]);
      h.insert(h.end(), bwd[t].begin(), bwd[t].end());
      std::vector<double> z(d.output_classes);
      double mx = -INFINITY;
      for (std::size_t o = 0; o < z.size(); ++o) {
        z[o] = fc.aux[0][o];
        for (std::size_t i = 0; i < h.size(); ++i) z[o] += fc.mxv[0](o, i) * h[i];
        mx = std::max(mx, z[o]);
      }
      double sum = 0;
      for (double& v : z) sum += (v = std::exp(v - mx));
      for (std::size_t o = 0; o < z.size(); ++o) CHECK(out(t, o) == doctest::Approx(z[o] / sum).epsilon(1e-12));
    }
  }
  SUBCASE("empty sequence") {
    auto net = make_zero_network(NetworkDims{});
    CHECK_THROWS_AS(network_forward(net, Matrix(0, 16)), std::invalid_argument);
  }
}

TEST_CASE("median convention") {
  CHECK(median({5.0}) == 5.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({1.0, 2.0, 3.0, 10.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("calibration") {
  oracle::Gen g(4);
  NetworkDims d = small_dims(2);
  auto net = make_random_network(d, 3);
  std::vector<Matrix> seqs;
  for (int i = 0; i < 3; ++i) seqs.push_back(random_sequence(g, 6, d.input_size, 1.0 + i));

  SUBCASE("one sequence records its maxima") {
    auto table = calibrate(net, std::span<const Matrix>(seqs).subspan(0, 1));
    double mx = 0;
    for (double v : seqs[0].data) mx = std::max(mx, std::fabs(v));
    CHECK(table.at(site_input(0)).expected == mx);
    CHECK(table.at(site_input(0)).peak == mx);
  }
  SUBCASE("median and peak over sequences") {
    auto table = calibrate(net, seqs);
    std::vector<double> maxima;
    for (const auto& s : seqs) {
      double mx = 0;
      for (double v : s.data) mx = std::max(mx, std::fabs(v));
      maxima.push_back(mx);
    }
    std::sort(maxima.begin(), maxima.end());
    CHECK(table.at(site_input(0)).expected == maxima[1]);
    CHECK(table.at(site_input(0)).peak == maxima[2]);
  }
  SUBCASE("every site has one positive entry") {
    auto table = calibrate(net, seqs);
    std::size_t expected_sites = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& spec = net.layers[l];
      expected_sites += 1 + spec.matrix_count();
      if (spec.kind == LayerKind::BiSru) expected_sites += 2 * spec.directions;
      CHECK(table.contains(site_input(l)));
      for (std::size_t m = 0; m < spec.matrix_count(); ++m) CHECK(table.contains(site_mxv(l, m)));
    }
    CHECK(table.size() == expected_sites);
    for (const auto& [_, r] : table.sites()) {
      CHECK(r.expected > 0.0);
      CHECK(r.peak >= r.expected);
    }
  }
  SUBCASE("no sequences") {
    CHECK_THROWS_AS(calibrate(net, std::span<const Matrix>{}), std::invalid_argument);
  }
}

TEST_CASE("quantized forward") {
  oracle::Gen g(8);
  NetworkDims d;
  auto net = make_random_network(d, 21);
  randomize_biases(net, g);
  std::vector<Matrix> seqs;
  for (int i = 0; i < 8; ++i) seqs.push_back(random_sequence(g, 12, d.input_size, 2.0));
  auto calib = calibrate(net, seqs);
  const std::size_t L = net.layers.size();

  SUBCASE("all FIX16 tracks full precision") {
    auto bank = std::make_shared<const WeightBank>(net);
    QuantizedModel model(net, bank, QuantAssignment::uniform(L, Precision::Fix16), calib);
    for (const auto& s : seqs) {
      auto q = model.forward(s);
      auto f = network_forward(net, s);
      for (std::size_t i = 0; i < q.data.size(); ++i) CHECK(std::fabs(q.data[i] - f.data[i]) <= std::ldexp(1.0, -10));
    }
  }
  SUBCASE("missing calibration") {
    CalibrationTable empty;
    CHECK_THROWS_WITH_AS(quantized_forward(net, QuantAssignment::uniform(L, Precision::Int8), empty, seqs[0]),
                         "uncalibrated site: L0.in", std::out_of_range);
  }
  SUBCASE("zero network and zero input") {
    auto zero = make_zero_network(d);
    Matrix x(5, d.input_size);
    auto zc = calibrate(zero, std::vector<Matrix>{x});
    auto q = quantized_forward(zero, QuantAssignment::uniform(L, Precision::Int4), zc, x);
    CHECK(q == network_forward(zero, x));
  }
  SUBCASE("deterministic") {
    auto a = quantized_forward(net, QuantAssignment::uniform(L, Precision::Int4), calib, seqs[1]);
    auto b = quantized_forward(net, QuantAssignment::uniform(L, Precision::Int4), calib, seqs[1]);
    CHECK(a == b);
  }
  SUBCASE("assignment length mismatch") {
    CHECK_THROWS_AS(quantized_forward(net, QuantAssignment::uniform(L - 1, Precision::Int8), calib, seqs[0]),
                    std::invalid_argument);
  }
}

TEST_CASE("aux parameters stay in 16-bit fixed point") {
  oracle::Gen g(12);
  auto net = make_random_network(NetworkDims{}, 5);
  randomize_biases(net, g);
  WeightBank bank(net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t k = 0; k < net.params[l].aux.size(); ++k) {
      const auto& fmt = bank.aux_format(l, k);
      CHECK(fmt.integer_bits + fmt.fraction_bits == 15);
      for (double v : bank.aux(l, k)) {
        double raw = std::ldexp(v, fmt.fraction_bits);
        CHECK(raw == std::round(raw));
      }
    }
  }
}

TEST_CASE("quantization error shrinks with precision (averaged over random nets)") {
  const std::vector<Precision> order = {Precision::Int2, Precision::Int4, Precision::Int8, Precision::Fix16};
  std::vector<double> mean_err(order.size(), 0.0);
  const int nets = 20;
  for (int n = 0; n < nets; ++n) {
    oracle::Gen g(1000 + n);
    NetworkDims d = small_dims(2);
    auto net = make_random_network(d, 77 + n);
    std::vector<Matrix> seqs;
    for (int i = 0; i < 4; ++i) seqs.push_back(random_sequence(g, 8, d.input_size, 1.5));
    auto calib = calibrate(net, seqs);
    auto bank = std::make_shared<const WeightBank>(net);
    for (std::size_t k = 0; k < order.size(); ++k) {
      QuantizedModel model(net, bank, QuantAssignment::uniform(net.layers.size(), order[k]), calib);
      for (const auto& s : seqs) {
        auto q = model.forward(s);
        auto f = network_forward(net, s);
        for (std::size_t i = 0; i < q.data.size(); ++i) mean_err[k] += std::fabs(q.data[i] - f.data[i]);
      }
    }
  }
  for (std::size_t k = 1; k < order.size(); ++k) CHECK(mean_err[k] < mean_err[k - 1]);
}

TEST_CASE("INT8 decisions agree with full precision on the desk-scale task") {
  const auto& net = fixtures::reference_baseline();
  const auto& data = fixtures::reference_data();
  auto calib_inputs = features_of(std::span<const LabeledSequence>(data.validation).subspan(0, 70));
  auto calib = calibrate(net, calib_inputs);
  auto bank = std::make_shared<const WeightBank>(net);
  QuantizedModel model(net, bank, QuantAssignment::uniform(net.layers.size(), Precision::Int8), calib);
  std::size_t agree = 0, total = 0;
  for (const auto& seq : data.validation) {
    auto q = model.forward(seq.features);
    auto f = network_forward(net, seq.features);
    for (std::size_t t = 0; t < q.rows; ++t) {
      agree += argmax(q.row(t)) == argmax(f.row(t));
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.95);
}
