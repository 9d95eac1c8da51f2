#include "segraph/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "segraph/binary_io.hpp"

namespace segraph {

namespace {

constexpr double kLayerNormEps = 1e-5;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  return m;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& e) {
  const Eigen::VectorXd shifted = (e.array() - e.maxCoeff()).exp();
  return shifted / shifted.sum();
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

VerifierDims VerifierParams::dims() const {
  VerifierDims d;
  d.d = static_cast<int>(coattention.w_l.rows());
  d.k = static_cast<int>(coattention.w_s.rows());
  for (int i = 0; i < 3; ++i) d.hidden[static_cast<std::size_t>(i)] = static_cast<int>(mlp.layers[static_cast<std::size_t>(i)].weight.rows());
  return d;
}

std::vector<Eigen::MatrixXd*> VerifierParams::blocks() {
  auto& c = coattention;
  std::vector<Eigen::MatrixXd*> out{&c.w_l, &c.w_s, &c.w_c, &c.w_as, &c.w_ac};
  for (std::size_t l = 0; l < 4; ++l) {
    auto& layer = mlp.layers[l];
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
    if (l < 3) {
      out.push_back(&layer.gain);
      out.push_back(&layer.shift);
    }
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> VerifierParams::blocks() const {
  auto mut = const_cast<VerifierParams*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

std::uint64_t VerifierParams::checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const auto* b : blocks()) {
    h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(b->data()), static_cast<std::size_t>(b->size()) * sizeof(double)), h);
  }
  return h;
}

bool operator==(const VerifierParams& a, const VerifierParams& b) {
  const auto x = a.blocks();
  const auto y = b.blocks();
  if (a.mlp.dropout != b.mlp.dropout) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]->rows() != y[i]->rows() || x[i]->cols() != y[i]->cols() || *x[i] != *y[i]) return false;
  }
  return true;
}

namespace {
void check_dims(const VerifierDims& dims) {
  if (dims.d < 1 || dims.k < 1 || std::any_of(dims.hidden.begin(), dims.hidden.end(), [](int h) { return h < 1; })) {
    throw ConfigError("verifier dimensions must be positive");
  }
}

VerifierParams shaped(const VerifierDims& dims) {
  check_dims(dims);
  VerifierParams p;
  auto& c = p.coattention;
  c.w_l = Eigen::MatrixXd::Zero(dims.d, dims.d);
  c.w_s = Eigen::MatrixXd::Zero(dims.k, dims.d);
  c.w_c = Eigen::MatrixXd::Zero(dims.k, dims.d);
  c.w_as = Eigen::MatrixXd::Zero(dims.k, 1);
  c.w_ac = Eigen::MatrixXd::Zero(dims.k, 1);
  const std::array<int, 5> width{2 * dims.d, dims.hidden[0], dims.hidden[1], dims.hidden[2], 1};
  for (std::size_t l = 0; l < 4; ++l) {
    auto& layer = p.mlp.layers[l];
    layer.weight = Eigen::MatrixXd::Zero(width[l + 1], width[l]);
    layer.bias = Eigen::MatrixXd::Zero(width[l + 1], 1);
    if (l < 3) {
      layer.gain = Eigen::MatrixXd::Zero(width[l + 1], 1);
      layer.shift = Eigen::MatrixXd::Zero(width[l + 1], 1);
    }
  }
  return p;
}
}  // namespace

VerifierParams zero_verifier(const VerifierDims& dims) { return shaped(dims); }

VerifierParams init_verifier(const VerifierDims& dims, std::uint64_t seed) {
  auto p = shaped(dims);
  std::mt19937_64 rng(seed);
  auto& c = p.coattention;
  c.w_l = glorot(dims.d, dims.d, rng);
  c.w_s = glorot(dims.k, dims.d, rng);
  c.w_c = glorot(dims.k, dims.d, rng);
  c.w_as = glorot(dims.k, 1, rng);
  c.w_ac = glorot(dims.k, 1, rng);
  for (std::size_t l = 0; l < 4; ++l) {
    auto& layer = p.mlp.layers[l];
    layer.weight = glorot(static_cast<int>(layer.weight.rows()), static_cast<int>(layer.weight.cols()), rng);
    if (l < 3) layer.gain.setOnes();
  }
  return p;
}

CoAttentionOutput coattention_forward(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2,
                                      const CoAttentionParams& params) {
  const auto d = params.w_l.rows();
  if (h1.rows() < 1 || h2.rows() < 1) throw DataError("co-attention needs at least one row per sequence");
  if (h1.cols() != d || h2.cols() != d) {
    throw DataError(fmt::format("co-attention expects d = {}, got history {} and current {}", d, h1.cols(), h2.cols()));
  }
  if (params.w_s.cols() != d || params.w_c.cols() != d || params.w_c.rows() != params.w_s.rows() ||
      params.w_as.rows() != params.w_s.rows() || params.w_ac.rows() != params.w_s.rows()) {
    throw DataError("co-attention parameter shapes are inconsistent");
  }
  CoAttentionOutput out;
  out.f = ((h1 * params.w_l) * h2.transpose()).array().tanh();
  const Eigen::MatrixXd p = params.w_s * h2.transpose();  // k x T
  const Eigen::MatrixXd q = params.w_c * h1.transpose();  // k x N
  out.h_s = (p + q * out.f).array().tanh();
  out.h_c = (q + p * out.f.transpose()).array().tanh();
  out.a_s = softmax(out.h_s.transpose() * params.w_as);
  out.a_c = softmax(out.h_c.transpose() * params.w_ac);
  out.z.resize(2 * d);
  out.z.head(d) = h2.transpose() * out.a_s;
  out.z.tail(d) = h1.transpose() * out.a_c;
  return out;
}

double DropoutStream::next_uniform() {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double mlp_forward(const Eigen::VectorXd& z, const MlpParams& params, Mode mode, DropoutStream* dropout,
                   MlpTrace* trace) {
  if (z.size() != params.layers[0].weight.cols()) {
    throw DataError(fmt::format("MLP expects input of length {}, got {}", params.layers[0].weight.cols(), z.size()));
  }
  if (mode == Mode::kTrain && params.dropout > 0 && dropout == nullptr) {
    throw ConfigError("train-mode MLP forward needs a dropout stream");
  }
  MlpTrace local;
  MlpTrace& t = trace ? *trace : local;
  Eigen::VectorXd x = z;
  for (std::size_t l = 0; l < 4; ++l) {
    const auto& layer = params.layers[l];
    t.input[l] = x;
    t.pre[l] = layer.weight * x + layer.bias.col(0);
    if (!t.pre[l].allFinite()) throw NumericError(fmt::format("non-finite activation in MLP layer {}", l + 1));
    if (l == 3) break;
    const Eigen::VectorXd g = t.pre[l].unaryExpr(&gelu);
    const double mean = g.mean();
    const double var = (g.array() - mean).square().mean();
    t.inv_std[l] = 1.0 / std::sqrt(var + kLayerNormEps);
    t.normed[l] = (g.array() - mean) * t.inv_std[l];
    x = t.normed[l].cwiseProduct(layer.gain.col(0)) + layer.shift.col(0);
    t.mask[l] = Eigen::VectorXd::Ones(x.size());
    if (mode == Mode::kTrain && params.dropout > 0) {
      const double keep = 1.0 - params.dropout;
      for (Eigen::Index i = 0; i < x.size(); ++i) t.mask[l][i] = dropout->next_uniform() < keep ? 1.0 / keep : 0.0;
      x = x.cwiseProduct(t.mask[l]);
    }
    if (!x.allFinite()) throw NumericError(fmt::format("non-finite activation in MLP layer {}", l + 1));
  }
  t.p = sigmoid(t.pre[3][0]);
  return t.p;
}

double bce_loss(double p, int label, const ClassWeights& w) {
  if (label != 0 && label != 1) throw DataError(fmt::format("BCE label must be 0 or 1, got {}", label));
  if (std::isnan(p)) throw NumericError("BCE probability is NaN");
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -w.pos * std::log(q) : -w.neg * std::log(1.0 - q);
}

double bce_loss(std::span<const double> p, std::span<const int> labels, const ClassWeights& w) {
  if (p.size() != labels.size() || p.empty()) throw DataError("BCE batch needs matching, non-empty inputs");
  double sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += bce_loss(p[i], labels[i], w);
  return sum / static_cast<double>(p.size());
}

double loss_and_gradient(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights,
                         Mode mode, DropoutStream* dropout, std::vector<Eigen::MatrixXd>* gradient) {
  if (!gradient) {
    const auto co = coattention_forward(sample.h1, sample.h2, params.coattention);
    return bce_loss(mlp_forward(co.z, params.mlp, mode, dropout), sample.label, weights);
  }
  gradient->clear();
  for (const auto* b : params.blocks()) gradient->push_back(Eigen::MatrixXd::Zero(b->rows(), b->cols()));
  return accumulate_gradient(params, sample, weights, mode, dropout, *gradient);
}

namespace {

// Outer-product factors of the two largest gradient blocks, summed with one
// product per mini-batch instead of one rank-L update per sample.
struct DeferredFactors {
  std::vector<Eigen::MatrixXd> affinity_left;   // H1 per sample (N x d)
  std::vector<Eigen::MatrixXd> affinity_right;  // dF' H2 per sample (N x d)
  std::vector<Eigen::VectorXd> first_delta;     // layer-1 output delta
  std::vector<Eigen::VectorXd> first_input;     // z

  void clear() {
    affinity_left.clear();
    affinity_right.clear();
    first_delta.clear();
    first_input.clear();
  }

  void flush(std::vector<Eigen::MatrixXd>& g) {
    if (affinity_left.empty()) return;
    Eigen::Index rows = 0;
    for (const auto& m : affinity_left) rows += m.rows();
    const auto d = affinity_left.front().cols();
    Eigen::MatrixXd left(rows, d);
    Eigen::MatrixXd right(rows, d);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < affinity_left.size(); ++i) {
      const auto n = affinity_left[i].rows();
      left.middleRows(at, n) = affinity_left[i];
      right.middleRows(at, n) = affinity_right[i];
      at += n;
    }
    g[0].noalias() += left.transpose() * right;
    const auto b = static_cast<Eigen::Index>(first_delta.size());
    Eigen::MatrixXd deltas(first_delta.front().size(), b);
    Eigen::MatrixXd inputs(first_input.front().size(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
      deltas.col(i) = first_delta[static_cast<std::size_t>(i)];
      inputs.col(i) = first_input[static_cast<std::size_t>(i)];
    }
    g[5].noalias() += deltas * inputs.transpose();
    clear();
  }
};

double backprop(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights, Mode mode,
                DropoutStream* dropout, std::vector<Eigen::MatrixXd>& g, DeferredFactors* deferred);

}  // namespace

double accumulate_gradient(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights,
                           Mode mode, DropoutStream* dropout, std::vector<Eigen::MatrixXd>& g) {
  return backprop(params, sample, weights, mode, dropout, g, nullptr);
}

namespace {

double backprop(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights, Mode mode,
                DropoutStream* dropout, std::vector<Eigen::MatrixXd>& g, DeferredFactors* deferred) {
  const auto& cp = params.coattention;
  const auto co = coattention_forward(sample.h1, sample.h2, cp);
  MlpTrace t;
  const double p = mlp_forward(co.z, params.mlp, mode, dropout, &t);
  const double loss = bce_loss(p, sample.label, weights);
  if (g.size() != 19) throw DataError("gradient accumulator has the wrong block count");

  // dL/do for the output logit.
  const double y = sample.label;
  Eigen::VectorXd delta(1);
  delta[0] = -weights.pos * y * (1.0 - p) + weights.neg * (1.0 - y) * p;

  // MLP blocks start at index 5: layer l has (weight, bias, gain, shift), the
  // output layer only (weight, bias).
  const auto mlp_index = [](std::size_t l) { return 5 + 4 * l; };
  for (std::size_t li = 4; li-- > 0;) {
    const auto& layer = params.mlp.layers[li];
    const auto base = mlp_index(li);
    if (li == 0 && deferred) {
      deferred->first_delta.push_back(delta);
      deferred->first_input.push_back(t.input[0]);
    } else {
      g[base].noalias() += delta * t.input[li].transpose();
    }
    g[base + 1] += delta;
    Eigen::VectorXd dx = layer.weight.transpose() * delta;
    if (li == 0) {
      delta = dx;
      break;
    }
    // Back through dropout, layer norm and GELU of layer li - 1.
    const auto prev = li - 1;
    const auto& pl = params.mlp.layers[prev];
    const auto pbase = mlp_index(prev);
    dx = dx.cwiseProduct(t.mask[prev]);
    g[pbase + 2] += dx.cwiseProduct(t.normed[prev]);
    g[pbase + 3] += dx;
    const Eigen::VectorXd dn = dx.cwiseProduct(pl.gain.col(0));
    const auto n = static_cast<double>(dn.size());
    const double mean_dn = dn.sum() / n;
    const double mean_dn_x = dn.dot(t.normed[prev]) / n;
    const Eigen::VectorXd dg = t.inv_std[prev] * (dn.array() - mean_dn - t.normed[prev].array() * mean_dn_x).matrix();
    delta = dg.cwiseProduct(t.pre[prev].unaryExpr(&gelu_grad));
  }

  // delta is now dL/dz.
  const auto d = cp.w_l.rows();
  const Eigen::VectorXd ds = delta.head(d);
  const Eigen::VectorXd dc = delta.tail(d);
  const Eigen::VectorXd da_s = sample.h2 * ds;
  const Eigen::VectorXd da_c = sample.h1 * dc;
  const Eigen::VectorXd de_s = co.a_s.cwiseProduct((da_s.array() - co.a_s.dot(da_s)).matrix());
  const Eigen::VectorXd de_c = co.a_c.cwiseProduct((da_c.array() - co.a_c.dot(da_c)).matrix());
  g[3].noalias() += co.h_s * de_s;
  g[4].noalias() += co.h_c * de_c;
  const Eigen::MatrixXd dm_s = (cp.w_as * de_s.transpose()).cwiseProduct((1.0 - co.h_s.array().square()).matrix());
  const Eigen::MatrixXd dm_c = (cp.w_ac * de_c.transpose()).cwiseProduct((1.0 - co.h_c.array().square()).matrix());
  const Eigen::MatrixXd p_mat = cp.w_s * sample.h2.transpose();
  const Eigen::MatrixXd q_mat = cp.w_c * sample.h1.transpose();
  const Eigen::MatrixXd dp = dm_s + dm_c * co.f;
  const Eigen::MatrixXd dq = dm_s * co.f.transpose() + dm_c;
  const Eigen::MatrixXd df = q_mat.transpose() * dm_s + dm_c.transpose() * p_mat;
  g[1].noalias() += dp * sample.h2;
  g[2].noalias() += dq * sample.h1;
  const Eigen::MatrixXd dpre_f = df.cwiseProduct((1.0 - co.f.array().square()).matrix());
  Eigen::MatrixXd right = dpre_f * sample.h2;
  if (deferred) {
    deferred->affinity_left.push_back(sample.h1);
    deferred->affinity_right.push_back(std::move(right));
  } else {
    g[0].noalias() += sample.h1.transpose() * right;
  }
  return loss;
}

}  // namespace

double predict(const VerifierParams& params, const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2) {
  const auto co = coattention_forward(h1, h2, params.coattention);
  return mlp_forward(co.z, params.mlp, Mode::kEval);
}

ClassWeights inverse_frequency_weights(std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = static_cast<std::ptrdiff_t>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw DataError("class weights need both classes present");
  const auto n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

void stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train fraction must lie in (0, 1)");
  train.clear();
  test.clear();
  std::mt19937_64 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    // Fisher-Yates with our own uniform draw so the split is library independent.
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

namespace {
double accuracy(const VerifierParams& params, std::span<const VerifierSample> data, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (auto i : idx) {
    const bool flag = predict(params, data[i].h1, data[i].h2) >= 0.5;
    correct += flag == (data[i].label == 1);
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

void round_to_float(VerifierParams& params) {
  for (auto* b : params.blocks()) *b = b->cast<float>().cast<double>();
}
}  // namespace

VerifierParams train_head(std::span<const VerifierSample> dataset, const TrainConfig& config, TrainReport* report) {
  if (config.stage != 1) {
    throw ConfigError("only stage 1 (frozen encoder) head training is supported; encoder fine-tuning lives with the provider");
  }
  if (dataset.empty()) throw DataError("verifier training set is empty");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.lr > 0)) throw ConfigError("bad verifier training config");
  std::vector<int> labels;
  for (const auto& s : dataset) labels.push_back(s.label);
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DataError("verifier training set contains a single class");
  }

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  stratified_split(labels, config.train_fraction, config.seed, rep.train_index, rep.test_index);
  std::vector<int> train_labels;
  for (auto i : rep.train_index) train_labels.push_back(labels[i]);
  rep.class_weights = inverse_frequency_weights(train_labels);

  auto dims = config.dims;
  dims.d = static_cast<int>(dataset.front().h1.cols());
  auto params = init_verifier(dims, config.seed);
  DropoutStream dropout{config.seed ^ 0x5bd1e995ULL};
  std::mt19937_64 order_rng(config.seed + 1);
  auto blocks = params.blocks();
  std::vector<Eigen::MatrixXd> acc;
  DeferredFactors deferred;
  for (const auto* b : blocks) acc.push_back(Eigen::MatrixXd::Zero(b->rows(), b->cols()));
  std::vector<std::size_t> order = rep.train_index;

  rep.epoch_loss.clear();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(order_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (auto& a : acc) a.setZero();
      for (std::size_t b = start; b < end; ++b) {
        epoch_loss += backprop(params, dataset[order[b]], rep.class_weights, Mode::kTrain, &dropout, acc, &deferred);
      }
      deferred.flush(acc);
      const double scale = config.lr / static_cast<double>(end - start);
      for (std::size_t k = 0; k < blocks.size(); ++k) *blocks[k] -= scale * acc[k];
    }
    rep.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (!std::isfinite(rep.epoch_loss.back())) {
      throw NumericError(fmt::format("verifier training diverged in epoch {}", epoch + 1));
    }
  }
  round_to_float(params);
  rep.train_accuracy = accuracy(params, dataset, rep.train_index);
  rep.test_accuracy = accuracy(params, dataset, rep.test_index);
  return params;
}

std::string summarize_history(std::span<const std::string> messages, int budget) {
  if (messages.empty()) return std::string(kNoPriorContact);
  std::string out;
  int words = 0;
  for (auto it = messages.rbegin(); it != messages.rend() && words < budget; ++it) {
    std::istringstream in(*it);
    for (std::string w; words < budget && in >> w; ++words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
  }
  return out.empty() ? std::string(kNoPriorContact) : out;
}

VerifierVerdict verify_pair(const ScoredInteraction& /*flagged*/, const ContentRequest& history_summary,
                            const ContentRequest& current, const EmbeddingProvider& provider,
                            const VerifierParams& params) {
  const auto h1 = provider.embed(history_summary);
  const auto h2 = provider.embed(current);
  VerifierVerdict v;
  v.p = predict(params, h1.rows.cast<double>(), h2.rows.cast<double>());
  v.flag = v.p >= 0.5;
  v.i_man = v.p;
  return v;
}

namespace {
constexpr std::string_view kHeadMagic = "SEGHEAD1";
}

void save_verifier(const VerifierParams& params, const std::string& path) {
  ByteWriter w;
  w.put_bytes(kHeadMagic);
  const auto blocks = params.blocks();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
  for (const auto* b : blocks) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b->rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b->cols()));
  }
  for (const auto* b : blocks) {
    const Eigen::MatrixXf f = b->cast<float>();
    w.put_floats(std::span(f.data(), static_cast<std::size_t>(f.size())));
  }
  w.put<double>(params.mlp.dropout);
  w.write_file(path);
}

VerifierParams load_verifier(const std::string& path) {
  auto r = ByteReader::from_file(path);
  if (r.get_bytes(kHeadMagic.size(), "magic") != kHeadMagic) r.fail("magic mismatch (not a verifier checkpoint)");
  const auto n = r.get<std::uint32_t>("block count");
  if (n != 19) r.fail(fmt::format("expected 19 parameter blocks, found {}", n));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto rows = r.get<std::uint32_t>("block rows");
    const auto cols = r.get<std::uint32_t>("block cols");
    shapes.emplace_back(rows, cols);
  }
  VerifierDims dims;
  dims.d = static_cast<int>(shapes[0].first);
  dims.k = static_cast<int>(shapes[1].first);
  dims.hidden = {static_cast<int>(shapes[5].first), static_cast<int>(shapes[9].first),
                 static_cast<int>(shapes[13].first)};
  auto params = shaped(dims);
  auto blocks = params.blocks();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& b = *blocks[i];
    if (b.rows() != shapes[i].first || b.cols() != shapes[i].second) {
      r.fail(fmt::format("block {} has shape {}x{}, inconsistent with d={} k={}", i, shapes[i].first, shapes[i].second,
                         dims.d, dims.k));
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::MatrixXf f(blocks[i]->rows(), blocks[i]->cols());
    r.get_floats(std::span(f.data(), static_cast<std::size_t>(f.size())), "block values");
    if (!f.allFinite()) r.fail(fmt::format("non-finite values in block {}", i));
    *blocks[i] = f.cast<double>();
  }
  params.mlp.dropout = r.get<double>("dropout rate");
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return params;
}

}  // namespace segraph
