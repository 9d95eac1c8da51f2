#include "segraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "segraph/binary_io.hpp"

namespace segraph {

namespace {

constexpr int kSummaryStats = 5;

void weekly_bins(std::span<const int> counts, Eigen::Ref<Eigen::VectorXd> out) {
  for (std::size_t t = 0; t < counts.size(); ++t) {
    const auto week = static_cast<Eigen::Index>(t / 7);
    if (week < out.size()) out[week] += counts[t];
  }
}

Eigen::MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  return m;
}

Eigen::VectorXd model_input(const DailySeries& series, const FeatureProjection& projection) {
  return project_features(series, projection).unaryExpr([](double x) { return std::log1p(x); });
}

Eigen::VectorXd normalize_or_axis(const Eigen::VectorXd& p) {
  const double n = p.norm();
  if (n > 0.0) return p / n;
  // A bias-free, signal-free node has no direction; pin it to the first axis.
  Eigen::VectorXd e = Eigen::VectorXd::Zero(p.size());
  e[0] = 1.0;
  return e;
}

double round_to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

struct Adam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<Eigen::MatrixXd> m, v;

  void step(std::vector<Eigen::Map<Eigen::MatrixXd>>& params, const std::vector<Eigen::MatrixXd>& grads) {
    if (m.empty()) {
      for (const auto& p : params) {
        m.emplace_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
        v.emplace_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grads[i];
      v[i] = b2 * v[i] + (1 - b2) * grads[i].cwiseProduct(grads[i]);
      params[i] -= (lr * (m[i] / c1).array() / ((v[i] / c2).array().sqrt() + eps)).matrix();
    }
  }
};

}  // namespace

Eigen::VectorXd project_features(const DailySeries& series, const FeatureProjection& projection) {
  if (projection.input_dim <= 0) throw ConfigError("feature projection input_dim must be positive");
  const auto counts = series.counts();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(projection.input_dim);
  switch (projection.mode) {
    case ProjectionMode::kWeeklyBin:
      weekly_bins(counts, out);
      break;
    case ProjectionMode::kTruncate:
      for (int i = 0; i < projection.input_dim && i < static_cast<int>(counts.size()); ++i) out[i] = counts[static_cast<std::size_t>(i)];
      break;
    case ProjectionMode::kIdentity:
      if (projection.input_dim != static_cast<int>(counts.size())) {
        throw ConfigError(fmt::format("identity projection needs input_dim == T ({})", counts.size()));
      }
      for (std::size_t i = 0; i < counts.size(); ++i) out[static_cast<Eigen::Index>(i)] = counts[i];
      break;
    case ProjectionMode::kWeeklySummary: {
      if (projection.input_dim <= kSummaryStats) throw ConfigError("weekly-summary projection needs input_dim > 5");
      const int weeks = projection.input_dim - kSummaryStats;
      weekly_bins(counts, out.head(weeks));
      double total = 0, peak = 0, active = 0, gap_sum = 0;
      int last = 0, gaps = 0;
      for (std::size_t t = 0; t < counts.size(); ++t) {
        if (counts[t] == 0) continue;
        const int day = static_cast<int>(t) + 1;
        total += counts[t];
        peak = std::max(peak, static_cast<double>(counts[t]));
        active += 1;
        if (last > 0) {
          gap_sum += day - last;
          ++gaps;
        }
        last = day;
      }
      out[weeks + 0] = total;
      out[weeks + 1] = peak;
      out[weeks + 2] = active;
      out[weeks + 3] = gaps > 0 ? gap_sum / gaps : 0.0;
      out[weeks + 4] = last;
      break;
    }
  }
  return out;
}

std::uint64_t SageModel::checksum() const {
  std::uint64_t h = kFnvOffset;
  auto mix = [&h](const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double x = m.data()[i];
      h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(&x), sizeof x), h);
    }
  };
  for (const auto& l : layers) {
    mix(l.self_weight);
    mix(l.neighbor_weight);
    mix(l.bias);
  }
  return h;
}

bool operator==(const SageModel& a, const SageModel& b) {
  if (a.projection.mode != b.projection.mode || a.projection.input_dim != b.projection.input_dim ||
      a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.self_weight.rows() != y.self_weight.rows() || x.self_weight.cols() != y.self_weight.cols() ||
        x.self_weight != y.self_weight || x.neighbor_weight != y.neighbor_weight || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

std::map<NodeId, std::vector<NodeId>> undirected_neighbors(const ActivityGraph& graph) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (auto id : graph.nodes()) adj[id];
  for (const auto& [pair, _] : graph.edges()) {
    if (pair.first == pair.second) continue;
    adj[pair.first].push_back(pair.second);
    adj[pair.second].push_back(pair.first);
  }
  for (auto& [_, list] : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Skeleton {
  std::vector<NodeId> ids;
  std::vector<std::vector<int>> adj;  // dense indices, sorted
};

Skeleton make_skeleton(const ActivityGraph& graph) {
  Skeleton s;
  const auto neighbors = undirected_neighbors(graph);
  std::map<NodeId, int> index;
  for (const auto& [id, _] : neighbors) {
    index[id] = static_cast<int>(s.ids.size());
    s.ids.push_back(id);
  }
  s.adj.resize(s.ids.size());
  for (const auto& [id, list] : neighbors) {
    auto& out = s.adj[static_cast<std::size_t>(index[id])];
    for (auto u : list) out.push_back(index[u]);
  }
  return s;
}

// Row-normalised aggregation matrix; nodes with more than `fanout` neighbours
// keep a degree-weighted sample without replacement (Efraimidis-Spirakis keys).
SpMat sample_mean_operator(const Skeleton& s, int fanout, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(s.ids.size());
  std::vector<Eigen::Triplet<double>> trips;
  std::uniform_real_distribution<double> unit(std::nextafter(0.0, 1.0), 1.0);
  std::vector<std::pair<double, int>> keyed;
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& nbrs = s.adj[static_cast<std::size_t>(v)];
    if (nbrs.empty()) continue;
    if (fanout <= 0 || static_cast<int>(nbrs.size()) <= fanout) {
      for (int u : nbrs) trips.emplace_back(v, u, 1.0 / static_cast<double>(nbrs.size()));
      continue;
    }
    keyed.clear();
    for (int u : nbrs) {
      const double w = static_cast<double>(s.adj[static_cast<std::size_t>(u)].size());
      keyed.emplace_back(std::pow(unit(rng), 1.0 / w), u);
    }
    std::partial_sort(keyed.begin(), keyed.begin() + fanout, keyed.end(), std::greater<>());
    for (int i = 0; i < fanout; ++i) trips.emplace_back(v, keyed[static_cast<std::size_t>(i)].second, 1.0 / fanout);
  }
  SpMat a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

struct Forward {
  std::vector<Eigen::MatrixXd> inputs;     // H_{l} fed into layer l
  std::vector<Eigen::MatrixXd> aggregated; // A_l H_l
  std::vector<Eigen::MatrixXd> pre;        // pre-activation P_l
  Eigen::MatrixXd out;                     // normalised embeddings
  Eigen::VectorXd norms;
};

Forward forward_batch(const SageModel& model, const Eigen::MatrixXd& x, const std::vector<SpMat>& ops) {
  Forward f;
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::MatrixXd agg = ops[l] * h;
    Eigen::MatrixXd p = h * layer.self_weight.transpose() + agg * layer.neighbor_weight.transpose();
    p.rowwise() += layer.bias.transpose();
    f.inputs.push_back(std::move(h));
    f.aggregated.push_back(std::move(agg));
    h = (l + 1 < model.layers.size()) ? Eigen::MatrixXd(p.cwiseMax(0.0)) : p;
    f.pre.push_back(std::move(p));
  }
  f.norms = h.rowwise().norm();
  f.out = h;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (f.norms[i] > 0) f.out.row(i) /= f.norms[i];
  }
  return f;
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

SageModel train_sage(const ActivityGraph& graph, const FeatureProjection& projection, const SageHyper& hyper,
                     SageTrainLog* log) {
  const Skeleton skel = make_skeleton(graph);
  const auto n = static_cast<Eigen::Index>(skel.ids.size());
  std::size_t edge_ends = 0;
  for (const auto& a : skel.adj) edge_ends += a.size();
  if (n == 0 || edge_ends == 0) throw DataError("train_sage: graph has no edges to draw positive pairs from");
  if (hyper.epochs < 0 || hyper.steps_per_epoch <= 0 || hyper.lr <= 0) throw ConfigError("invalid GNN hyper-parameters");

  std::mt19937_64 rng(hyper.seed);
  SageModel model;
  model.projection = projection;
  const std::array<int, 4> dims{projection.input_dim, hyper.hidden[0], hyper.hidden[1], hyper.output_dim};
  for (int l = 0; l < 3; ++l) {
    SageLayer layer;
    layer.self_weight = glorot(dims[l + 1], dims[l], rng);
    layer.neighbor_weight = glorot(dims[l + 1], dims[l], rng);
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    model.layers.push_back(std::move(layer));
  }

  Eigen::MatrixXd x(n, projection.input_dim);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = model_input(graph.series(skel.ids[static_cast<std::size_t>(i)]), projection).transpose();

  std::vector<int> anchors;
  std::vector<double> neg_weights(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto deg = skel.adj[static_cast<std::size_t>(i)].size();
    if (deg > 0) anchors.push_back(static_cast<int>(i));
    neg_weights[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(deg), 0.75);
  }
  std::discrete_distribution<int> negative_dist(neg_weights.begin(), neg_weights.end());

  std::vector<Eigen::Map<Eigen::MatrixXd>> params;
  for (auto& layer : model.layers) {
    params.emplace_back(layer.self_weight.data(), layer.self_weight.rows(), layer.self_weight.cols());
    params.emplace_back(layer.neighbor_weight.data(), layer.neighbor_weight.rows(), layer.neighbor_weight.cols());
    params.emplace_back(layer.bias.data(), layer.bias.size(), 1);
  }
  Adam adam;
  adam.lr = hyper.lr;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double epoch_loss = 0;
    for (int step = 0; step < hyper.steps_per_epoch; ++step) {
      std::vector<SpMat> ops;
      for (int l = 0; l < 3; ++l) ops.push_back(sample_mean_operator(skel, hyper.fanout[static_cast<std::size_t>(l)], rng));
      const Forward f = forward_batch(model, x, ops);

      // Context loss on cosine logits.
      Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n, f.out.cols());
      double loss = 0;
      const double scale = hyper.logit_scale;
      const double inv = 1.0 / static_cast<double>(anchors.size());
      for (int a : anchors) {
        const auto& nbrs = skel.adj[static_cast<std::size_t>(a)];
        const int p = nbrs[std::uniform_int_distribution<std::size_t>(0, nbrs.size() - 1)(rng)];
        const double sp = scale * f.out.row(a).dot(f.out.row(p));
        loss -= log_sigmoid(sp) * inv;
        const double gp = -(1.0 - sigmoid(sp)) * scale * inv;
        d_out.row(a) += gp * f.out.row(p);
        d_out.row(p) += gp * f.out.row(a);
        if (n <= 2) continue;
        for (int k = 0; k < hyper.negatives; ++k) {
          int q = negative_dist(rng);
          for (int tries = 0; (q == a || q == p) && tries < 16; ++tries) q = negative_dist(rng);
          if (q == a || q == p) continue;
          const double sn = scale * f.out.row(a).dot(f.out.row(q));
          loss -= log_sigmoid(-sn) * inv;
          const double gn = sigmoid(sn) * scale * inv;
          d_out.row(a) += gn * f.out.row(q);
          d_out.row(q) += gn * f.out.row(a);
        }
      }
      epoch_loss += loss / hyper.steps_per_epoch;

      // Back through the L2 normalisation.
      Eigen::MatrixXd d_h(n, f.out.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (f.norms[i] <= 0) {
          d_h.row(i).setZero();
          continue;
        }
        const auto z = f.out.row(i);
        d_h.row(i) = (d_out.row(i) - z * z.dot(d_out.row(i))) / f.norms[i];
      }

      std::vector<Eigen::MatrixXd> grads(9);
      for (int l = 2; l >= 0; --l) {
        const auto& layer = model.layers[static_cast<std::size_t>(l)];
        Eigen::MatrixXd d_p = d_h;
        if (l < 2) d_p = d_p.cwiseProduct((f.pre[static_cast<std::size_t>(l)].array() > 0).cast<double>().matrix());
        grads[static_cast<std::size_t>(3 * l + 0)] = d_p.transpose() * f.inputs[static_cast<std::size_t>(l)];
        grads[static_cast<std::size_t>(3 * l + 1)] = d_p.transpose() * f.aggregated[static_cast<std::size_t>(l)];
        grads[static_cast<std::size_t>(3 * l + 2)] = d_p.colwise().sum().transpose();
        if (l > 0) {
          Eigen::MatrixXd d_agg = d_p * layer.neighbor_weight;
          d_h = d_p * layer.self_weight + Eigen::MatrixXd(ops[static_cast<std::size_t>(l)].transpose() * d_agg);
        }
      }
      adam.step(params, grads);
    }
    if (log != nullptr) log->epoch_loss.push_back(epoch_loss);
  }

  // Parameters are persisted as 32-bit floats; round now so a checkpoint
  // round-trip reproduces the trained model exactly.
  for (auto& layer : model.layers) {
    layer.self_weight = layer.self_weight.unaryExpr(&round_to_float);
    layer.neighbor_weight = layer.neighbor_weight.unaryExpr(&round_to_float);
    layer.bias = layer.bias.unaryExpr(&round_to_float);
  }
  return model;
}

const Eigen::VectorXd& EmbeddingTable::at(NodeId id) const {
  auto it = table_.find(id);
  if (it == table_.end()) throw DataError(fmt::format("no embedding for node {}", id));
  return it->second;
}

EmbeddingTable embed_nodes(const SageModel& model, const ActivityGraph& graph, std::span<const NodeId> nodes) {
  for (auto id : nodes) {
    if (!graph.has_node(id)) throw DataError(fmt::format("embed_nodes: unknown node {}", id));
  }
  const auto adj = undirected_neighbors(graph);
  const auto layers = model.layers.size();

  // need[l] = nodes whose layer-l input representation is required.
  std::vector<std::set<NodeId>> need(layers + 1);
  need[layers].insert(nodes.begin(), nodes.end());
  for (std::size_t l = layers; l > 0; --l) {
    need[l - 1] = need[l];
    for (auto v : need[l]) {
      const auto& nb = adj.at(v);
      need[l - 1].insert(nb.begin(), nb.end());
    }
  }

  std::map<NodeId, Eigen::VectorXd> h;
  for (auto v : need[0]) h[v] = model_input(graph.series(v), model.projection);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& layer = model.layers[l];
    std::map<NodeId, Eigen::VectorXd> next;
    for (auto v : need[l + 1]) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(layer.neighbor_weight.cols());
      const auto& nb = adj.at(v);
      for (auto u : nb) mean += h.at(u);
      if (!nb.empty()) mean /= static_cast<double>(nb.size());
      Eigen::VectorXd p = layer.self_weight * h.at(v);
      p.noalias() += layer.neighbor_weight * mean;
      p += layer.bias;
      if (l + 1 < layers) p = p.cwiseMax(0.0);
      next[v] = std::move(p);
    }
    h = std::move(next);
  }

  EmbeddingTable table;
  for (auto v : nodes) table.set(v, normalize_or_axis(h.at(v)));
  return table;
}

EmbeddingTable embed_all(const SageModel& model, const ActivityGraph& graph) {
  const auto ids = graph.nodes();
  return embed_nodes(model, graph, ids);
}

double cosine_sim01(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero vector");
  if (a.size() != b.size()) throw NumericError("cosine similarity of mismatched dimensions");
  return std::clamp(a.dot(b) / (na * nb), 0.0, 1.0);
}

namespace {
constexpr std::string_view kModelMagic = "SEGSAGE1";
constexpr std::uint32_t kModelVersion = 1;

void put_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<float>(static_cast<float>(m(i, j)));
}

Eigen::MatrixXd get_matrix(ByteReader& r, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const float v = r.get<float>("weight");
      if (!std::isfinite(v)) r.fail("non-finite weight");
      m(i, j) = v;
    }
  return m;
}
}  // namespace

void save_model(const SageModel& model, const std::string& path) {
  ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.projection.mode));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.layers.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.input_dim()));
  for (const auto& l : model.layers) w.put<std::uint32_t>(static_cast<std::uint32_t>(l.self_weight.rows()));
  for (const auto& l : model.layers) {
    put_matrix(w, l.self_weight);
    put_matrix(w, l.neighbor_weight);
    put_matrix(w, l.bias);
  }
  w.write_file(path);
}

SageModel load_model(const std::string& path) {
  auto r = ByteReader::from_file(path);
  if (r.get_bytes(kModelMagic.size(), "magic") != kModelMagic) r.fail("not a GNN checkpoint (magic mismatch)");
  if (r.get<std::uint32_t>("version") != kModelVersion) r.fail("unsupported GNN checkpoint version");
  SageModel model;
  const auto mode = r.get<std::uint32_t>("projection mode");
  if (mode > static_cast<std::uint32_t>(ProjectionMode::kIdentity)) r.fail("unknown projection mode");
  model.projection.mode = static_cast<ProjectionMode>(mode);
  const auto nlayers = r.get<std::uint32_t>("layer count");
  if (nlayers == 0 || nlayers > 16) r.fail("implausible layer count");
  std::vector<Eigen::Index> dims{static_cast<Eigen::Index>(r.get<std::uint32_t>("input dim"))};
  for (std::uint32_t l = 0; l < nlayers; ++l) dims.push_back(r.get<std::uint32_t>("layer dim"));
  model.projection.input_dim = static_cast<int>(dims[0]);
  for (std::uint32_t l = 0; l < nlayers; ++l) {
    SageLayer layer;
    layer.self_weight = get_matrix(r, dims[l + 1], dims[l]);
    layer.neighbor_weight = get_matrix(r, dims[l + 1], dims[l]);
    layer.bias = get_matrix(r, dims[l + 1], 1).col(0);
    model.layers.push_back(std::move(layer));
  }
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return model;
}

}  // namespace segraph
