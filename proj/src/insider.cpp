#include "segraph/insider.hpp"

#include <cmath>

#include <fmt/format.h>

#include "segraph/binary_io.hpp"

namespace segraph {

void InsiderConfig::validate() const {
  if (n_est < 0) throw ConfigError(fmt::format("insider.n_est must be >= 0 (got {})", n_est));
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError(fmt::format("insider.threshold must lie in [0, 1] (got {})", threshold));
  }
}

double insider_threshold(const InsiderConfig& config) {
  config.validate();
  return config.threshold;
}

std::set<NodeId> training_nodes(const ActivityGraph& training_graph) {
  const auto ids = training_graph.nodes();
  return {ids.begin(), ids.end()};
}

namespace {
int send_days_before(const DailySeries& series, Day day) {
  int n = 0;
  const auto counts = series.counts();
  const auto end = std::min<std::size_t>(counts.size(), static_cast<std::size_t>(std::max(day - 1, 0)));
  for (std::size_t i = 0; i < end; ++i) n += counts[i] > 0;
  return n;
}
}  // namespace

bool is_established_internal_pair(const std::set<NodeId>& training, const ActivityGraph& graph, NodeId v, NodeId u,
                                  Day day, int n_est) {
  if (v == u || !training.contains(v) || !training.contains(u)) return false;
  if (!graph.has_node(v) || !graph.has_node(u)) return false;
  return send_days_before(graph.series(v), day) >= n_est && send_days_before(graph.series(u), day) >= n_est;
}

double pairwise_recipient_deviation(std::span<const int> pair_series, Day day) {
  return spike_score(pair_series, day).s1;
}

double pairwise_recipient_deviation(const ActivityGraph& graph, NodeId v, NodeId u, Day day) {
  std::vector<int> series(static_cast<std::size_t>(graph.horizon()), 0);
  if (const auto* days = graph.edge(v, u)) {
    for (const auto& [d, n] : *days) series[static_cast<std::size_t>(d - 1)] = n;
  }
  return pairwise_recipient_deviation(series, day);
}

InsiderProfile::InsiderProfile(NodeId node, int dim, std::size_t capacity)
    : node_(node), dim_(dim), capacity_(capacity) {
  if (capacity == 0) throw ConfigError("insider profile window must hold at least one message");
}

void InsiderProfile::push(const Eigen::VectorXd& pooled, Provenance provenance) {
  if (provenance == Provenance::kHead) {
    throw DataError("insider profiles take frozen provider embeddings, not verifier representations");
  }
  if (pooled.size() != dim_) {
    throw DataError(fmt::format("profile embedding has dim {}, expected {}", pooled.size(), dim_));
  }
  window_.push_back(pooled);
  if (window_.size() > capacity_) window_.pop_front();
}

Eigen::VectorXd InsiderProfile::centroid() const {
  if (window_.empty()) throw DataError(fmt::format("node {} has no sent messages in its profile", node_));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim_);
  for (const auto& v : window_) sum += v;
  return sum / static_cast<double>(window_.size());
}

InsiderProfile build_profile(const MessageStore& messages, const EmbeddingProvider& provider, NodeId node, Day day,
                             std::size_t capacity) {
  InsiderProfile profile(node, provider.dim(), capacity);
  for (const auto* m : messages.sent_before(node, day, capacity)) {
    profile.push(provider.embed({message_key(m->id), m->text()}));
  }
  return profile;
}

namespace {
constexpr std::string_view kProfileMagic = "SEGPROF1";
}

void save_profile(const InsiderProfile& profile, const std::string& path) {
  ByteWriter w;
  w.put_bytes(kProfileMagic);
  w.put<std::uint32_t>(profile.node());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(profile.dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(profile.size()));
  for (const auto& v : profile.window()) {
    const Eigen::VectorXf f = v.cast<float>();
    w.put_floats(std::span(f.data(), static_cast<std::size_t>(f.size())));
  }
  w.write_file(path);
}

InsiderProfile load_profile(const std::string& path) {
  auto r = ByteReader::from_file(path);
  if (r.get_bytes(kProfileMagic.size(), "magic") != kProfileMagic) r.fail("magic mismatch (not a profile file)");
  const auto node = r.get<std::uint32_t>("node id");
  const auto dim = r.get<std::uint32_t>("dim");
  const auto len = r.get<std::uint32_t>("window length");
  if (dim == 0 || len > kProfileWindow) r.fail(fmt::format("bad profile shape {}x{}", len, dim));
  InsiderProfile profile(node, static_cast<int>(dim));
  Eigen::VectorXf row(dim);
  for (std::uint32_t i = 0; i < len; ++i) {
    r.get_floats(std::span(row.data(), dim), "profile row");
    profile.push(row.cast<double>(), Provenance::kFile);
  }
  if (!r.at_end()) r.fail("trailing bytes after profile");
  return profile;
}

double linguistic_drift(const Eigen::VectorXd& current, Provenance provenance, const InsiderProfile& profile) {
  if (provenance == Provenance::kHead) {
    throw DataError("linguistic drift takes frozen provider embeddings, not verifier representations");
  }
  const auto c = profile.centroid();
  if (c.norm() == 0.0) throw NumericError(fmt::format("node {} has a zero profile centroid", profile.node()));
  return 1.0 - cosine_sim01(current, c / c.norm());
}

InsiderScore insider_score(double d_rec, double d_ling, double i_man, double s_struct, bool invert_struct) {
  const auto check = [](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) throw DataError(fmt::format("insider_score: {} = {} outside [0, 1]", name, x));
  };
  check(d_rec, "d_rec");
  check(d_ling, "d_ling");
  check(i_man, "i_man");
  check(s_struct, "s_struct");
  InsiderScore s{d_rec, d_ling, i_man, s_struct, 0.0};
  const double structural = invert_struct ? 1.0 - s_struct : s_struct;
  s.s_insider = 0.3 * d_rec + 0.4 * d_ling + 0.2 * i_man + 0.1 * structural;
  return s;
}

}  // namespace segraph
