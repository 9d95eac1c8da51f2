#include "segraph/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "segraph/binary_io.hpp"
#include "segraph/csv.hpp"

namespace segraph {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kLegit:
      return "legit";
    case Label::kAttack:
      return "attack";
    case Label::kUnknown:
      break;
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "legit") return Label::kLegit;
  if (text == "attack") return Label::kAttack;
  if (text == "unknown" || text.empty()) return Label::kUnknown;
  throw DataError(fmt::format("unknown message label '{}'", text));
}

MessageStore::MessageStore(std::vector<MessageRecord> records) : records_(std::move(records)) { reindex(); }

void MessageStore::add(MessageRecord record) {
  records_.push_back(std::move(record));
  reindex();
}

void MessageStore::add_all(std::span<const MessageRecord> records) {
  records_.insert(records_.end(), records.begin(), records.end());
  reindex();
}

void MessageStore::reindex() {
  std::stable_sort(records_.begin(), records_.end(), [](const MessageRecord& a, const MessageRecord& b) {
    return std::tie(a.day, a.id) < std::tie(b.day, b.id);
  });
  by_id_.clear();
  by_pair_.clear();
  by_sender_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!by_id_.emplace(r.id, i).second) throw DataError(fmt::format("duplicate message id '{}'", r.id));
    by_pair_[{r.sender, r.receiver}].push_back(i);
    by_sender_[r.sender].push_back(i);
  }
}

const MessageRecord& MessageStore::by_id(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError(fmt::format("unknown message id '{}'", id));
  return records_[it->second];
}

std::vector<const MessageRecord*> MessageStore::on_day(NodeId sender, NodeId receiver, Day day) const {
  std::vector<const MessageRecord*> out;
  auto it = by_pair_.find({sender, receiver});
  if (it == by_pair_.end()) return out;
  for (auto i : it->second) {
    if (records_[i].day == day) out.push_back(&records_[i]);
  }
  return out;
}

std::vector<const MessageRecord*> MessageStore::sent_before(NodeId sender, Day day, std::size_t limit) const {
  std::vector<const MessageRecord*> out;
  auto it = by_sender_.find(sender);
  if (it == by_sender_.end()) return out;
  const auto& idx = it->second;
  auto end = std::lower_bound(idx.begin(), idx.end(), day,
                              [&](std::size_t i, Day d) { return records_[i].day < d; });
  const auto n = std::min<std::size_t>(limit, static_cast<std::size_t>(end - idx.begin()));
  for (auto p = end - static_cast<std::ptrdiff_t>(n); p != end; ++p) out.push_back(&records_[*p]);
  return out;
}

std::vector<const MessageRecord*> MessageStore::between_before(NodeId a, NodeId b, Day day) const {
  std::vector<std::size_t> idx;
  for (const NodePair& key : {NodePair{a, b}, NodePair{b, a}}) {
    if (a == b && key.first != a) continue;
    auto it = by_pair_.find(key);
    if (it == by_pair_.end()) continue;
    for (auto i : it->second) {
      if (records_[i].day < day) idx.push_back(i);
    }
    if (a == b) break;
  }
  std::sort(idx.begin(), idx.end());
  std::vector<const MessageRecord*> out;
  for (auto i : idx) out.push_back(&records_[i]);
  return out;
}

std::vector<MessageRecord> get_message_history(const MessageStore& store, NodeId sender, NodeId receiver, Day day) {
  std::vector<MessageRecord> out;
  for (const auto* m : store.between_before(sender, receiver, day)) out.push_back(*m);
  return out;
}

MessageStore load_messages_csv(const std::string& path, const Calendar& calendar) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read message corpus '{}'", path));
  std::vector<MessageRecord> records;
  std::vector<std::string> fields;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.starts_with("id,")) continue;
    if (!csv::split_line(line, fields) || fields.size() != 7) {
      throw DataError(fmt::format("{}:{}: expected 7 CSV fields", path, line_no));
    }
    MessageRecord r;
    r.id = fields[0];
    try {
      r.sender = static_cast<NodeId>(std::stoul(fields[1]));
      r.receiver = static_cast<NodeId>(std::stoul(fields[2]));
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: bad node id", path, line_no));
    }
    r.day = calendar.day_of(fields[3]);
    if (!calendar.contains(r.day)) throw DataError(fmt::format("{}:{}: date {} out of range", path, line_no, fields[3]));
    r.subject = fields[4];
    r.body = fields[5];
    r.label = parse_label(fields[6]);
    records.push_back(std::move(r));
  }
  return MessageStore(std::move(records));
}

void save_messages_csv(const MessageStore& store, const Calendar& calendar, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << "id,sender,receiver,date,subject,body,label\n";
  for (const auto& r : store.records()) {
    out << csv::escape(r.id) << ',' << r.sender << ',' << r.receiver << ',' << calendar.iso(r.day) << ','
        << csv::escape(r.subject) << ',' << csv::escape(r.body) << ',' << to_string(r.label) << '\n';
  }
}

Eigen::VectorXd EmbeddingSequence::pooled() const { return rows.cast<double>().colwise().mean().transpose(); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      current += static_cast<char>(std::tolower(uc));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::VectorXf hashed_row(std::string_view token, std::uint64_t seed, int dim) {
  std::uint64_t state = fnv1a(token, fnv1a(std::string_view(reinterpret_cast<const char*>(&seed), sizeof seed)));
  Eigen::VectorXd row(dim);
  for (int i = 0; i < dim; i += 2) {
    // Box-Muller on two 53-bit uniforms in (0, 1].
    const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    row[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < dim) row[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  row.normalize();
  return row.cast<float>();
}

constexpr std::string_view kEmptyToken = "<empty>";

}  // namespace

EmbeddingSequence stub_embed(std::string_view text, std::uint64_t seed, int dim) {
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.emplace_back(kEmptyToken);
  if (tokens.size() > static_cast<std::size_t>(kMaxStubTokens)) tokens.resize(kMaxStubTokens);
  EmbeddingSequence seq;
  seq.provenance = Provenance::kStub;
  seq.rows.resize(static_cast<Eigen::Index>(tokens.size()), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) seq.rows.row(static_cast<Eigen::Index>(i)) = hashed_row(tokens[i], seed, dim).transpose();
  return seq;
}

const Eigen::VectorXf& StubProvider::token_row(const std::string& token) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(token);
  if (it == cache_.end()) it = cache_.emplace(token, hashed_row(token, seed_, dim_)).first;
  return it->second;
}

EmbeddingSequence StubProvider::embed(const ContentRequest& request) const {
  auto tokens = tokenize(request.text);
  if (tokens.empty()) tokens.emplace_back(kEmptyToken);
  if (tokens.size() > static_cast<std::size_t>(kMaxStubTokens)) tokens.resize(kMaxStubTokens);
  EmbeddingSequence seq;
  seq.provenance = Provenance::kStub;
  seq.rows.resize(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) seq.rows.row(static_cast<Eigen::Index>(i)) = token_row(tokens[i]).transpose();
  return seq;
}

Eigen::VectorXd StubProvider::pooled(const ContentRequest& request) const {
  auto tokens = tokenize(request.text);
  if (tokens.empty()) tokens.emplace_back(kEmptyToken);
  if (tokens.size() > static_cast<std::size_t>(kMaxStubTokens)) tokens.resize(kMaxStubTokens);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim_);
  for (const auto& t : tokens) sum += token_row(t).cast<double>();
  return sum / static_cast<double>(tokens.size());
}

void EmbeddingStore::put(std::string key, EmbeddingSequence sequence) { entries_[std::move(key)] = std::move(sequence); }

const EmbeddingSequence* EmbeddingStore::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {
constexpr std::string_view kEmbeddingMagic = "SEGEMB01";
}

void save_embedding_file(const EmbeddingStore& store, const std::string& path) {
  ByteWriter w;
  w.put_bytes(kEmbeddingMagic);
  w.put<std::uint64_t>(store.size());
  for (const auto& [key, seq] : store.entries()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(key.size()));
    w.put_bytes(key);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(seq.length()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(seq.dim()));
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = seq.rows;
    w.put_floats(std::span(rm.data(), static_cast<std::size_t>(rm.size())));
  }
  w.write_file(path);
}

EmbeddingStore load_embedding_file(const std::string& path, int expected_dim) {
  auto r = ByteReader::from_file(path);
  if (r.get_bytes(kEmbeddingMagic.size(), "magic") != kEmbeddingMagic) r.fail("magic mismatch (not an embedding file)");
  const auto count = r.get<std::uint64_t>("entry count");
  EmbeddingStore store;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto key_len = r.get<std::uint32_t>("key length");
    if (key_len > r.remaining()) r.fail(fmt::format("corrupted key length {} in entry {}", key_len, e));
    auto key = r.get_bytes(key_len, "key");
    const auto rows = r.get<std::uint32_t>("sequence length");
    const auto dim = r.get<std::uint32_t>("embedding dim");
    if (rows == 0) r.fail(fmt::format("entry '{}' has zero rows", key));
    if (static_cast<int>(dim) != expected_dim) {
      r.fail(fmt::format("entry '{}' has dim {}, expected {}", key, dim, expected_dim));
    }
    if (static_cast<std::uint64_t>(rows) * dim * sizeof(float) > r.remaining()) {
      r.fail(fmt::format("corrupted length field: entry '{}' claims {} rows", key, rows));
    }
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, dim);
    const auto data_offset = r.offset();
    r.get_floats(std::span(rm.data(), static_cast<std::size_t>(rm.size())), "embedding rows");
    if (!rm.allFinite()) {
      throw DataError(fmt::format("{} at byte offset {}: non-finite values in entry '{}'", path, data_offset, key));
    }
    EmbeddingSequence seq;
    seq.rows = rm;
    seq.provenance = Provenance::kFile;
    store.put(std::move(key), std::move(seq));
  }
  if (!r.at_end()) r.fail("trailing bytes after last entry");
  return store;
}

std::string message_key(const std::string& message_id) { return "msg:" + message_id; }
std::string history_key(NodeId sender, NodeId receiver, Day day) {
  return fmt::format("hist:{}:{}:{}", sender, receiver, day);
}
std::string text_key(std::string_view text) { return fmt::format("text:{:016x}", fnv1a(text)); }

EmbeddingSequence FileProvider::embed(const ContentRequest& request) const {
  if (!request.key.empty()) {
    if (const auto* seq = store_.find(request.key)) return *seq;
  }
  if (const auto* seq = store_.find(text_key(request.text))) return *seq;
  throw UnresolvedContentError(fmt::format("embedding store has no entry for key '{}' or its text hash", request.key));
}

}  // namespace segraph
