#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "segraph/calendar.hpp"
#include "segraph/ingest.hpp"

namespace segraph {

inline constexpr int kEncoderDim = 768;
inline constexpr int kMaxStubTokens = 128;

enum class Label { kLegit, kAttack, kUnknown };
std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct MessageRecord {
  std::string id;
  NodeId sender = 0;
  NodeId receiver = 0;
  Day day = 0;
  std::string subject;
  std::string body;
  Label label = Label::kUnknown;

  std::string text() const { return subject + "\n" + body; }
  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

// Message corpus indexed by pair and by sender. Records are kept in
// (day, id) order.
class MessageStore {
 public:
  MessageStore() = default;
  explicit MessageStore(std::vector<MessageRecord> records);

  void add(MessageRecord record);
  void add_all(std::span<const MessageRecord> records);
  const std::vector<MessageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const MessageRecord& by_id(const std::string& id) const;

  // Messages from sender to receiver on exactly `day`, id order.
  std::vector<const MessageRecord*> on_day(NodeId sender, NodeId receiver, Day day) const;
  // Up to `limit` most recent messages sent by `sender` strictly before `day`,
  // oldest first.
  std::vector<const MessageRecord*> sent_before(NodeId sender, Day day, std::size_t limit) const;
  // Both directions of the pair, strictly before `day`, ascending (day, id).
  std::vector<const MessageRecord*> between_before(NodeId a, NodeId b, Day day) const;

 private:
  void reindex();

  std::vector<MessageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<NodePair, std::vector<std::size_t>> by_pair_;
  std::map<NodeId, std::vector<std::size_t>> by_sender_;
};

std::vector<MessageRecord> get_message_history(const MessageStore& store, NodeId sender, NodeId receiver, Day day);

// CSV `id,sender,receiver,date,subject,body,label` with a header line.
MessageStore load_messages_csv(const std::string& path, const Calendar& calendar);
void save_messages_csv(const MessageStore& store, const Calendar& calendar, const std::string& path);

enum class Provenance : std::uint8_t { kStub, kFile, kHead };

struct EmbeddingSequence {
  Eigen::MatrixXf rows;  // L x d
  Provenance provenance = Provenance::kStub;

  int length() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
  // Message-level vector: mean over rows.
  Eigen::VectorXd pooled() const;
};

std::vector<std::string> tokenize(std::string_view text);

// Hashes each token (with the seed) into a unit-norm row; at most 128 rows.
// Text without tokens maps to a single sentinel row.
EmbeddingSequence stub_embed(std::string_view text, std::uint64_t seed, int dim = kEncoderDim);

class EmbeddingStore {
 public:
  void put(std::string key, EmbeddingSequence sequence);
  const EmbeddingSequence* find(const std::string& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, EmbeddingSequence>& entries() const { return entries_; }

 private:
  std::map<std::string, EmbeddingSequence> entries_;
};

// Binary layout: "SEGEMB01", u64 count, then per entry u32 key length, key
// bytes, u32 L, u32 d, L*d little-endian f32 (row-major). Entries sorted by key.
void save_embedding_file(const EmbeddingStore& store, const std::string& path);
// Validates shape (d == expected_dim, L >= 1) and finiteness; errors name the
// byte offset.
EmbeddingStore load_embedding_file(const std::string& path, int expected_dim = kEncoderDim);

// Lookup keys shared with the offline exporter.
std::string message_key(const std::string& message_id);
std::string history_key(NodeId sender, NodeId receiver, Day day);
std::string text_key(std::string_view text);

struct ContentRequest {
  std::string key;   // may be empty
  std::string text;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Throws UnresolvedContentError when the content cannot be resolved.
  virtual EmbeddingSequence embed(const ContentRequest& request) const = 0;
  virtual Eigen::VectorXd pooled(const ContentRequest& request) const { return embed(request).pooled(); }
  virtual int dim() const = 0;
};

class StubProvider final : public EmbeddingProvider {
 public:
  explicit StubProvider(std::uint64_t seed = 0, int dim = kEncoderDim) : seed_(seed), dim_(dim) {}
  EmbeddingSequence embed(const ContentRequest& request) const override;
  Eigen::VectorXd pooled(const ContentRequest& request) const override;
  int dim() const override { return dim_; }

 private:
  const Eigen::VectorXf& token_row(const std::string& token) const;

  std::uint64_t seed_;
  int dim_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Eigen::VectorXf> cache_;
};

// Resolves by key first, then by the text hash key.
class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(EmbeddingStore store, int dim = kEncoderDim) : store_(std::move(store)), dim_(dim) {}
  EmbeddingSequence embed(const ContentRequest& request) const override;
  int dim() const override { return dim_; }

 private:
  EmbeddingStore store_;
  int dim_;
};

}  // namespace segraph
