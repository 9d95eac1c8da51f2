#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "segraph/providers.hpp"
#include "testutil.hpp"

namespace segraph {
namespace {

using testing::scratch_dir;

// Packs the documented layout by hand.
class Packer {
 public:
  template <class T>
  Packer& put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof v);
    return *this;
  }
  Packer& raw(std::string_view s) {
    bytes.insert(bytes.end(), s.begin(), s.end());
    return *this;
  }
  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::vector<char> bytes;
};

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EmbeddingSequence random_sequence(int rows, int dim, std::mt19937_64& rng) {
  EmbeddingSequence s;
  s.rows.resize(rows, dim);
  std::normal_distribution<float> n;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dim; ++j) s.rows(i, j) = n(rng);
  }
  return s;
}

TEST(Stub, DeterministicUnitRows) {
  const auto a = stub_embed("Please review the attached invoice today", 3, 64);
  const auto b = stub_embed("Please review the attached invoice today", 3, 64);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.length(), 6);
  for (int i = 0; i < a.length(); ++i) EXPECT_NEAR(a.rows.row(i).norm(), 1.0f, 1e-6);
  EXPECT_EQ(a.provenance, Provenance::kStub);
  EXPECT_NE(stub_embed("x", 4, 64).rows, stub_embed("x", 3, 64).rows);
}

TEST(Stub, TokenChangeChangesARow) {
  const std::vector<std::string> corpus{"quarterly budget meeting moved", "urgent wire transfer needed",
                                        "lunch on friday", "reset your password now", "gas contract draft"};
  std::set<std::vector<float>> rows;
  std::size_t tokens = 0;
  for (const auto& text : corpus) {
    const auto seq = stub_embed(text, 0, 32);
    tokens += static_cast<std::size_t>(seq.length());
    for (int i = 0; i < seq.length(); ++i) rows.insert(std::vector<float>(seq.rows.row(i).begin(), seq.rows.row(i).end()));
  }
  EXPECT_EQ(rows.size(), tokens);  // no two distinct tokens share a row
  EXPECT_NE(stub_embed("reset your password now", 0, 32).rows, stub_embed("reset your password later", 0, 32).rows);
}

TEST(Stub, LengthCapAndEmptyText) {
  std::string long_text;
  for (int i = 0; i < 300; ++i) long_text += "w" + std::to_string(i) + " ";
  EXPECT_EQ(stub_embed(long_text, 0, 8).length(), kMaxStubTokens);
  EXPECT_EQ(stub_embed("", 0, 8).length(), 1);
  EXPECT_EQ(stub_embed("?!", 0, 8).rows, stub_embed("", 0, 8).rows);
}

TEST(Stub, ProviderMatchesFreeFunction) {
  const StubProvider p(7, 16);
  const auto seq = p.embed({"k", "Hello there, team"});
  EXPECT_EQ(seq.rows, stub_embed("Hello there, team", 7, 16).rows);
  EXPECT_LT((p.pooled({"k", "Hello there, team"}) - seq.pooled()).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Tokenize, LowercasesAlnumRuns) {
  EXPECT_EQ(tokenize("Re: Q3-report, v2!"), (std::vector<std::string>{"re", "q3", "report", "v2"}));
}

TEST(EmbeddingFile, EmptyStore) {
  const auto path = (scratch_dir("emb_empty") / "e.bin").string();
  save_embedding_file(EmbeddingStore{}, path);
  EXPECT_EQ(load_embedding_file(path).size(), 0u);
  EXPECT_EQ(read_bytes(path).size(), 16u);
}

TEST(EmbeddingFile, HandPackedFileLoads) {
  const auto path = (scratch_dir("emb_hand") / "e.bin").string();
  Packer p;
  p.raw("SEGEMB01").put<std::uint64_t>(1).put<std::uint32_t>(5).raw("msg:a").put<std::uint32_t>(2).put<std::uint32_t>(3);
  for (float f : {1.f, 2.f, 3.f, 4.f, 5.f, 6.f}) p.put(f);
  p.write(path);
  const auto store = load_embedding_file(path, 3);
  const auto* seq = store.find("msg:a");
  ASSERT_NE(seq, nullptr);
  EXPECT_EQ(seq->rows(0, 2), 3.f);  // row-major on disk
  EXPECT_EQ(seq->rows(1, 0), 4.f);
  EXPECT_EQ(seq->provenance, Provenance::kFile);
}

TEST(EmbeddingFile, SavedBytesMatchLayout) {
  std::mt19937_64 rng(1);
  EmbeddingStore store;
  store.put("b", random_sequence(2, 4, rng));
  store.put("a", random_sequence(1, 4, rng));
  const auto path = (scratch_dir("emb_layout") / "e.bin").string();
  save_embedding_file(store, path);
  Packer p;
  p.raw("SEGEMB01").put<std::uint64_t>(2);
  for (const char* key : {"a", "b"}) {
    const auto& rows = store.find(key)->rows;
    p.put<std::uint32_t>(1).raw(key).put<std::uint32_t>(static_cast<std::uint32_t>(rows.rows())).put<std::uint32_t>(4);
    for (int i = 0; i < rows.rows(); ++i) {
      for (int j = 0; j < 4; ++j) p.put(rows(i, j));
    }
  }
  EXPECT_EQ(read_bytes(path), p.bytes);
}

TEST(EmbeddingFile, RoundTripAtFullWidth) {
  std::mt19937_64 rng(2);
  EmbeddingStore store;
  for (int i = 0; i < 5; ++i) store.put(message_key("m" + std::to_string(i)), random_sequence(1 + i, kEncoderDim, rng));
  const auto path = (scratch_dir("emb_rt") / "e.bin").string();
  save_embedding_file(store, path);
  const auto back = load_embedding_file(path);
  ASSERT_EQ(back.size(), store.size());
  for (const auto& [k, seq] : store.entries()) EXPECT_EQ(back.find(k)->rows, seq.rows) << k;
}

TEST(EmbeddingFile, CorruptLengthNamesOffset) {
  const auto path = (scratch_dir("emb_bad") / "e.bin").string();
  Packer p;
  p.raw("SEGEMB01").put<std::uint64_t>(1).put<std::uint32_t>(1).raw("k").put<std::uint32_t>(1000).put<std::uint32_t>(2);
  p.put(1.f).put(2.f);
  p.write(path);
  try {
    load_embedding_file(path, 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 29"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingFile, RejectsBadShapesAndValues) {
  const auto dir = scratch_dir("emb_shapes");
  auto one = [&](std::uint32_t rows, std::uint32_t dim, float value) {
    Packer p;
    p.raw("SEGEMB01").put<std::uint64_t>(1).put<std::uint32_t>(1).raw("k").put(rows).put(dim);
    for (std::uint32_t i = 0; i < rows * dim; ++i) p.put(value);
    p.write((dir / "e.bin").string());
    return (dir / "e.bin").string();
  };
  EXPECT_THROW(load_embedding_file(one(1, 3, 0.f), 2), DataError);
  EXPECT_THROW(load_embedding_file(one(0, 2, 0.f), 2), DataError);
  EXPECT_THROW(load_embedding_file(one(1, 2, std::numeric_limits<float>::quiet_NaN()), 2), DataError);
  EXPECT_NO_THROW(load_embedding_file(one(1, 2, 0.5f), 2));
  testing::write_text(dir / "x.bin", "NOTEMBED");
  EXPECT_THROW(load_embedding_file((dir / "x.bin").string(), 2), DataError);
  auto bytes = read_bytes(one(1, 2, 0.5f));
  bytes.push_back(0);
  std::ofstream((dir / "t.bin").string(), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_embedding_file((dir / "t.bin").string(), 2), DataError);
}

TEST(FileProviderTest, KeyThenTextFallback) {
  std::mt19937_64 rng(3);
  EmbeddingStore store;
  const auto by_key = random_sequence(2, 4, rng);
  const auto by_text = random_sequence(3, 4, rng);
  store.put("msg:1", by_key);
  store.put(text_key("hello"), by_text);
  const FileProvider p(store, 4);
  EXPECT_EQ(p.embed({"msg:1", "ignored"}).rows, by_key.rows);
  EXPECT_EQ(p.embed({"msg:2", "hello"}).rows, by_text.rows);
  EXPECT_THROW(p.embed({"msg:2", "bye"}), UnresolvedContentError);
}

TEST(Messages, HistoryIsStrictPastInOrder) {
  std::mt19937_64 rng(5);
  std::vector<MessageRecord> recs;
  for (int i = 0; i < 60; ++i) {
    recs.push_back({"m" + std::to_string(i), static_cast<NodeId>(rng() % 3), static_cast<NodeId>(rng() % 3),
                    1 + static_cast<Day>(rng() % 20), "s", "b", Label::kLegit});
  }
  const MessageStore store(recs);
  for (Day day = 1; day <= 21; ++day) {
    for (NodeId s = 0; s < 3; ++s) {
      for (NodeId r = 0; r < 3; ++r) {
        std::vector<MessageRecord> expect;
        for (const auto& m : recs) {
          const bool pair = (m.sender == s && m.receiver == r) || (m.sender == r && m.receiver == s);
          if (pair && m.day < day) expect.push_back(m);
        }
        std::sort(expect.begin(), expect.end(),
                  [](const auto& a, const auto& b) { return std::tie(a.day, a.id) < std::tie(b.day, b.id); });
        EXPECT_EQ(get_message_history(store, s, r, day), expect);
      }
    }
  }
}

TEST(Messages, StrictPastExample) {
  const MessageStore store({{"a", 1, 2, 3, "", "x", Label::kLegit}, {"b", 1, 2, 9, "", "y", Label::kLegit}});
  const auto h = get_message_history(store, 1, 2, 9);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].id, "a");
  EXPECT_TRUE(get_message_history(store, 1, 2, 3).empty());
  EXPECT_EQ(store.between_before(2, 1, 10).size(), 2u);
  EXPECT_EQ(store.on_day(1, 2, 9).size(), 1u);
}

TEST(Messages, CsvRoundTripWithQuoting) {
  const MessageStore store({{"a", 1, 2, 3, "Re: \"urgent\", now", "line one\nline two", Label::kAttack},
                            {"b", 2, 1, 4, "", "plain", Label::kLegit}});
  const auto path = (scratch_dir("msgcsv") / "m.csv").string();
  save_messages_csv(store, Calendar{}, path);
  auto expect = store.records();
  expect[0].body = "line one line two";  // records stay on one line
  EXPECT_EQ(load_messages_csv(path, Calendar{}).records(), expect);
}

TEST(Labels, ParseAndPrint) {
  for (auto l : {Label::kLegit, Label::kAttack, Label::kUnknown}) EXPECT_EQ(parse_label(to_string(l)), l);
}

}  // namespace
}  // namespace segraph
