#include "seqlink/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "seqlink/errors.hpp"
#include "seqlink/rng.hpp"

namespace {

using namespace seqlink;
namespace fs = std::filesystem;

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "seqlink_corpus_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  os << content;
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  auto tokens = corpus::tokenize("The  quick, (brown) FOX!");
  ASSERT_EQ(tokens, (std::vector<std::string>{"the", "quick", "brown", "fox"}));
}

TEST(Tokenize, KeepsInnerPunctuation) {
  auto tokens = corpus::tokenize("don't stop-me ...");
  ASSERT_EQ(tokens, (std::vector<std::string>{"don't", "stop-me"}));
}

// Independent power iteration of the TextRank recurrence, kept deliberately
// naive: adjacency from scratch each sweep, no early exit tricks.
std::map<std::string, double> textrank_oracle(const std::vector<std::string>& tokens) {
  std::map<std::string, std::set<std::string>> adj;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == tokens[i + 1]) continue;
    adj[tokens[i]].insert(tokens[i + 1]);
    adj[tokens[i + 1]].insert(tokens[i]);
  }
  std::map<std::string, double> score;
  for (const auto& t : tokens) score[t] = 1.0;
  for (int iter = 0; iter < 100; ++iter) {
    std::map<std::string, double> next;
    double delta = 0.0;
    for (const auto& [v, s] : score) {
      double acc = 0.0;
      for (const auto& u : adj[v]) acc += score[u] / static_cast<double>(adj[u].size());
      next[v] = 0.15 + 0.85 * acc;
      delta = std::max(delta, std::abs(next[v] - score[v]));
    }
    score = next;
    if (delta < 1e-4) break;
  }
  return score;
}

TEST(TextRank, TwoNodeGraphConvergesToEqualUnitScores) {
  auto oracle = textrank_oracle({"alpha", "beta"});
  EXPECT_NEAR(oracle["alpha"], 1.0, 1e-3);
  EXPECT_NEAR(oracle["beta"], 1.0, 1e-3);
  auto out = corpus::compress_description({"alpha", "beta"}, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], "alpha");  // equal scores tie-break by first occurrence
  EXPECT_EQ(out[1], "beta");
}

TEST(TextRank, StarGraphHubScoresHighest) {
  // "hub a hub b hub c hub d" builds a star around "hub".
  std::vector<std::string> tokens = {"hub", "a", "hub", "b", "hub", "c", "hub", "d"};
  auto oracle = textrank_oracle(tokens);
  for (const auto& leaf : {"a", "b", "c", "d"}) EXPECT_GT(oracle["hub"], oracle[leaf]);
  auto out = corpus::compress_description(tokens, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], "hub");
}

TEST(TextRank, BudgetNotBindingReturnsAllDistinctTokens) {
  auto out = corpus::compress_description({"x", "y", "z"}, 10);
  EXPECT_EQ(out.size(), 3u);
}

TEST(TextRank, EmptyInputYieldsEmptyOutput) {
  EXPECT_TRUE(corpus::compress_description({}, 5).empty());
}

TEST(TextRank, BadBudgetThrows) {
  EXPECT_THROW(corpus::compress_description({"x"}, 0), ConfigError);
}

TEST(TextRank, DeterministicAndSubsetOfInput) {
  Rng rng = make_rng(7, "textrank_prop");
  std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> tokens;
    int n = uniform_int(rng, 0, 40);
    for (int i = 0; i < n; ++i) tokens.push_back(pool[uniform_int(rng, 0, 7)]);
    auto a = corpus::compress_description(tokens, 4);
    auto b = corpus::compress_description(tokens, 4);
    EXPECT_EQ(a, b);
    std::set<std::string> input(tokens.begin(), tokens.end());
    for (const auto& t : a) EXPECT_TRUE(input.count(t)) << t;
    EXPECT_LE(a.size(), 4u);
  }
}

TEST(ContextWindow, PadsToExactWindowSize) {
  std::vector<std::string> tokens = {"a", "b", "c", "d"};
  auto ctx = corpus::context_window(tokens, 1, 15);
  ASSERT_EQ(ctx.size(), 15u);
  EXPECT_EQ(ctx[0], "a");
  EXPECT_EQ(ctx[1], "c");
  EXPECT_EQ(ctx[2], "d");
  for (int i = 3; i < 15; ++i) EXPECT_EQ(ctx[i], corpus::kPadToken);
}

TEST(ContextWindow, ExcludesMentionTokenAndSplitsAround) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 30; ++i) tokens.push_back("w" + std::to_string(i));
  auto ctx = corpus::context_window(tokens, 15, 15);
  ASSERT_EQ(ctx.size(), 15u);
  EXPECT_EQ(ctx.front(), "w8");   // 7 before
  EXPECT_EQ(ctx[6], "w14");
  EXPECT_EQ(ctx[7], "w16");       // the mention token itself is skipped
  EXPECT_EQ(ctx.back(), "w23");   // 8 after
}

TEST(LoadCorpus, OrdersMentionsByPosition) {
  auto path = temp_dir() / "c1.jsonl";
  write_file(path, R"({"doc_id":"d1","tokens":["a","b","c","d","e"],"mentions":[)"
                   R"({"mention_id":"m3","surface":"e","position":4,"gold":"e3"},)"
                   R"({"mention_id":"m1","surface":"a","position":0,"gold":"e1"},)"
                   R"({"mention_id":"m2","surface":"c","position":2,"gold":null}]})"
                   "\n");
  auto docs = corpus::load_corpus(path);
  ASSERT_EQ(docs.size(), 1u);
  ASSERT_EQ(docs[0].mentions.size(), 3u);
  EXPECT_EQ(docs[0].mentions[0].mention_id, "m1");
  EXPECT_EQ(docs[0].mentions[1].mention_id, "m2");
  EXPECT_EQ(docs[0].mentions[2].mention_id, "m3");
  EXPECT_FALSE(docs[0].mentions[1].gold_entity_id.has_value());
  EXPECT_EQ(docs[0].mentions[2].gold_entity_id.value(), "e3");
}

TEST(LoadCorpus, EmptyFileYieldsEmptyList) {
  auto path = temp_dir() / "empty.jsonl";
  write_file(path, "");
  EXPECT_TRUE(corpus::load_corpus(path).empty());
}

TEST(LoadCorpus, OffsetOutOfRangeFails) {
  auto path = temp_dir() / "bad_offset.jsonl";
  write_file(path, R"({"doc_id":"d1","tokens":["a","b"],"mentions":[)"
                   R"({"mention_id":"m1","surface":"x","position":99,"gold":null}]})"
                   "\n");
  EXPECT_THROW(corpus::load_corpus(path), ValidationError);
}

TEST(LoadCorpus, MalformedLineNamesLineNumber) {
  auto path = temp_dir() / "bad_json.jsonl";
  write_file(path, "{\"doc_id\":\"d1\",\"tokens\":[],\"mentions\":[]}\nnot json\n");
  try {
    corpus::load_corpus(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, DuplicateMentionIdFails) {
  auto path = temp_dir() / "dup.jsonl";
  write_file(path, R"({"doc_id":"d1","tokens":["a","b"],"mentions":[)"
                   R"({"mention_id":"m1","surface":"a","position":0,"gold":null},)"
                   R"({"mention_id":"m1","surface":"b","position":1,"gold":null}]})"
                   "\n");
  EXPECT_THROW(corpus::load_corpus(path), ValidationError);
}

TEST(LoadCorpus, RoundTripIsStructurallyEqual) {
  Rng rng = make_rng(11, "corpus_roundtrip");
  std::vector<corpus::Document> docs;
  for (int d = 0; d < 5; ++d) {
    corpus::Document doc;
    doc.doc_id = "doc" + std::to_string(d);
    int n = uniform_int(rng, 1, 20);
    for (int i = 0; i < n; ++i) doc.tokens.push_back("tok" + std::to_string(i));
    int mentions = uniform_int(rng, 0, std::min(n, 4));
    for (int m = 0; m < mentions; ++m) {
      corpus::MentionOccurrence occ;
      occ.doc_id = doc.doc_id;
      occ.mention_id = "m" + std::to_string(m);
      occ.surface = "tok" + std::to_string(m);
      occ.position = m;
      if (uniform_double(rng) < 0.5) occ.gold_entity_id = "e" + std::to_string(m);
      doc.mentions.push_back(occ);
    }
    docs.push_back(doc);
  }
  auto path = temp_dir() / "roundtrip.jsonl";
  corpus::save_corpus(path, docs);
  auto loaded = corpus::load_corpus(path);
  ASSERT_EQ(loaded.size(), docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    EXPECT_EQ(loaded[d].doc_id, docs[d].doc_id);
    EXPECT_EQ(loaded[d].tokens, docs[d].tokens);
    ASSERT_EQ(loaded[d].mentions.size(), docs[d].mentions.size());
    for (std::size_t m = 0; m < docs[d].mentions.size(); ++m) {
      EXPECT_EQ(loaded[d].mentions[m].mention_id, docs[d].mentions[m].mention_id);
      EXPECT_EQ(loaded[d].mentions[m].surface, docs[d].mentions[m].surface);
      EXPECT_EQ(loaded[d].mentions[m].position, docs[d].mentions[m].position);
      EXPECT_EQ(loaded[d].mentions[m].gold_entity_id, docs[d].mentions[m].gold_entity_id);
    }
  }
}

TEST(Embeddings, ParsesAndFallsBackToZero) {
  auto path = temp_dir() / "emb.vec";
  write_file(path, "cup 0.5 -1.0 2.0\nmug 1.0 1.0 1.0\ncup 9.0 9.0 9.0\n");
  auto table = corpus::load_embeddings(path, 3);
  EXPECT_EQ(table.size(), 2u);
  EXPECT_DOUBLE_EQ(table.lookup("cup")[0], 0.5);  // duplicate keeps the first
  EXPECT_DOUBLE_EQ(table.lookup("cup")[2], 2.0);
  const auto& missing = table.lookup("zzz");
  EXPECT_EQ(missing.size(), 3);
  EXPECT_DOUBLE_EQ(missing.norm(), 0.0);
  EXPECT_EQ(table.size(), 2u);  // lookup of an unknown token never mutates
}

TEST(Embeddings, WrongFloatCountNamesLine) {
  auto path = temp_dir() / "emb_bad.vec";
  write_file(path, "ok 1 2 3\nshort 1 2\n");
  try {
    corpus::load_embeddings(path, 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, TooManyFloatsFails) {
  auto path = temp_dir() / "emb_long.vec";
  write_file(path, "tok 1 2 3 4\n");
  EXPECT_THROW(corpus::load_embeddings(path, 3), ParseError);
}

TEST(KnowledgeBase, AliasLookupIsCaseNormalized) {
  corpus::KnowledgeBase kb;
  corpus::EntityRecord rec;
  rec.entity_id = "e1";
  rec.title = "France";
  rec.embedding = neural::Vec::Zero(4);
  kb.add(rec);
  kb.add_alias("France", "e1");
  const auto* upper = kb.lookup_alias("France");
  const auto* lower = kb.lookup_alias("france");
  ASSERT_NE(upper, nullptr);
  ASSERT_NE(lower, nullptr);
  EXPECT_EQ(*upper, *lower);
}

TEST(KnowledgeBase, AliasToUnknownEntityFails) {
  corpus::KnowledgeBase kb;
  EXPECT_THROW(kb.add_alias("ghost", "nope"), ValidationError);
}

TEST(KnowledgeBase, LoadCompressesDescriptionsAndJoinsEmbeddings) {
  auto dir = temp_dir();
  write_file(dir / "kb.jsonl",
             R"({"entity_id":"e1","title":"Alpha","description":"alpha beta alpha beta gamma","pageview":123,"aliases":["Alpha","The Alpha"]})"
             "\n"
             R"({"entity_id":"e2","title":"Beta","description":"","pageview":null,"aliases":["Beta"]})"
             "\n");
  write_file(dir / "ents.vec", "e1 1 0\n");
  auto embs = corpus::load_embeddings(dir / "ents.vec", 2);
  auto kb = corpus::load_kb(dir / "kb.jsonl", 2, embs);
  ASSERT_EQ(kb.size(), 2u);
  EXPECT_LE(kb.find("e1")->description_tokens.size(), 2u);
  EXPECT_EQ(kb.find("e1")->pageview.value(), 123);
  EXPECT_FALSE(kb.find("e2")->pageview.has_value());
  EXPECT_EQ(kb.missing_embedding_count, 1);  // e2 has no embedding
  EXPECT_DOUBLE_EQ(kb.find("e2")->embedding.norm(), 0.0);

  // Processed round-trip keeps records intact.
  corpus::save_kb_processed(dir / "kbp.jsonl", kb);
  auto kb2 = corpus::load_kb_processed(dir / "kbp.jsonl", embs);
  EXPECT_EQ(kb2.size(), kb.size());
  EXPECT_EQ(kb2.find("e1")->description_tokens, kb.find("e1")->description_tokens);
  ASSERT_NE(kb2.lookup_alias("the alpha"), nullptr);
}

}  // namespace
