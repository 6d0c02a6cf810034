#include "seqlink/candgen.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "seqlink/errors.hpp"
#include "seqlink/rng.hpp"

namespace {

using namespace seqlink;
using neural::Vec;

TEST(JaroWinkler, IdentityAndEmpty) {
  EXPECT_DOUBLE_EQ(candgen::jaro_winkler("France", "france"), 1.0);
  EXPECT_DOUBLE_EQ(candgen::jaro_winkler("", "abc"), 0.0);
  EXPECT_DOUBLE_EQ(candgen::jaro_winkler("", ""), 1.0);
}

TEST(JaroWinkler, ClassicTranspositionPair) {
  // m = 6 matches, 1 transposition, common prefix 3:
  // jaro = (1 + 1 + 5/6) / 3 = 0.944444, jw = jaro + 3 * 0.1 * (1 - jaro).
  EXPECT_NEAR(candgen::jaro_winkler("MARTHA", "MARHTA"), 0.961111, 1e-6);
}

TEST(JaroWinkler, KnownPairs) {
  EXPECT_NEAR(candgen::jaro_winkler("DWAYNE", "DUANE"), 0.84, 1e-6);
  EXPECT_NEAR(candgen::jaro_winkler("DIXON", "DICKSONX"), 0.813333, 1e-6);
}

TEST(JaroWinkler, SymmetricOverRandomStrings) {
  Rng rng = make_rng(21, "jw_prop");
  for (int trial = 0; trial < 200; ++trial) {
    std::string a, b;
    int la = uniform_int(rng, 0, 10), lb = uniform_int(rng, 0, 10);
    for (int i = 0; i < la; ++i) a.push_back(static_cast<char>('a' + uniform_int(rng, 0, 5)));
    for (int i = 0; i < lb; ++i) b.push_back(static_cast<char>('a' + uniform_int(rng, 0, 5)));
    double ab = candgen::jaro_winkler(a, b);
    EXPECT_DOUBLE_EQ(ab, candgen::jaro_winkler(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(candgen::jaro_winkler(a, a), 1.0);
  }
}

TEST(Levenshtein, KnownDistances) {
  EXPECT_EQ(candgen::levenshtein("kitten", "sitting"), 3);
  EXPECT_EQ(candgen::levenshtein("abc", "abc"), 0);
  EXPECT_EQ(candgen::levenshtein("", "abc"), 3);
}

corpus::KnowledgeBase small_kb() {
  corpus::KnowledgeBase kb;
  auto add = [&](const std::string& id, const std::string& title,
                 std::vector<std::string> desc, long long pv, Vec emb) {
    corpus::EntityRecord rec;
    rec.entity_id = id;
    rec.title = title;
    rec.description_tokens = std::move(desc);
    rec.pageview = pv;
    rec.embedding = std::move(emb);
    kb.add(rec);
  };
  Vec e1(3), e2(3), e3(3);
  e1 << 1, 0, 0;
  e2 << 0, 1, 0;
  e3 << 0, 0, 1;
  add("e_fr", "France", {"country", "europe"}, 5'000'000, e1);
  add("e_frb", "France", {"basketball", "team"}, 100'000, e2);
  add("e_jwa", "John Wayne Airport", {"airport", "california"}, 900'000, e3);
  kb.add_alias("France", "e_fr");
  kb.add_alias("France", "e_frb");
  kb.add_alias("john wayne airport", "e_jwa");
  return kb;
}

corpus::MentionOccurrence mention(const std::string& surface,
                                  std::vector<std::string> context = {}) {
  corpus::MentionOccurrence m;
  m.doc_id = "d";
  m.mention_id = "m";
  m.surface = surface;
  m.context_tokens = std::move(context);
  return m;
}

TEST(GenerateCandidates, ExactAliasMatchWins) {
  auto kb = small_kb();
  auto ids = candgen::generate_candidates(mention("france"), kb);
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(ids[0], "e_fr");
  EXPECT_EQ(ids[1], "e_frb");
}

TEST(GenerateCandidates, NgramFallbackStopsAtFirstHitLength) {
  auto kb = small_kb();
  auto ids = candgen::generate_candidates(mention("John Wayne Airport Terminal"), kb);
  ASSERT_EQ(ids.size(), 1u);  // hits at n = 3
  EXPECT_EQ(ids[0], "e_jwa");
}

TEST(GenerateCandidates, NoOverlapYieldsEmpty) {
  auto kb = small_kb();
  EXPECT_TRUE(candgen::generate_candidates(mention("zzz qqq"), kb).empty());
}

TEST(ComputeFeatures, IdentityTitleAndCentroidMatch) {
  auto kb = small_kb();
  corpus::EmbeddingTable words(3);
  Vec v(3);
  v << 1, 0, 0;
  words.insert("paris", v);
  auto m = mention("France", {"paris", corpus::kPadToken});
  auto f = candgen::compute_features(m, *kb.find("e_fr"), words);
  EXPECT_DOUBLE_EQ(f.string_sim, 1.0);
  EXPECT_NEAR(f.semantic_sim, 1.0, 1e-12);  // centroid equals the embedding
  EXPECT_EQ(f.edit_distance, 0);
  EXPECT_NEAR(f.pageview_log, std::log10(1.0 + 5e6), 1e-12);
}

TEST(ComputeFeatures, ZeroVectorsGiveZeroCosine) {
  auto kb = small_kb();
  corpus::EmbeddingTable words(3);
  auto m = mention("France", {"unknowntoken"});
  auto f = candgen::compute_features(m, *kb.find("e_fr"), words);
  EXPECT_DOUBLE_EQ(f.semantic_sim, 0.0);
}

TEST(ComputeFeatures, CommonWordCountIntersectsDescriptions) {
  auto kb = small_kb();
  corpus::EmbeddingTable words(3);
  auto m = mention("France", {"country", "talks", "europe", "europe"});
  auto f = candgen::compute_features(m, *kb.find("e_fr"), words);
  EXPECT_EQ(f.common_word_count, 2);
}

candgen::CandidateFeatures make_features(double ss, double sem, double pv, int ed, int cw) {
  candgen::CandidateFeatures f;
  f.string_sim = ss;
  f.semantic_sim = sem;
  f.pageview_log = pv;
  f.edit_distance = ed;
  f.common_word_count = cw;
  return f;
}

TEST(RankAndFilter, KeepsEverythingWhenKIsLarge) {
  Vec w = Vec::Ones(5);
  std::vector<std::pair<std::string, candgen::CandidateFeatures>> scored{
      {"b", make_features(0.2, 0, 1, 0, 0)},
      {"a", make_features(0.9, 0, 2, 0, 0)},
  };
  auto cs = candgen::rank_and_filter("m", scored, 10, w);
  ASSERT_EQ(cs.candidates.size(), 2u);
  EXPECT_EQ(cs.candidates[0].entity_id, "a");
  EXPECT_GE(cs.candidates[0].prior_score, cs.candidates[1].prior_score);
}

TEST(RankAndFilter, MonotoneInPageview) {
  Vec w = Vec::Ones(5);
  std::vector<std::pair<std::string, candgen::CandidateFeatures>> scored{
      {"low", make_features(0.5, 0.1, 1.0, 2, 1)},
      {"high", make_features(0.5, 0.1, 3.0, 2, 1)},
  };
  auto cs = candgen::rank_and_filter("m", scored, 2, w);
  EXPECT_EQ(cs.candidates[0].entity_id, "high");
}

TEST(RankAndFilter, MatchesBruteForceOracle) {
  Rng rng = make_rng(13, "rank_oracle");
  Vec w(5);
  w << 1.0, 0.5, 0.25, -0.75, 0.3;
  std::vector<std::pair<std::string, candgen::CandidateFeatures>> scored;
  std::vector<candgen::CandidateFeatures> feats;
  for (int i = 0; i < 6; ++i) {
    auto f = make_features(uniform_double(rng), uniform_range(rng, -1, 1),
                           uniform_range(rng, 0, 7), uniform_int(rng, 0, 9),
                           uniform_int(rng, 0, 5));
    scored.emplace_back("c" + std::to_string(i), f);
    feats.push_back(f);
  }
  // Oracle: normalize + score + exhaustive sort, written independently.
  auto normalized = candgen::normalize_features(feats);
  std::vector<std::pair<double, std::string>> oracle;
  for (int i = 0; i < 6; ++i) oracle.push_back({w.dot(normalized[i]), "c" + std::to_string(i)});
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  auto cs = candgen::rank_and_filter("m", scored, 3, w);
  ASSERT_EQ(cs.candidates.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(cs.candidates[i].entity_id, oracle[i].second);
    EXPECT_NEAR(cs.candidates[i].prior_score, oracle[i].first, 1e-12);
  }
}

TEST(RankAndFilter, OutputIsSubsetOfInput) {
  Rng rng = make_rng(14, "rank_subset");
  Vec w = Vec::Ones(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<std::string, candgen::CandidateFeatures>> scored;
    int n = uniform_int(rng, 0, 8);
    for (int i = 0; i < n; ++i)
      scored.emplace_back("c" + std::to_string(i),
                          make_features(uniform_double(rng), 0, uniform_double(rng), 0, 0));
    int k = uniform_int(rng, 1, 6);
    auto cs = candgen::rank_and_filter("m", scored, k, w);
    EXPECT_LE(static_cast<int>(cs.candidates.size()), k);
    for (const auto& c : cs.candidates) {
      bool found = std::any_of(scored.begin(), scored.end(),
                               [&](const auto& s) { return s.first == c.entity_id; });
      EXPECT_TRUE(found);
    }
  }
}

TEST(RankAndFilter, RejectsBadK) {
  Vec w = Vec::Ones(5);
  EXPECT_THROW(candgen::rank_and_filter("m", {}, 0, w), ConfigError);
}

corpus::Document doc_with_gold(const std::vector<std::pair<std::string, std::string>>& pairs) {
  corpus::Document doc;
  doc.doc_id = "d";
  doc.tokens = {"x"};
  int pos = 0;
  for (const auto& [mid, gold] : pairs) {
    corpus::MentionOccurrence m;
    m.doc_id = "d";
    m.mention_id = mid;
    m.surface = mid;
    m.position = 0;
    if (!gold.empty()) m.gold_entity_id = gold;
    doc.mentions.push_back(m);
    ++pos;
  }
  return doc;
}

candgen::CandidateMap candmap(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& sets) {
  candgen::CandidateMap out;
  for (const auto& [mid, ids] : sets) {
    candgen::CandidateSet cs;
    cs.mention_id = mid;
    cs.k = 10;
    double score = 1.0;
    for (const auto& id : ids) cs.candidates.push_back({id, score -= 0.01});
    out.emplace(mid, cs);
  }
  return out;
}

TEST(RecallAtK, GoldAlwaysFirstIsOne) {
  auto docs = std::vector<corpus::Document>{
      doc_with_gold({{"m1", "g1"}, {"m2", "g2"}})};
  auto cands = candmap({{"m1", {"g1", "x"}}, {"m2", {"g2", "y"}}});
  EXPECT_DOUBLE_EQ(candgen::recall_at_k(docs, cands, 1), 1.0);
}

TEST(RecallAtK, GoldNeverRetrievedIsZero) {
  auto docs = std::vector<corpus::Document>{doc_with_gold({{"m1", "g1"}})};
  auto cands = candmap({{"m1", {"a", "b"}}});
  EXPECT_DOUBLE_EQ(candgen::recall_at_k(docs, cands, 5), 0.0);
}

TEST(RecallAtK, CountsCoveredFraction) {
  auto docs = std::vector<corpus::Document>{
      doc_with_gold({{"m1", "g1"}, {"m2", "g2"}, {"m3", "g3"}, {"m4", "g4"}})};
  auto cands = candmap({{"m1", {"g1"}},
                        {"m2", {"x", "g2"}},
                        {"m3", {"x", "y", "g3"}},
                        {"m4", {"x", "y", "z"}}});
  EXPECT_DOUBLE_EQ(candgen::recall_at_k(docs, cands, 5), 0.75);
}

TEST(RecallAtK, NoGoldMentionsIsAnError) {
  auto docs = std::vector<corpus::Document>{doc_with_gold({{"m1", ""}})};
  auto cands = candmap({{"m1", {"a"}}});
  EXPECT_THROW(candgen::recall_at_k(docs, cands, 5), ValidationError);
}

TEST(RecallAtK, NonDecreasingInK) {
  Rng rng = make_rng(15, "recall_prop");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, std::string>> mentions;
    std::vector<std::pair<std::string, std::vector<std::string>>> sets;
    int n = uniform_int(rng, 1, 10);
    for (int i = 0; i < n; ++i) {
      std::string mid = "m" + std::to_string(i);
      std::string gold = "g" + std::to_string(i);
      mentions.push_back({mid, gold});
      std::vector<std::string> ids;
      int depth = uniform_int(rng, 0, 6);
      for (int d = 0; d < depth; ++d) ids.push_back("junk" + std::to_string(d));
      if (uniform_double(rng) < 0.8) ids.push_back(gold);
      sets.push_back({mid, ids});
    }
    auto docs = std::vector<corpus::Document>{doc_with_gold(mentions)};
    auto cands = candmap(sets);
    double prev = 0.0;
    for (int k = 1; k <= 8; ++k) {
      double r = candgen::recall_at_k(docs, cands, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(CandidateDump, RoundTrips) {
  auto cands = candmap({{"m1", {"a", "b"}}, {"m2", {}}});
  auto path = std::filesystem::temp_directory_path() / "seqlink_cands.jsonl";
  candgen::save_candidates(path, cands);
  auto loaded = candgen::load_candidates(path, 10);
  ASSERT_EQ(loaded.size(), 2u);
  ASSERT_EQ(loaded.at("m1").candidates.size(), 2u);
  EXPECT_EQ(loaded.at("m1").candidates[0].entity_id, "a");
  EXPECT_NEAR(loaded.at("m1").candidates[0].prior_score,
              cands.at("m1").candidates[0].prior_score, 1e-12);
  EXPECT_TRUE(loaded.at("m2").candidates.empty());
}

}  // namespace
