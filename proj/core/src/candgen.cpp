#include "seqlink/candgen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "seqlink/errors.hpp"

namespace seqlink::candgen {

using nlohmann::json;

neural::Vec feature_vector(const CandidateFeatures& f) {
  neural::Vec v(kFeatureCount);
  v << f.string_sim, f.semantic_sim, f.pageview_log, static_cast<double>(f.edit_distance),
      static_cast<double>(f.common_word_count);
  return v;
}

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace

double jaro_winkler(std::string_view a_raw, std::string_view b_raw) {
  std::string a = lower(a_raw), b = lower(b_raw);
  if (a == b) return 1.0;
  const int la = static_cast<int>(a.size()), lb = static_cast<int>(b.size());
  if (la == 0 || lb == 0) return 0.0;

  const int window = std::max(0, std::max(la, lb) / 2 - 1);
  std::vector<bool> matched_a(la, false), matched_b(lb, false);
  int matches = 0;
  for (int i = 0; i < la; ++i) {
    int lo = std::max(0, i - window), hi = std::min(lb - 1, i + window);
    for (int j = lo; j <= hi; ++j) {
      if (matched_b[j] || a[i] != b[j]) continue;
      matched_a[i] = matched_b[j] = true;
      ++matches;
      break;
    }
  }
  if (matches == 0) return 0.0;

  int transpositions = 0;
  for (int i = 0, j = 0; i < la; ++i) {
    if (!matched_a[i]) continue;
    while (!matched_b[j]) ++j;
    if (a[i] != b[j]) ++transpositions;
    ++j;
  }
  transpositions /= 2;

  const double m = matches;
  double jaro = (m / la + m / lb + (m - transpositions) / m) / 3.0;

  int prefix = 0;
  for (int i = 0; i < std::min({la, lb, 4}); ++i) {
    if (a[i] != b[i]) break;
    ++prefix;
  }
  return jaro + prefix * 0.1 * (1.0 - jaro);
}

int levenshtein(std::string_view a_raw, std::string_view b_raw) {
  std::string a = lower(a_raw), b = lower(b_raw);
  const int la = static_cast<int>(a.size()), lb = static_cast<int>(b.size());
  std::vector<int> prev(lb + 1), cur(lb + 1);
  for (int j = 0; j <= lb; ++j) prev[j] = j;
  for (int i = 1; i <= la; ++i) {
    cur[0] = i;
    for (int j = 1; j <= lb; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    prev.swap(cur);
  }
  return prev[lb];
}

std::vector<std::string> generate_candidates(const corpus::MentionOccurrence& mention,
                                             const corpus::KnowledgeBase& kb) {
  if (const auto* exact = kb.lookup_alias(mention.surface)) return *exact;

  auto words = corpus::tokenize(mention.surface);
  const int len = static_cast<int>(words.size());
  for (int n = len - 1; n >= 1; --n) {
    std::vector<std::string> hits;
    std::set<std::string> seen;
    for (int start = 0; start + n <= len; ++start) {
      std::string gram;
      for (int w = start; w < start + n; ++w) {
        if (w > start) gram.push_back(' ');
        gram += words[w];
      }
      if (const auto* list = kb.lookup_alias(gram)) {
        for (const auto& id : *list)
          if (seen.insert(id).second) hits.push_back(id);
      }
    }
    if (!hits.empty()) return hits;
  }
  return {};
}

CandidateFeatures compute_features(const corpus::MentionOccurrence& mention,
                                   const corpus::EntityRecord& entity,
                                   const corpus::EmbeddingTable& words) {
  CandidateFeatures f;
  f.string_sim = jaro_winkler(entity.title, mention.surface);
  f.edit_distance = levenshtein(entity.title, mention.surface);

  neural::Vec centroid = neural::Vec::Zero(words.dim());
  int counted = 0;
  for (const auto& tok : mention.context_tokens) {
    if (tok == corpus::kPadToken) continue;
    centroid += words.lookup(tok);
    ++counted;
  }
  if (counted > 0) centroid /= static_cast<double>(counted);
  double cn = centroid.norm(), en = entity.embedding.norm();
  if (cn > 0.0 && en > 0.0)
    f.semantic_sim = std::clamp(centroid.dot(entity.embedding) / (cn * en), -1.0, 1.0);

  f.pageview_log = std::log10(1.0 + static_cast<double>(entity.pageview.value_or(0)));

  std::set<std::string> ctx(mention.context_tokens.begin(), mention.context_tokens.end());
  ctx.erase(corpus::kPadToken);
  std::set<std::string> desc(entity.description_tokens.begin(),
                             entity.description_tokens.end());
  f.common_word_count = static_cast<int>(
      std::count_if(desc.begin(), desc.end(), [&](const auto& t) { return ctx.count(t); }));
  return f;
}

std::vector<neural::Vec> normalize_features(const std::vector<CandidateFeatures>& feats) {
  std::vector<neural::Vec> raw;
  raw.reserve(feats.size());
  for (const auto& f : feats) raw.push_back(feature_vector(f));
  if (raw.empty()) return raw;
  neural::Vec mins = raw.front(), maxs = raw.front();
  for (const auto& v : raw) {
    mins = mins.cwiseMin(v);
    maxs = maxs.cwiseMax(v);
  }
  for (auto& v : raw) {
    for (int d = 0; d < kFeatureCount; ++d) {
      double span = maxs[d] - mins[d];
      v[d] = span > 0.0 ? (v[d] - mins[d]) / span : 0.0;
    }
  }
  return raw;
}

CandidateSet rank_and_filter(const std::string& mention_id,
                             const std::vector<std::pair<std::string, CandidateFeatures>>& scored,
                             int k, const neural::Vec& weights) {
  if (k < 1) throw ConfigError("rank_and_filter: k must be >= 1");
  if (weights.size() != kFeatureCount)
    throw ConfigError("rank_and_filter: expected " + std::to_string(kFeatureCount) +
                      " weights, got " + std::to_string(weights.size()));

  std::vector<CandidateFeatures> feats;
  feats.reserve(scored.size());
  for (const auto& [id, f] : scored) feats.push_back(f);
  auto normalized = normalize_features(feats);

  std::vector<Candidate> ranked;
  ranked.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i)
    ranked.push_back({scored[i].first, weights.dot(normalized[i])});
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.prior_score != b.prior_score) return a.prior_score > b.prior_score;
    return a.entity_id < b.entity_id;
  });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
  return CandidateSet{mention_id, std::move(ranked), k};
}

double recall_at_k(const std::vector<corpus::Document>& docs, const CandidateMap& candsets,
                   int k) {
  long gold_total = 0, covered = 0;
  for (const auto& doc : docs) {
    for (const auto& m : doc.mentions) {
      if (!m.gold_entity_id) continue;
      ++gold_total;
      auto it = candsets.find(m.mention_id);
      if (it == candsets.end()) continue;
      const auto& cands = it->second.candidates;
      const int limit = std::min<int>(k, static_cast<int>(cands.size()));
      for (int i = 0; i < limit; ++i) {
        if (cands[i].entity_id == *m.gold_entity_id) {
          ++covered;
          break;
        }
      }
    }
  }
  if (gold_total == 0)
    throw ValidationError("recall_at_k: no gold-labeled mentions in the corpus");
  return static_cast<double>(covered) / static_cast<double>(gold_total);
}

CandidateMap generate_all(const std::vector<corpus::Document>& docs,
                          const corpus::KnowledgeBase& kb,
                          const corpus::EmbeddingTable& words, int k,
                          const neural::Vec& weights) {
  CandidateMap out;
  for (const auto& doc : docs) {
    for (const auto& m : doc.mentions) {
      auto ids = generate_candidates(m, kb);
      std::vector<std::pair<std::string, CandidateFeatures>> scored;
      scored.reserve(ids.size());
      for (const auto& id : ids) {
        const auto* rec = kb.find(id);
        if (!rec) continue;
        scored.emplace_back(id, compute_features(m, *rec, words));
      }
      out.emplace(m.mention_id, rank_and_filter(m.mention_id, scored, k, weights));
    }
  }
  return out;
}

void save_candidates(const std::filesystem::path& path, const CandidateMap& candsets) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& [mention_id, cs] : candsets) {
    json arr = json::array();
    for (const auto& c : cs.candidates)
      arr.push_back({{"entity_id", c.entity_id}, {"score", c.prior_score}});
    os << json{{"mention_id", mention_id}, {"candidates", arr}}.dump() << '\n';
  }
}

CandidateMap load_candidates(const std::filesystem::path& path, int k) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  CandidateMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      CandidateSet cs;
      cs.mention_id = j.at("mention_id").get<std::string>();
      cs.k = k;
      for (const auto& jc : j.at("candidates"))
        cs.candidates.push_back(
            {jc.at("entity_id").get<std::string>(), jc.at("score").get<double>()});
      out.emplace(cs.mention_id, std::move(cs));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

}  // namespace seqlink::candgen
