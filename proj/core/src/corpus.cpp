#include "seqlink/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "seqlink/errors.hpp"

namespace seqlink::corpus {

using nlohmann::json;

void KnowledgeBase::add(EntityRecord record) {
  if (record.entity_id.empty()) throw ValidationError("kb: empty entity_id");
  if (record.pageview && *record.pageview < 0)
    throw ValidationError("kb: negative pageview for " + record.entity_id);
  entities_[record.entity_id] = std::move(record);
}

void KnowledgeBase::add_alias(std::string_view surface, const std::string& entity_id) {
  if (!entities_.count(entity_id))
    throw ValidationError("kb: alias refers to unknown entity " + entity_id);
  auto& list = alias_index_[normalize_surface(surface)];
  if (std::find(list.begin(), list.end(), entity_id) == list.end())
    list.push_back(entity_id);
}

const EntityRecord* KnowledgeBase::find(const std::string& entity_id) const {
  auto it = entities_.find(entity_id);
  return it == entities_.end() ? nullptr : &it->second;
}

const std::vector<std::string>* KnowledgeBase::lookup_alias(std::string_view surface) const {
  auto it = alias_index_.find(normalize_surface(surface));
  return it == alias_index_.end() ? nullptr : &it->second;
}

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim), zero_(neural::Vec::Zero(dim)) {
  if (dim < 1) throw ConfigError("embedding table: dimension must be positive");
}

void EmbeddingTable::insert(const std::string& token, neural::Vec v) {
  if (v.size() != dim_)
    throw DimensionError("embedding for '" + token + "' has " + std::to_string(v.size()) +
                         " dims, expected " + std::to_string(dim_));
  vectors_.emplace(token, std::move(v));  // keeps the first occurrence
}

const neural::Vec& EmbeddingTable::lookup(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? zero_ : it->second;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    std::size_t lo = start, hi = i;
    while (lo < hi && std::ispunct(static_cast<unsigned char>(text[lo]))) ++lo;
    while (hi > lo && std::ispunct(static_cast<unsigned char>(text[hi - 1]))) --hi;
    if (lo == hi) continue;
    std::string token;
    token.reserve(hi - lo);
    for (std::size_t p = lo; p < hi; ++p)
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[p]))));
    out.push_back(std::move(token));
  }
  return out;
}

std::string normalize_surface(std::string_view surface) {
  auto tokens = tokenize(surface);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> compress_description(const std::vector<std::string>& tokens,
                                              int budget) {
  if (budget < 1) throw ConfigError("compress_description: budget must be >= 1");
  if (tokens.empty()) return {};

  // Distinct tokens in first-occurrence order.
  std::vector<std::string> nodes;
  std::map<std::string, int> index;
  for (const auto& t : tokens) {
    if (index.emplace(t, static_cast<int>(nodes.size())).second) nodes.push_back(t);
  }
  const int n = static_cast<int>(nodes.size());

  std::vector<std::set<int>> adj(n);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    int a = index[tokens[i]], b = index[tokens[i + 1]];
    if (a == b) continue;
    adj[a].insert(b);
    adj[b].insert(a);
  }

  constexpr double kDamping = 0.85;
  constexpr double kTol = 1e-4;
  constexpr int kMaxIters = 100;
  std::vector<double> score(n, 1.0), next(n);
  for (int iter = 0; iter < kMaxIters; ++iter) {
    double max_delta = 0.0;
    for (int v = 0; v < n; ++v) {
      double acc = 0.0;
      for (int u : adj[v]) acc += score[u] / static_cast<double>(adj[u].size());
      next[v] = (1.0 - kDamping) + kDamping * acc;
      max_delta = std::max(max_delta, std::abs(next[v] - score[v]));
    }
    score.swap(next);
    if (max_delta < kTol) break;
  }

  std::vector<int> order(n);
  for (int v = 0; v < n; ++v) order[v] = v;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;  // first occurrence wins ties
  });

  std::vector<std::string> out;
  for (int v : order) {
    if (static_cast<int>(out.size()) >= budget) break;
    out.push_back(nodes[v]);
  }
  return out;
}

std::vector<std::string> context_window(const std::vector<std::string>& tokens, int position,
                                        int window) {
  if (window < 1) throw ConfigError("context_window: window must be >= 1");
  const int before = window / 2;
  const int n = static_cast<int>(tokens.size());
  std::vector<std::string> out;
  out.reserve(window);
  for (int p = std::max(0, position - before); p < position; ++p) out.push_back(tokens[p]);
  for (int p = position + 1; p < n && static_cast<int>(out.size()) < window; ++p)
    out.push_back(tokens[p]);
  while (static_cast<int>(out.size()) < window) out.emplace_back(kPadToken);
  return out;
}

void prepare_contexts(std::vector<Document>& docs, int window) {
  for (auto& doc : docs)
    for (auto& m : doc.mentions)
      m.context_tokens = context_window(doc.tokens, m.position, window);
}

namespace {

json parse_line(const std::string& line, const std::filesystem::path& path, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                     e.what());
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  return is;
}

}  // namespace

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  auto is = open_or_throw(path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    Document doc;
    try {
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& jm : j.at("mentions")) {
        MentionOccurrence m;
        m.doc_id = doc.doc_id;
        m.mention_id = jm.at("mention_id").get<std::string>();
        m.surface = jm.at("surface").get<std::string>();
        m.position = jm.at("position").get<int>();
        if (jm.contains("gold") && !jm.at("gold").is_null()) {
          m.gold_entity_id = jm.at("gold").get<std::string>();
          if (m.gold_entity_id->empty())
            throw ValidationError(path.filename().string() + " line " +
                                  std::to_string(line_no) + ": empty gold entity for mention " +
                                  m.mention_id);
        }
        doc.mentions.push_back(std::move(m));
      }
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    std::set<std::string> seen;
    for (const auto& m : doc.mentions) {
      if (m.position < 0 || m.position >= static_cast<int>(doc.tokens.size()))
        throw ValidationError(path.filename().string() + " line " + std::to_string(line_no) +
                              ": mention " + m.mention_id + " offset " +
                              std::to_string(m.position) + " out of range for " +
                              std::to_string(doc.tokens.size()) + " tokens");
      if (!seen.insert(m.mention_id).second)
        throw ValidationError(path.filename().string() + " line " + std::to_string(line_no) +
                              ": duplicate mention_id " + m.mention_id);
    }
    std::stable_sort(doc.mentions.begin(), doc.mentions.end(),
                     [](const auto& a, const auto& b) { return a.position < b.position; });
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& doc : docs) {
    json jm = json::array();
    for (const auto& m : doc.mentions) {
      jm.push_back({{"mention_id", m.mention_id},
                    {"surface", m.surface},
                    {"position", m.position},
                    {"gold", m.gold_entity_id ? json(*m.gold_entity_id) : json(nullptr)}});
    }
    json j{{"doc_id", doc.doc_id}, {"tokens", doc.tokens}, {"mentions", jm}};
    os << j.dump() << '\n';
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim) {
  auto is = open_or_throw(path);
  EmbeddingTable table(dim);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    neural::Vec v(dim);
    int got = 0;
    double value;
    while (got < dim && (ls >> value)) v[got++] = value;
    double extra;
    if (got != dim || (ls >> extra))
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) +
                       ": expected " + std::to_string(dim) + " floats after token '" + token +
                       "', got " + std::to_string(got + (got == dim ? 1 : 0)));
    table.insert(token, std::move(v));
  }
  return table;
}

namespace {

KnowledgeBase load_kb_impl(const std::filesystem::path& path, int keyword_budget,
                           bool processed, const EmbeddingTable& entity_embeddings) {
  auto is = open_or_throw(path);
  KnowledgeBase kb;
  std::string line;
  int line_no = 0;
  std::vector<std::pair<std::string, std::string>> aliases;  // (surface, entity)
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    EntityRecord rec;
    try {
      rec.entity_id = j.at("entity_id").get<std::string>();
      rec.title = j.at("title").get<std::string>();
      if (processed) {
        rec.description_tokens = j.at("description_tokens").get<std::vector<std::string>>();
      } else {
        auto tokens = tokenize(j.at("description").get<std::string>());
        rec.description_tokens = compress_description(tokens, keyword_budget);
      }
      if (j.contains("pageview") && !j.at("pageview").is_null())
        rec.pageview = j.at("pageview").get<long long>();
      for (const auto& a : j.at("aliases"))
        aliases.emplace_back(a.get<std::string>(), rec.entity_id);
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (entity_embeddings.contains(rec.entity_id)) {
      rec.embedding = entity_embeddings.lookup(rec.entity_id);
    } else {
      rec.embedding = neural::Vec::Zero(entity_embeddings.dim());
      ++kb.missing_embedding_count;
    }
    kb.add(std::move(rec));
  }
  for (const auto& [surface, entity_id] : aliases) kb.add_alias(surface, entity_id);
  return kb;
}

}  // namespace

KnowledgeBase load_kb(const std::filesystem::path& path, int keyword_budget,
                      const EmbeddingTable& entity_embeddings) {
  return load_kb_impl(path, keyword_budget, /*processed=*/false, entity_embeddings);
}

KnowledgeBase load_kb_processed(const std::filesystem::path& path,
                                const EmbeddingTable& entity_embeddings) {
  return load_kb_impl(path, 0, /*processed=*/true, entity_embeddings);
}

void save_kb_processed(const std::filesystem::path& path, const KnowledgeBase& kb) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  // Invert the alias index so each record carries its own aliases.
  std::map<std::string, std::vector<std::string>> by_entity;
  for (const auto& [surface, ids] : kb.alias_index())
    for (const auto& id : ids) by_entity[id].push_back(surface);
  for (const auto& [id, rec] : kb.entities()) {
    json j{{"entity_id", rec.entity_id},
           {"title", rec.title},
           {"description_tokens", rec.description_tokens},
           {"pageview", rec.pageview ? json(*rec.pageview) : json(nullptr)},
           {"aliases", by_entity.count(id) ? json(by_entity[id]) : json::array()}};
    os << j.dump() << '\n';
  }
}

}  // namespace seqlink::corpus
