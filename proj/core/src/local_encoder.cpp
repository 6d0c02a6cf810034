#include "seqlink/local_encoder.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "seqlink/errors.hpp"

namespace seqlink::local_encoder {

using neural::Dense;
using neural::LstmCell;
using neural::Mat;
using neural::Vec;
using nlohmann::json;

namespace {

std::vector<Vec> embed_tokens(const std::vector<std::string>& tokens,
                              const corpus::EmbeddingTable& words) {
  std::vector<Vec> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(words.lookup(t));
  return out;
}

}  // namespace

LocalEncoder::LocalEncoder(const LocalDims& dims, std::uint64_t seed)
    : dims_(dims),
      context_lstm_([&] {
        Rng rng = make_rng(seed, "local/context_lstm");
        return LstmCell(store_, "local/context_lstm", dims.word_dim, dims.hidden, rng);
      }()),
      description_lstm_([&] {
        Rng rng = make_rng(seed, "local/description_lstm");
        return LstmCell(store_, "local/description_lstm", dims.word_dim, dims.hidden, rng);
      }()) {
  const int psi_in = dims_.hidden + dims_.hidden + dims_.entity_dim;
  Rng rng = make_rng(seed, "local/mlp");
  mlp_.emplace_back(store_, "local/mlp/0", psi_in, dims_.mlp_hidden, /*relu=*/true, rng);
  mlp_.emplace_back(store_, "local/mlp/1", dims_.mlp_hidden, dims_.mlp_hidden, /*relu=*/true,
                    rng);
  mlp_.emplace_back(store_, "local/mlp/head", dims_.mlp_hidden, 1, /*relu=*/false, rng);
}

LocalEncoder LocalEncoder::attach(neural::ParamStore store, const LocalDims& dims) {
  LocalEncoder enc;
  enc.dims_ = dims;
  enc.store_ = std::move(store);
  enc.bind();
  return enc;
}

void LocalEncoder::bind() {
  context_lstm_ =
      LstmCell::attach(store_, "local/context_lstm", dims_.word_dim, dims_.hidden);
  description_lstm_ =
      LstmCell::attach(store_, "local/description_lstm", dims_.word_dim, dims_.hidden);
  const int psi_in = dims_.hidden + dims_.hidden + dims_.entity_dim;
  mlp_.clear();
  mlp_.push_back(Dense::attach(store_, "local/mlp/0", psi_in, dims_.mlp_hidden, true));
  mlp_.push_back(Dense::attach(store_, "local/mlp/1", dims_.mlp_hidden, dims_.mlp_hidden, true));
  mlp_.push_back(Dense::attach(store_, "local/mlp/head", dims_.mlp_hidden, 1, false));
}

Vec LocalEncoder::encode_mention(const corpus::MentionOccurrence& mention,
                                 const corpus::EmbeddingTable& words) const {
  return context_lstm_.encode(store_, embed_tokens(mention.context_tokens, words));
}

Vec LocalEncoder::encode_entity(const corpus::EntityRecord& entity,
                                const corpus::EmbeddingTable& words) const {
  Vec desc = entity.description_tokens.empty()
                 ? Vec::Zero(dims_.hidden)
                 : description_lstm_.encode(store_,
                                            embed_tokens(entity.description_tokens, words));
  if (entity.embedding.size() != dims_.entity_dim)
    throw DimensionError("entity " + entity.entity_id + " embedding has " +
                         std::to_string(entity.embedding.size()) + " dims, expected " +
                         std::to_string(dims_.entity_dim));
  Vec out(dims_.hidden + dims_.entity_dim);
  out << desc, entity.embedding;
  return out;
}

double LocalEncoder::similarity(const Vec& mention_vec, const Vec& entity_vec) const {
  if (mention_vec.size() + entity_vec.size() != mlp_.front().in_dim())
    throw DimensionError("similarity: concatenated input does not match MLP input dim");
  Mat x(1, mention_vec.size() + entity_vec.size());
  x.row(0).segment(0, mention_vec.size()) = mention_vec.transpose();
  x.row(0).segment(mention_vec.size(), entity_vec.size()) = entity_vec.transpose();
  for (const auto& layer : mlp_) x = layer.forward(store_, x);
  return x(0, 0);
}

// -- training ---------------------------------------------------------------

namespace {
struct MlpPass {
  std::vector<neural::DenseCache> caches;
};
}  // namespace

double LocalEncoder::pair_loss_and_grads(const corpus::MentionOccurrence& mention,
                                         const corpus::EntityRecord& gold,
                                         const corpus::EntityRecord& negative,
                                         const corpus::EmbeddingTable& words, double margin,
                                         double scale, double keep_prob, Rng* rng) {
  const int H = dims_.hidden;
  const bool training_dropout = rng != nullptr && keep_prob < 1.0;
  Rng unused_rng(0);
  Rng& drop_rng = rng ? *rng : unused_rng;

  auto psi_forward = [&](const Vec& mv, const Vec& ev, MlpPass& pass) {
    Mat x(1, mv.size() + ev.size());
    x.row(0).segment(0, mv.size()) = mv.transpose();
    x.row(0).segment(mv.size(), ev.size()) = ev.transpose();
    pass.caches.resize(mlp_.size());
    for (std::size_t l = 0; l < mlp_.size(); ++l)
      x = mlp_[l].forward(store_, x, pass.caches[l]);
    return x(0, 0);
  };
  auto psi_backward = [&](const MlpPass& pass, double dout) {
    Mat d(1, 1);
    d(0, 0) = dout;
    for (std::size_t l = mlp_.size(); l-- > 0;)
      d = mlp_[l].backward(store_, pass.caches[l], d);
    return Vec(d.row(0).transpose());
  };

  // Mention context encoding, shared by both sides of the pair.
  std::vector<neural::LstmStepCache> ctx_caches;
  neural::DropoutMask ctx_mask;
  Vec mv = context_lstm_.encode(store_, embed_tokens(mention.context_tokens, words),
                                ctx_caches);
  mv = neural::dropout_forward(mv, keep_prob, training_dropout, drop_rng, ctx_mask);

  struct EntitySide {
    std::vector<neural::LstmStepCache> caches;
    neural::DropoutMask mask;
    Vec vec;
    bool has_desc = false;
  };
  auto encode_side = [&](const corpus::EntityRecord& e) {
    EntitySide side;
    Vec desc = Vec::Zero(H);
    if (!e.description_tokens.empty()) {
      side.has_desc = true;
      desc = description_lstm_.encode(store_, embed_tokens(e.description_tokens, words),
                                      side.caches);
    }
    desc = neural::dropout_forward(desc, keep_prob, training_dropout, drop_rng, side.mask);
    side.vec = Vec(H + dims_.entity_dim);
    side.vec << desc, e.embedding;
    return side;
  };
  EntitySide pos = encode_side(gold);
  EntitySide neg = encode_side(negative);

  MlpPass pos_pass, neg_pass;
  double psi_pos = psi_forward(mv, pos.vec, pos_pass);
  double psi_neg = psi_forward(mv, neg.vec, neg_pass);
  double loss = neural::hinge_rank_loss(psi_pos, psi_neg, margin);
  if (loss <= 0.0) return 0.0;  // inactive pair: zero subgradient

  Vec dpos = psi_backward(pos_pass, -scale);
  Vec dneg = psi_backward(neg_pass, +scale);
  Vec dmv = dpos.segment(0, H) + dneg.segment(0, H);
  context_lstm_.backward_sequence(store_, ctx_caches,
                                  neural::dropout_backward(dmv, ctx_mask));
  if (pos.has_desc)
    description_lstm_.backward_sequence(
        store_, pos.caches, neural::dropout_backward(Vec(dpos.segment(H, H)), pos.mask));
  if (neg.has_desc)
    description_lstm_.backward_sequence(
        store_, neg.caches, neural::dropout_backward(Vec(dneg.segment(H, H)), neg.mask));
  return loss;
}

TrainStats LocalEncoder::train(const std::vector<corpus::Document>& docs,
                               const candgen::CandidateMap& candsets,
                               const corpus::KnowledgeBase& kb,
                               const corpus::EmbeddingTable& words,
                               const TrainOptions& opts) {
  struct PairItem {
    const corpus::MentionOccurrence* mention;
    const corpus::EntityRecord* gold;
    const corpus::EntityRecord* negative;
  };

  TrainStats stats;
  std::vector<PairItem> pairs;
  for (const auto& doc : docs) {
    for (const auto& m : doc.mentions) {
      if (!m.gold_entity_id) continue;
      auto it = candsets.find(m.mention_id);
      if (it == candsets.end()) continue;
      const auto& cands = it->second.candidates;
      const corpus::EntityRecord* gold = nullptr;
      std::vector<const corpus::EntityRecord*> negatives;
      for (const auto& c : cands) {
        const auto* rec = kb.find(c.entity_id);
        if (!rec) continue;
        if (c.entity_id == *m.gold_entity_id) {
          gold = rec;
        } else {
          negatives.push_back(rec);
        }
      }
      if (!gold) {
        ++stats.skipped_no_gold;
        continue;
      }
      for (const auto* neg : negatives) pairs.push_back({&m, gold, neg});
    }
  }
  stats.pair_count = static_cast<long>(pairs.size());
  if (pairs.empty()) {
    stats.epoch_losses.assign(std::max(opts.epochs, 0), 0.0);
    return stats;
  }

  Rng shuffle_rng = make_rng(opts.seed, "local/shuffle");
  Rng dropout_rng = make_rng(opts.seed, "local/dropout");
  neural::AdamConfig adam{.lr = opts.lr};

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += opts.batch_size) {
      std::size_t end = std::min(pairs.size(), start + opts.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = start; p < end; ++p) {
        epoch_loss += pair_loss_and_grads(*pairs[p].mention, *pairs[p].gold,
                                          *pairs[p].negative, words, opts.margin, inv_batch,
                                          opts.keep_prob, &dropout_rng);
      }
      store_.adam_step(adam);
    }
    stats.epoch_losses.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }

  // Violations against the frozen parameters after the final epoch.
  std::map<const corpus::MentionOccurrence*, Vec> mvecs;
  std::map<const corpus::EntityRecord*, Vec> evecs;
  for (const auto& pair : pairs) {
    if (!mvecs.count(pair.mention))
      mvecs[pair.mention] = encode_mention(*pair.mention, words);
    for (const auto* e : {pair.gold, pair.negative})
      if (!evecs.count(e)) evecs[e] = encode_entity(*e, words);
    double pos = similarity(mvecs[pair.mention], evecs[pair.gold]);
    double neg = similarity(mvecs[pair.mention], evecs[pair.negative]);
    if (neural::hinge_rank_loss(pos, neg, opts.margin) > 0.0) ++stats.margin_violations;
  }
  return stats;
}

std::optional<double> PsiTable::psi_max(const std::string& mention_id) const {
  auto it = scores.find(mention_id);
  if (it == scores.end() || it->second.empty()) return std::nullopt;
  double best = it->second.front().second;
  for (const auto& [id, psi] : it->second) best = std::max(best, psi);
  return best;
}

PsiTable score_all(const LocalEncoder& encoder, const std::vector<corpus::Document>& docs,
                   const candgen::CandidateMap& candsets, const corpus::KnowledgeBase& kb,
                   const corpus::EmbeddingTable& words) {
  PsiTable table;
  std::map<std::string, Vec> entity_vecs;
  for (const auto& doc : docs) {
    for (const auto& m : doc.mentions) {
      auto it = candsets.find(m.mention_id);
      if (it == candsets.end()) continue;
      Vec mv = encoder.encode_mention(m, words);
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& c : it->second.candidates) {
        const auto* rec = kb.find(c.entity_id);
        if (!rec) continue;
        auto [eit, fresh] = entity_vecs.try_emplace(c.entity_id);
        if (fresh) eit->second = encoder.encode_entity(*rec, words);
        scores.emplace_back(c.entity_id, encoder.similarity(mv, eit->second));
      }
      table.scores.emplace(m.mention_id, std::move(scores));
    }
  }
  return table;
}

void save_psi(const std::filesystem::path& path, const PsiTable& table) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& [mention_id, scores] : table.scores) {
    json arr = json::array();
    for (const auto& [entity_id, psi] : scores)
      arr.push_back({{"entity_id", entity_id}, {"psi", psi}});
    os << json{{"mention_id", mention_id}, {"scores", arr}}.dump() << '\n';
  }
}

PsiTable load_psi(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  PsiTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& js : j.at("scores"))
        scores.emplace_back(js.at("entity_id").get<std::string>(),
                            js.at("psi").get<double>());
      table.scores.emplace(j.at("mention_id").get<std::string>(), std::move(scores));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return table;
}

}  // namespace seqlink::local_encoder
