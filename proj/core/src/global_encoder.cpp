#include "seqlink/global_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "seqlink/errors.hpp"

namespace seqlink::global_encoder {

using neural::Mat;
using neural::Vec;

std::vector<MentionSequence> segment_mentions(const std::string& doc_id,
                                              const std::vector<std::string>& mention_ids,
                                              int L) {
  if (L < 1) throw ConfigError("segment_mentions: L must be >= 1");
  std::vector<MentionSequence> out;
  for (std::size_t start = 0; start < mention_ids.size(); start += L) {
    MentionSequence seq;
    seq.doc_id = doc_id;
    std::size_t end = std::min(mention_ids.size(), start + L);
    seq.mention_ids.assign(mention_ids.begin() + start, mention_ids.begin() + end);
    seq.distinct = static_cast<int>(seq.mention_ids.size());
    while (seq.length() < L) seq.mention_ids.push_back(seq.mention_ids.back());
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<MentionSequence> segment_mentions(const corpus::Document& doc, int L) {
  std::vector<std::string> ids;
  ids.reserve(doc.mentions.size());
  for (const auto& m : doc.mentions) ids.push_back(m.mention_id);
  return segment_mentions(doc.doc_id, ids, L);
}

MentionSequence order_by_difficulty(const MentionSequence& seq,
                                    const std::map<std::string, double>& psi_max) {
  // Strip padding, sort the distinct mentions, then re-pad so padding always
  // repeats the final mention of the sorted order.
  std::vector<std::string> distinct(seq.mention_ids.begin(),
                                    seq.mention_ids.begin() + seq.distinct);
  for (const auto& id : distinct) {
    if (!psi_max.count(id))
      throw ValidationError("order_by_difficulty: no psi_max for mention " + id);
  }
  std::stable_sort(distinct.begin(), distinct.end(), [&](const auto& a, const auto& b) {
    return psi_max.at(a) > psi_max.at(b);
  });

  MentionSequence out;
  out.doc_id = seq.doc_id;
  out.mention_ids = std::move(distinct);
  out.distinct = static_cast<int>(out.mention_ids.size());
  while (out.length() < seq.length()) out.mention_ids.push_back(out.mention_ids.back());
  return out;
}

GlobalEncoder::GlobalEncoder(int mention_dim, int entity_vec_dim, int hidden,
                             std::uint64_t seed)
    : mention_dim_(mention_dim),
      entity_vec_dim_(entity_vec_dim),
      hidden_(hidden),
      lstm_([&] {
        Rng rng = make_rng(seed, "global/lstm");
        return neural::LstmCell(store_, "global/lstm", mention_dim + entity_vec_dim, hidden,
                                rng);
      }()) {
  Rng rng = make_rng(seed, "global/probe");
  Mat& w = store_.create("global/probe/w", 1, hidden);
  store_.create("global/probe/b", 1, 1);
  neural::init_uniform(w, rng, -0.08, 0.08);
}

GlobalEncoder GlobalEncoder::attach(neural::ParamStore store, int mention_dim,
                                    int entity_vec_dim, int hidden) {
  GlobalEncoder enc;
  enc.mention_dim_ = mention_dim;
  enc.entity_vec_dim_ = entity_vec_dim;
  enc.hidden_ = hidden;
  enc.store_ = std::move(store);
  enc.bind();
  return enc;
}

void GlobalEncoder::bind() {
  lstm_ = neural::LstmCell::attach(store_, "global/lstm", mention_dim_ + entity_vec_dim_,
                                   hidden_);
  if (!store_.has("global/probe/w"))
    throw DimensionError("global encoder: probe parameters missing from store");
}

GlobalState GlobalEncoder::initial_state() const {
  return GlobalState{Vec::Zero(hidden_), Vec::Zero(hidden_), 0};
}

GlobalState GlobalEncoder::encode_selection(const GlobalState& state, const Vec& mention_vec,
                                            const Vec& entity_vec) const {
  neural::LstmStepCache scratch;
  return encode_selection(state, mention_vec, entity_vec, scratch);
}

GlobalState GlobalEncoder::encode_selection(const GlobalState& state, const Vec& mention_vec,
                                            const Vec& entity_vec,
                                            neural::LstmStepCache& cache) const {
  if (mention_vec.size() != mention_dim_ || entity_vec.size() != entity_vec_dim_)
    throw DimensionError("encode_selection: input dims disagree with encoder dims");
  Vec x(mention_dim_ + entity_vec_dim_);
  x << mention_vec, entity_vec;
  GlobalState next;
  lstm_.step(store_, x, state.h, state.c, next.h, next.c, cache);
  next.step = state.step + 1;
  return next;
}

double GlobalEncoder::probe(const Vec& h) const {
  double z = store_.param("global/probe/w").row(0).dot(h) + store_.param("global/probe/b")(0, 0);
  return 1.0 / (1.0 + std::exp(-z));
}

Vec GlobalEncoder::probe_backward(const Vec& h, double label, double scale) {
  double p = probe(h);
  // d(bce)/dz for sigmoid output collapses to (p - y).
  double dz = (p - label) * scale;
  store_.grad("global/probe/w").row(0) += dz * h.transpose();
  store_.grad("global/probe/b")(0, 0) += dz;
  return dz * store_.param("global/probe/w").row(0).transpose();
}

double GlobalEncoder::sequence_loss_and_grads(const PretrainSequence& seq, double scale,
                                              double keep_prob, Rng* rng) {
  const bool training_dropout = rng != nullptr && keep_prob < 1.0;
  Rng unused_rng(0);
  Rng& drop_rng = rng ? *rng : unused_rng;

  GlobalState state = initial_state();
  std::vector<neural::LstmStepCache> caches(seq.size());
  std::vector<Vec> hs(seq.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    Vec mv = seq[t].mention_vec;
    Vec ev = seq[t].entity_vec;
    if (training_dropout) {
      // Input-side dropout; the inputs are frozen encodings, so no gradient
      // flows back through the mask.
      neural::DropoutMask mask;
      mv = neural::dropout_forward(mv, keep_prob, true, drop_rng, mask);
      ev = neural::dropout_forward(ev, keep_prob, true, drop_rng, mask);
    }
    state = encode_selection(state, mv, ev, caches[t]);
    hs[t] = state.h;
    if (seq[t].labeled) loss += neural::bce_loss(seq[t].label, probe(hs[t]));
  }

  // Backward through time; each h feeds both the probe and the next step.
  Vec dh = Vec::Zero(hidden_);
  Vec dc = Vec::Zero(hidden_);
  for (std::size_t t = seq.size(); t-- > 0;) {
    if (seq[t].labeled) dh += probe_backward(hs[t], seq[t].label, scale);
    Vec dx, dh_prev, dc_prev;
    lstm_.backward(store_, caches[t], dh, dc, dx, dh_prev, dc_prev);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return loss;
}

PretrainStats GlobalEncoder::pretrain(const std::vector<PretrainSequence>& sequences,
                                      const PretrainOptions& opts) {
  PretrainStats stats;
  std::vector<const PretrainSequence*> usable;
  for (const auto& seq : sequences) {
    bool any = std::any_of(seq.begin(), seq.end(), [](const auto& s) { return s.labeled; });
    if (any) {
      usable.push_back(&seq);
    } else {
      ++stats.sequences_skipped;
    }
  }
  if (usable.empty()) {
    stats.epoch_losses.assign(std::max(opts.epochs, 0), 0.0);
    return stats;
  }

  Rng shuffle_rng = make_rng(opts.seed, "global/shuffle");
  Rng dropout_rng = make_rng(opts.seed, "global/dropout");
  neural::AdamConfig adam{.lr = opts.lr};

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), shuffle_rng);
    double epoch_loss = 0.0;
    long labeled_steps = 0;

    for (std::size_t start = 0; start < usable.size(); start += opts.batch_size) {
      std::size_t end = std::min(usable.size(), start + opts.batch_size);
      long batch_labeled = 0;
      for (std::size_t s = start; s < end; ++s)
        for (const auto& step : *usable[s])
          if (step.labeled) ++batch_labeled;
      if (batch_labeled == 0) continue;
      const double inv = 1.0 / static_cast<double>(batch_labeled);
      for (std::size_t s = start; s < end; ++s) {
        epoch_loss +=
            sequence_loss_and_grads(*usable[s], inv, opts.keep_prob, &dropout_rng);
      }
      labeled_steps += batch_labeled;
      store_.adam_step(adam);
    }
    stats.epoch_losses.push_back(labeled_steps ? epoch_loss / labeled_steps : 0.0);
  }
  return stats;
}

}  // namespace seqlink::global_encoder
