#include "seqlink/selector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "seqlink/errors.hpp"

namespace seqlink::selector {

using neural::Mat;
using neural::Vec;

namespace {
constexpr double kMaskLogit = -1e30;
}

EpisodeState build_state(const MentionAssets& assets,
                         const global_encoder::GlobalState& global_state, int k,
                         bool use_global_encoding) {
  const int real = static_cast<int>(assets.candidate_ids.size());
  if (real == 0) throw ValidationError("build_state: empty candidate set for mention " +
                                       assets.mention_id);
  if (real > k)
    throw ValidationError("build_state: mention " + assets.mention_id + " has " +
                          std::to_string(real) + " candidates, more than k=" +
                          std::to_string(k));

  EpisodeState state;
  const auto mdim = assets.mention_vec.size();
  const auto edim = assets.candidate_vecs.front().size();
  state.mention_block = Mat::Zero(k, mdim);
  state.candidate_block = Mat::Zero(k, edim);
  state.feature_block = Mat::Zero(k, candgen::kFeatureCount);
  state.valid.assign(k, false);
  for (int i = 0; i < real; ++i) {
    state.mention_block.row(i) = assets.mention_vec.transpose();
    state.candidate_block.row(i) = assets.candidate_vecs[i].transpose();
    state.feature_block.row(i) = assets.features[i].transpose();
    state.valid[i] = true;
  }
  state.global_vec = use_global_encoding ? global_state.h : Vec::Zero(global_state.h.size());

  neural::check_finite(state.mention_block, "state mention block");
  neural::check_finite(state.candidate_block, "state candidate block");
  neural::check_finite(state.feature_block, "state feature block");
  neural::check_finite(state.global_vec, "state global vector");
  return state;
}

PolicyNetwork::PolicyNetwork(const PolicyDims& dims, std::uint64_t seed)
    : dims_(dims),
      feature_proj_([&] {
        Rng rng = make_rng(seed, "policy/feature_proj");
        return neural::Dense(store_, "policy/feature_proj", candgen::kFeatureCount,
                             dims.feature_proj_dim, /*relu=*/false, rng);
      }()),
      head_([&] {
        // Hidden layers are created first so parameter creation order is
        // stable; Dense construction only registers names.
        Rng rng = make_rng(seed, "policy/mlp");
        const int in0 =
            dims.mention_dim + dims.entity_vec_dim + dims.feature_proj_dim + dims.global_dim;
        for (int l = 0; l < dims.layers; ++l) {
          hidden_.emplace_back(store_, "policy/mlp/" + std::to_string(l),
                               l == 0 ? in0 : dims.hidden, dims.hidden, /*relu=*/true, rng);
        }
        return neural::Dense(store_, "policy/head", dims.hidden, 1, /*relu=*/false, rng);
      }()) {
  if (dims_.layers < 1) throw ConfigError("policy network: needs at least one hidden layer");
}

PolicyNetwork PolicyNetwork::attach(neural::ParamStore store, const PolicyDims& dims) {
  PolicyNetwork net;
  net.dims_ = dims;
  net.store_ = std::move(store);
  net.bind();
  return net;
}

void PolicyNetwork::bind() {
  feature_proj_ = neural::Dense::attach(store_, "policy/feature_proj",
                                        candgen::kFeatureCount, dims_.feature_proj_dim, false);
  const int in0 =
      dims_.mention_dim + dims_.entity_vec_dim + dims_.feature_proj_dim + dims_.global_dim;
  hidden_.clear();
  for (int l = 0; l < dims_.layers; ++l)
    hidden_.push_back(neural::Dense::attach(store_, "policy/mlp/" + std::to_string(l),
                                            l == 0 ? in0 : dims_.hidden, dims_.hidden, true));
  head_ = neural::Dense::attach(store_, "policy/head", dims_.hidden, 1, false);
}

Mat PolicyNetwork::assemble(const EpisodeState& state, neural::DenseCache& proj_cache) const {
  const int k = state.k();
  Mat proj = feature_proj_.forward(store_, state.feature_block, proj_cache);
  Mat x(k, dims_.mention_dim + dims_.entity_vec_dim + dims_.feature_proj_dim + dims_.global_dim);
  x << state.mention_block, state.candidate_block, proj,
      state.global_vec.transpose().replicate(k, 1);
  return x;
}

Vec PolicyNetwork::logits(const EpisodeState& state) const {
  neural::DenseCache scratch;
  Mat x = assemble(state, scratch);
  for (const auto& layer : hidden_) x = layer.forward(store_, x);
  Mat out = head_.forward(store_, x);
  Vec logits = out.col(0);
  neural::check_finite(logits, "policy logits");
  for (int i = 0; i < state.k(); ++i)
    if (!state.valid[i]) logits[i] = kMaskLogit;
  return logits;
}

Vec PolicyNetwork::forward(const EpisodeState& state) const {
  return neural::softmax(logits(state));
}

Vec PolicyNetwork::forward(const EpisodeState& state, PolicyCache& cache) const {
  Mat x = assemble(state, cache.proj);
  cache.hidden.resize(hidden_.size());
  for (std::size_t l = 0; l < hidden_.size(); ++l)
    x = hidden_[l].forward(store_, x, cache.hidden[l]);
  Mat out = head_.forward(store_, x, cache.head);
  Vec logits = out.col(0);
  neural::check_finite(logits, "policy logits");
  for (int i = 0; i < state.k(); ++i)
    if (!state.valid[i]) logits[i] = kMaskLogit;
  cache.valid = state.valid;
  cache.probs = neural::softmax(logits);
  return cache.probs;
}

void PolicyNetwork::backward(const PolicyCache& cache, const Vec& dlogits) {
  Mat d = dlogits;
  d.resize(dlogits.size(), 1);
  d = head_.backward(store_, cache.head, d);
  for (std::size_t l = hidden_.size(); l-- > 0;)
    d = hidden_[l].backward(store_, cache.hidden[l], d);
  // Only the feature slice backpropagates further; the other state blocks
  // are frozen inputs.
  const int off = dims_.mention_dim + dims_.entity_vec_dim;
  Mat dproj = d.middleCols(off, dims_.feature_proj_dim);
  feature_proj_.backward(store_, cache.proj, dproj);
}

int select_action(const Vec& probs, SelectMode mode, Rng& rng) {
  if (mode == SelectMode::kSample) return sample_index(rng, probs.data(), static_cast<int>(probs.size()));
  int best = 0;
  for (int i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

std::vector<double> delayed_rewards(const std::vector<int>& correct_flags) {
  return delayed_rewards(correct_flags, static_cast<int>(correct_flags.size()));
}

std::vector<double> delayed_rewards(const std::vector<int>& correct_flags, int horizon) {
  const int n = static_cast<int>(correct_flags.size());
  if (n == 0) throw ValidationError("delayed_rewards: empty flag vector");
  if (horizon < n) throw ValidationError("delayed_rewards: horizon shorter than flags");
  for (int f : correct_flags)
    if (f != 0 && f != 1) throw ValidationError("delayed_rewards: flags must be 0 or 1");

  std::vector<double> rewards(n);
  double suffix = 0.0;
  for (int i = n - 1; i >= 0; --i) suffix += correct_flags[i];
  // One pass with a running suffix sum; t is 1-based in the formula.
  for (int i = 0; i < n; ++i) {
    const double t = i + 1;
    if (correct_flags[i] == 1) {
      rewards[i] = suffix;
    } else {
      rewards[i] = suffix + t - horizon;
    }
    suffix -= correct_flags[i];
  }
  return rewards;
}

EpisodeResult run_episode(const DocAssets& doc, const global_encoder::MentionSequence& seq,
                          const PolicyNetwork& policy,
                          const global_encoder::GlobalEncoder& genc, int k, SelectMode mode,
                          Rng& rng, bool use_global_encoding, bool record_caches) {
  EpisodeResult result;
  result.episode.sequence = seq;
  auto& ep = result.episode;
  const int L = seq.length();
  ep.rewards.assign(L, 0.0);
  if (record_caches) {
    ep.policy_caches.resize(L);
    ep.global_caches.resize(L);
    ep.global_hs.resize(L);
  }

  auto state = genc.initial_state();
  for (int t = 0; t < L; ++t) {
    const auto& assets = doc.mentions.at(seq.mention_ids[t]);
    EpisodeState st = build_state(assets, state, k, use_global_encoding);
    Vec probs;
    if (record_caches) {
      probs = policy.forward(st, ep.policy_caches[t]);
    } else {
      probs = policy.forward(st);
    }
    int action = select_action(probs, mode, rng);
    ActionRecord rec;
    rec.t = t;
    rec.chosen_index = action;
    rec.log_prob = std::log(std::max(probs[action], 1e-300));
    rec.correct = (assets.gold_index >= 0 && action == assets.gold_index) ? 1 : 0;
    ep.actions.push_back(rec);
    if (t < seq.distinct)
      result.selections[assets.mention_id] = assets.candidate_ids[action];

    if (record_caches) {
      state = genc.encode_selection(state, assets.mention_vec, assets.candidate_vecs[action],
                                    ep.global_caches[t]);
      ep.global_hs[t] = state.h;
    } else {
      state = genc.encode_selection(state, assets.mention_vec, assets.candidate_vecs[action]);
    }
  }

  // Rewards over the distinct prefix; padded steps replicate the final
  // mention and would double-count its flag.
  std::vector<int> distinct_flags;
  distinct_flags.reserve(seq.distinct);
  for (int t = 0; t < seq.distinct; ++t) distinct_flags.push_back(ep.actions[t].correct);
  auto rewards = delayed_rewards(distinct_flags, L);
  for (int t = 0; t < seq.distinct; ++t) ep.rewards[t] = rewards[t];
  return result;
}

void reinforce_update(const std::vector<Episode*>& episodes, PolicyNetwork& policy,
                      double lr, double clip_norm, bool mean_baseline) {
  bool any = false;
  for (Episode* ep : episodes) {
    const int distinct = ep->sequence.distinct;
    double baseline = 0.0;
    if (mean_baseline && distinct > 0) {
      for (int t = 0; t < distinct; ++t) baseline += ep->rewards[t];
      baseline /= distinct;
    }
    for (int t = 0; t < distinct; ++t) {
      double advantage = ep->rewards[t] - baseline;
      if (advantage == 0.0) continue;
      const auto& cache = ep->policy_caches[t];
      if (cache.probs.size() == 0)
        throw ValidationError("reinforce_update: episode recorded without caches");
      // Ascent on R log pi == descent on -R log pi:
      // d(-R log pi(a))/d(logits) = R * (pi - onehot(a)).
      Vec dlogits = advantage * cache.probs;
      dlogits[ep->actions[t].chosen_index] -= advantage;
      for (int i = 0; i < dlogits.size(); ++i)
        if (!cache.valid[i]) dlogits[i] = 0.0;
      policy.backward(cache, dlogits);
      any = true;
    }
  }
  if (any) {
    policy.params().adam_step({.lr = lr, .clip_norm = clip_norm});
  } else {
    policy.params().zero_grads();
  }
}

JointTrainReport train_joint(const std::vector<DocAssets>& docs, PolicyNetwork& policy,
                             global_encoder::GlobalEncoder& genc, int k,
                             const JointTrainOptions& opts) {
  if (docs.empty()) throw ValidationError("train_joint: empty corpus");
  JointTrainReport report;
  Rng sample_rng = make_rng(opts.seed, "joint/sample");
  Rng shuffle_rng = make_rng(opts.seed, "joint/shuffle");

  std::vector<const DocAssets*> order;
  for (const auto& d : docs) order.push_back(&d);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double reward_total = 0.0;
    long episode_count = 0, correct_steps = 0, distinct_steps = 0;

    for (const DocAssets* doc : order) {
      std::vector<Episode> doc_episodes;
      for (const auto& seq : doc->train_sequences) {
        auto result = run_episode(*doc, seq, policy, genc, k, SelectMode::kSample,
                                  sample_rng, opts.use_global_encoding, /*record_caches=*/true);
        Episode& ep = doc_episodes.emplace_back(std::move(result.episode));
        for (int t = 0; t < seq.distinct; ++t) {
          reward_total += ep.rewards[t];
          correct_steps += ep.actions[t].correct;
        }
        distinct_steps += seq.distinct;
        ++episode_count;
        // The update sits inside the sequence loop (one Adam step per episode).
        std::vector<Episode*> batch{&ep};
        reinforce_update(batch, policy, opts.lr, opts.clip_norm, opts.mean_baseline);
      }
      if (doc_episodes.empty()) continue;

      // Global LSTM update for the document: BCE probe on each hidden state
      // against the sampled step correctness, backward through time.
      long labeled = 0;
      for (const auto& ep : doc_episodes) labeled += ep.sequence.distinct;
      if (labeled == 0) continue;
      const double inv = 1.0 / static_cast<double>(labeled);
      for (auto& ep : doc_episodes) {
        const int L = ep.sequence.length();
        Vec dh = Vec::Zero(genc.hidden_dim());
        Vec dc = Vec::Zero(genc.hidden_dim());
        for (int t = L - 1; t >= 0; --t) {
          if (t < ep.sequence.distinct)
            dh += genc.probe_backward(ep.global_hs[t], ep.actions[t].correct, inv);
          Vec dx, dh_prev, dc_prev;
          genc.cell().backward(genc.params(), ep.global_caches[t], dh, dc, dx, dh_prev,
                               dc_prev);
          dh = std::move(dh_prev);
          dc = std::move(dc_prev);
        }
      }
      genc.params().adam_step({.lr = opts.lr, .clip_norm = opts.clip_norm});
    }

    EpochTelemetry tel;
    tel.epoch = epoch;
    tel.mean_reward = episode_count ? reward_total / episode_count : 0.0;
    tel.train_accuracy =
        distinct_steps ? static_cast<double>(correct_steps) / distinct_steps : 0.0;
    tel.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(tel);
  }
  return report;
}

std::map<std::string, std::optional<std::string>> link_documents(
    const std::vector<DocAssets>& docs, const PolicyNetwork& policy,
    const global_encoder::GlobalEncoder& genc, int k, bool use_global_encoding) {
  std::map<std::string, std::optional<std::string>> out;
  Rng unused = make_rng(0, "link/argmax");
  for (const auto& doc : docs) {
    for (const auto& id : doc.nil_mention_ids) out[id] = std::nullopt;
    for (const auto& seq : doc.link_sequences) {
      auto result = run_episode(doc, seq, policy, genc, k, SelectMode::kArgmax, unused,
                                use_global_encoding, /*record_caches=*/false);
      for (auto& [mention_id, entity_id] : result.selections) out[mention_id] = entity_id;
    }
  }
  return out;
}

double evaluate_accuracy(const std::vector<DocAssets>& docs, const PolicyNetwork& policy,
                         const global_encoder::GlobalEncoder& genc, int k,
                         bool use_global_encoding) {
  Rng unused = make_rng(0, "link/argmax");
  long total = 0, correct = 0;
  for (const auto& doc : docs) {
    for (const auto& seq : doc.link_sequences) {
      auto result = run_episode(doc, seq, policy, genc, k, SelectMode::kArgmax, unused,
                                use_global_encoding, /*record_caches=*/false);
      for (int t = 0; t < seq.distinct; ++t) {
        const auto& assets = doc.mentions.at(seq.mention_ids[t]);
        if (!assets.has_gold) continue;
        ++total;
        correct += result.episode.actions[t].correct;
      }
    }
  }
  if (total == 0) throw ValidationError("evaluate_accuracy: no gold-labeled mentions");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace seqlink::selector
