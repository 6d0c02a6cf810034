#include "seqlink/episode_data.hpp"

#include <algorithm>

#include "seqlink/errors.hpp"

namespace seqlink {

std::vector<DocAssets> build_assets(const std::vector<corpus::Document>& docs,
                                    const candgen::CandidateMap& candsets,
                                    const local_encoder::LocalEncoder& encoder,
                                    const corpus::KnowledgeBase& kb,
                                    const corpus::EmbeddingTable& words,
                                    const local_encoder::PsiTable& psi, int sequence_length,
                                    bool rank_mentions) {
  std::vector<DocAssets> out;
  std::map<std::string, neural::Vec> entity_vecs;

  for (const auto& doc : docs) {
    DocAssets da;
    da.doc_id = doc.doc_id;
    std::vector<std::string> linkable, gold_linkable;
    std::map<std::string, double> psi_max;

    for (const auto& m : doc.mentions) {
      auto cit = candsets.find(m.mention_id);
      if (cit == candsets.end() || cit->second.candidates.empty()) {
        da.nil_mention_ids.push_back(m.mention_id);
        continue;
      }

      MentionAssets assets;
      assets.mention_id = m.mention_id;
      assets.mention_vec = encoder.encode_mention(m, words);

      std::vector<candgen::CandidateFeatures> feats;
      std::map<std::string, double> psi_by_entity;
      if (auto pit = psi.scores.find(m.mention_id); pit != psi.scores.end())
        for (const auto& [id, score] : pit->second) psi_by_entity[id] = score;

      for (const auto& c : cit->second.candidates) {
        const auto* rec = kb.find(c.entity_id);
        if (!rec) throw ValidationError("candidate entity missing from KB: " + c.entity_id);
        assets.candidate_ids.push_back(c.entity_id);
        auto [eit, fresh] = entity_vecs.try_emplace(c.entity_id);
        if (fresh) eit->second = encoder.encode_entity(*rec, words);
        assets.candidate_vecs.push_back(eit->second);
        feats.push_back(candgen::compute_features(m, *rec, words));
        auto pit = psi_by_entity.find(c.entity_id);
        if (pit == psi_by_entity.end())
          throw ValidationError("psi table is missing entity " + c.entity_id +
                                " for mention " + m.mention_id);
        assets.psi.push_back(pit->second);
      }
      assets.features = candgen::normalize_features(feats);
      if (m.gold_entity_id) {
        assets.has_gold = true;
        auto it = std::find(assets.candidate_ids.begin(), assets.candidate_ids.end(),
                            *m.gold_entity_id);
        if (it != assets.candidate_ids.end())
          assets.gold_index = static_cast<int>(it - assets.candidate_ids.begin());
      }

      psi_max[m.mention_id] = *std::max_element(assets.psi.begin(), assets.psi.end());
      linkable.push_back(m.mention_id);
      if (m.gold_entity_id && assets.gold_index >= 0) gold_linkable.push_back(m.mention_id);
      da.mentions.emplace(m.mention_id, std::move(assets));
    }

    auto finish = [&](const std::vector<std::string>& ids) {
      auto seqs = global_encoder::segment_mentions(doc.doc_id, ids, sequence_length);
      if (!rank_mentions) return seqs;
      for (auto& s : seqs) s = global_encoder::order_by_difficulty(s, psi_max);
      return seqs;
    };
    da.link_sequences = finish(linkable);
    da.train_sequences = finish(gold_linkable);
    out.push_back(std::move(da));
  }
  return out;
}

std::vector<global_encoder::PretrainSequence> build_pretrain_sequences(
    const std::vector<DocAssets>& docs, Rng& rng) {
  std::vector<global_encoder::PretrainSequence> out;
  for (const auto& doc : docs) {
    for (const auto& seq : doc.train_sequences) {
      global_encoder::PretrainSequence steps;
      for (const auto& id : seq.mention_ids) {
        const auto& assets = doc.mentions.at(id);
        global_encoder::PretrainStep step;
        step.mention_vec = assets.mention_vec;
        const int n = static_cast<int>(assets.candidate_ids.size());
        if (assets.gold_index < 0) {
          step.labeled = false;
          step.entity_vec = assets.candidate_vecs[uniform_int(rng, 0, n - 1)];
        } else if (n == 1 || uniform_double(rng) < 0.5) {
          step.label = 1;
          step.entity_vec = assets.candidate_vecs[assets.gold_index];
        } else {
          step.label = 0;
          int pick = uniform_int(rng, 0, n - 2);
          if (pick >= assets.gold_index) ++pick;  // skip the gold slot
          step.entity_vec = assets.candidate_vecs[pick];
        }
        steps.push_back(std::move(step));
      }
      out.push_back(std::move(steps));
    }
  }
  return out;
}

}  // namespace seqlink
