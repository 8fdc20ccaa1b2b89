#pragma once

// Training loop: balanced batching over dialogues, per-turn retrieval loss
// with sampled negatives, Adam updates. Deterministic given (corpus, config):
// all randomness flows from one seeded stream in a fixed draw order.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ted/corpus.hpp"
#include "ted/featurizer.hpp"
#include "ted/optim.hpp"
#include "ted/policy.hpp"

namespace ted {

// k distinct action indices != gold, uniform without replacement.
inline std::vector<std::size_t> sample_negative_indices(std::size_t gold, std::size_t n_actions,
                                                        std::size_t k, Rng& rng) {
    if (gold >= n_actions) throw UsageError("sample_negatives: gold index out of range");
    if (k >= n_actions)
        throw UsageError("sample_negatives: k must be smaller than the number of actions");
    std::vector<std::size_t> pool;
    pool.reserve(n_actions - 1);
    for (std::size_t i = 0; i < n_actions; ++i)
        if (i != gold) pool.push_back(i);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t swap_with = j + rng.uniform_int(pool.size() - j);
        std::swap(pool[j], pool[swap_with]);
    }
    pool.resize(k);
    return pool;
}

inline std::vector<std::string> sample_negatives(const std::string& gold,
                                                 const FeatureVocab& vocab, std::size_t k,
                                                 Rng& rng) {
    auto it = vocab.action_index.find(gold);
    if (it == vocab.action_index.end())
        throw DataError("sample_negatives: unknown gold label '" + gold + "'");
    std::vector<std::string> labels;
    for (std::size_t idx : sample_negative_indices(it->second, vocab.n_actions(), k, rng))
        labels.push_back(vocab.action_label(idx));
    return labels;
}

// Dialogues are replicated in proportion to the rarity of their rarest gold
// label (capped), then shuffled and chunked. A corpus with uniform label
// frequencies degenerates to a plain shuffle.
constexpr std::size_t kMaxOversampleFactor = 10;

inline std::vector<std::vector<std::size_t>> balanced_batches(const Corpus& corpus,
                                                              std::size_t batch_size, Rng& rng) {
    if (corpus.dialogues.empty()) throw DataError("balanced_batches: empty corpus");
    if (batch_size < 1) throw UsageError("balanced_batches: batch_size must be >= 1");

    std::map<std::string, std::size_t> label_freq;
    for (const Dialogue& d : corpus.dialogues)
        for (const Turn& t : d.turns) ++label_freq[t.system_action];
    std::size_t max_freq = 0;
    for (const auto& [_, c] : label_freq) max_freq = std::max(max_freq, c);

    std::vector<std::size_t> replicated;
    for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
        std::size_t rarity = max_freq;
        for (const Turn& t : corpus.dialogues[di].turns)
            rarity = std::min(rarity, label_freq[t.system_action]);
        std::size_t factor = 1;
        if (rarity > 0) {
            const double ratio = static_cast<double>(max_freq) / static_cast<double>(rarity);
            factor = std::min<std::size_t>(kMaxOversampleFactor,
                                           std::max<std::size_t>(1, std::llround(ratio)));
        }
        for (std::size_t r = 0; r < factor; ++r) replicated.push_back(di);
    }
    rng.shuffle(replicated);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < replicated.size(); i += batch_size) {
        const std::size_t end = std::min(i + batch_size, replicated.size());
        batches.emplace_back(replicated.begin() + i, replicated.begin() + end);
    }
    return batches;
}

struct TrainResult {
    TedModel model;
    std::vector<double> epoch_mean_loss;
};

// Builds the loss subgraph for one dialogue and returns its mean-over-turns
// loss node. Candidate rows: gold first, then the sampled negatives.
inline NodeId dialogue_loss(TapedModel& tm, const std::vector<TurnFeatures>& feats,
                            NodeId all_action_embeds, std::size_t n_actions, std::size_t k,
                            Rng& rng) {
    Tape& tape = tm.tape();
    EncodeResult enc = encode_dialogue(tm, feats);
    std::vector<NodeId> turn_losses;
    for (std::size_t t = 0; t < feats.size(); ++t) {
        const std::size_t gold = feats[t].action_target_index;
        NodeId h_dlg = dialogue_embedding(tm, enc.states[t]);
        const auto negatives = sample_negative_indices(gold, n_actions, k, rng);
        Tensor sel({negatives.size() + 1, n_actions}, 0.0);
        sel.at(0, gold) = 1.0;
        for (std::size_t i = 0; i < negatives.size(); ++i) sel.at(i + 1, negatives[i]) = 1.0;
        NodeId candidates = tape.matmul(tape.input(std::move(sel)), all_action_embeds);
        NodeId sims = tape.matmul(h_dlg, tape.transpose(candidates));
        turn_losses.push_back(ted_loss_row(tape, sims));
    }
    NodeId sum = turn_losses[0];
    for (std::size_t i = 1; i < turn_losses.size(); ++i) sum = tape.add(sum, turn_losses[i]);
    return tape.scale(sum, 1.0 / static_cast<double>(turn_losses.size()));
}

inline TrainResult train(const Corpus& corpus, const TedConfig& config) {
    config.validate();
    if (corpus.dialogues.empty()) throw DataError("train: empty corpus");
    const FeatureVocab vocab = build_vocab(corpus, config.mode);
    if (vocab.n_actions() < 2)
        throw DataError("train: corpus must contain at least 2 distinct actions");

    TedModel model = TedModel::init(config, vocab);
    std::vector<std::vector<TurnFeatures>> feats;
    feats.reserve(corpus.dialogues.size());
    for (const Dialogue& d : corpus.dialogues)
        feats.push_back(featurize_dialogue(d, vocab, SymbolPolicy::strict));

    const Tensor action_feats = action_feature_matrix(vocab);
    const std::size_t n_actions = vocab.n_actions();
    const std::size_t k = std::min(config.n_negatives, n_actions - 1);

    Adam adam(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    Rng rng(config.seed);
    TrainResult result;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto batches = balanced_batches(corpus, config.batch_size, rng);
        double loss_sum = 0.0;
        std::size_t n_dialogues = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            try {
                Tape tape;
                TapedModel tm(tape, model, /*requires_grad=*/true);
                if (config.dropout > 0.0) tm.enable_dropout(config.dropout, &rng);
                NodeId action_embeds = action_embeddings(tm, tape.input(action_feats));
                NodeId sum = -1;
                for (std::size_t di : batch) {
                    NodeId dl = dialogue_loss(tm, feats[di], action_embeds, n_actions, k, rng);
                    sum = sum < 0 ? dl : tape.add(sum, dl);
                }
                NodeId batch_loss = tape.scale(sum, 1.0 / static_cast<double>(batch.size()));
                loss_sum += tape.scalar_value(batch_loss) * static_cast<double>(batch.size());
                n_dialogues += batch.size();

                GradStore grads = tape.backward(batch_loss);
                std::vector<Tensor*> params;
                std::vector<const Tensor*> gradients;
                for (auto& [name, tensor] : model.params()) params.push_back(&tensor);
                for (const auto& [name, id] : tm.ids()) gradients.push_back(&grads.at(id));
                adam.step(params, gradients);
            } catch (const NumericError& e) {
                throw NumericError(strf("training diverged at epoch %zu batch %zu: %s", epoch, bi,
                                        e.what()));
            }
        }
        result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(n_dialogues));
    }
    result.model = std::move(model);
    return result;
}

}  // namespace ted
