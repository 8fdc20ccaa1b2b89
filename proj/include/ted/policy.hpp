#pragma once

// The dialogue policy: a unidirectional transformer over dialogue turns (or
// an LSTM cell in its place), a pair of embedding towers mapping the
// per-turn encoder state and each action to a shared 20-dimensional space,
// dot-product similarity ranking, and the retrieval loss
//   L = -(S+ - log(e^{S+} + sum e^{S-})).
//
// The encoder state for turn t is computed from a window of the last
// max_history turns ending at t, rebuilt per turn: position embeddings are
// indexed within the window, so prediction depends only on the window's
// content. Prefix runs are therefore bit-identical to full-sequence runs,
// and two histories that agree on their last max_history turns get the
// same prediction.

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ted/common.hpp"
#include "ted/featurizer.hpp"
#include "ted/tape.hpp"
#include "ted/tensor.hpp"

namespace ted {

enum class EncoderKind { transformer, lstm };

inline std::string to_string(EncoderKind k) {
    return k == EncoderKind::transformer ? "transformer" : "lstm";
}

inline EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "transformer") return EncoderKind::transformer;
    if (s == "lstm") return EncoderKind::lstm;
    throw UsageError("unknown encoder '" + s + "' (expected transformer or lstm)");
}

struct TedConfig {
    std::size_t embed_dim = 20;
    std::size_t width = 128;
    std::size_t n_layers = 1;
    std::size_t n_heads = 4;
    std::size_t ff_width = 256;
    std::size_t max_history = 10;
    std::size_t n_negatives = 20;
    std::size_t batch_size = 8;
    std::size_t epochs = 15;
    double learning_rate = 1e-3;
    double dropout = 0.0;  // train-time only; prediction never drops
    std::uint64_t seed = 1;
    EncoderKind encoder = EncoderKind::transformer;
    FeatureMode mode = FeatureMode::modular;

    void validate() const {
        if (dropout < 0.0 || dropout >= 1.0)
            throw UsageError("config: dropout must be in [0, 1)");
        if (embed_dim < 1) throw UsageError("config: embed_dim must be >= 1");
        if (width < 1 || n_layers < 1 || n_heads < 1 || ff_width < 1)
            throw UsageError("config: encoder dimensions must be >= 1");
        if (width % n_heads != 0) throw UsageError("config: width must be divisible by n_heads");
        if (max_history < 1) throw UsageError("config: max_history must be >= 1");
        if (n_negatives < 1) throw UsageError("config: n_negatives must be >= 1");
        if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
        if (epochs < 1) throw UsageError("config: epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw UsageError("config: learning_rate must be positive");
    }

    bool operator==(const TedConfig&) const = default;

    // key/value view used by config files and checkpoint manifests
    std::vector<std::pair<std::string, std::string>> to_kv() const {
        return {
            {"embed_dim", std::to_string(embed_dim)},
            {"width", std::to_string(width)},
            {"n_layers", std::to_string(n_layers)},
            {"n_heads", std::to_string(n_heads)},
            {"ff_width", std::to_string(ff_width)},
            {"max_history", std::to_string(max_history)},
            {"n_negatives", std::to_string(n_negatives)},
            {"batch_size", std::to_string(batch_size)},
            {"epochs", std::to_string(epochs)},
            {"learning_rate", strf("%.17g", learning_rate)},
            {"dropout", strf("%.17g", dropout)},
            {"seed", std::to_string(seed)},
            {"encoder", to_string(encoder)},
            {"mode", to_string(mode)},
        };
    }

    void set_field(const std::string& key, const std::string& value) {
        try {
            if (key == "embed_dim") embed_dim = std::stoull(value);
            else if (key == "width") width = std::stoull(value);
            else if (key == "n_layers") n_layers = std::stoull(value);
            else if (key == "n_heads") n_heads = std::stoull(value);
            else if (key == "ff_width") ff_width = std::stoull(value);
            else if (key == "max_history") max_history = std::stoull(value);
            else if (key == "n_negatives") n_negatives = std::stoull(value);
            else if (key == "batch_size") batch_size = std::stoull(value);
            else if (key == "epochs") epochs = std::stoull(value);
            else if (key == "learning_rate") learning_rate = std::stod(value);
            else if (key == "dropout") dropout = std::stod(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "encoder") encoder = encoder_kind_from_string(value);
            else if (key == "mode") mode = feature_mode_from_string(value);
            else throw UsageError("unknown model config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw UsageError("bad value '" + value + "' for config key '" + key + "'");
        } catch (const std::out_of_range&) {
            throw UsageError("value '" + value + "' out of range for config key '" + key + "'");
        }
    }
};

inline Tensor glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out,
                             std::vector<std::size_t> shape) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

// Named parameter collection plus the vocab and config it was built for.
class TedModel {
  public:
    TedConfig config;
    FeatureVocab vocab;

    static TedModel init(const TedConfig& config, const FeatureVocab& vocab) {
        config.validate();
        TedModel m;
        m.config = config;
        m.vocab = vocab;
        Rng rng(config.seed);
        const std::size_t fin = vocab.input_dim();
        const std::size_t fa = vocab.action_feature_dim();
        const std::size_t w = config.width;
        const std::size_t d = config.embed_dim;

        m.add("input.W", glorot_uniform(rng, fin, w, {fin, w}));
        m.add("input.b", Tensor({w}, 0.0));
        if (config.encoder == EncoderKind::transformer) {
            m.add("pos.P", glorot_uniform(rng, config.max_history, w, {config.max_history, w}));
            for (std::size_t l = 0; l < config.n_layers; ++l) {
                const std::string p = "layer" + std::to_string(l) + ".";
                for (const char* mat : {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo"})
                    m.add(p + mat, glorot_uniform(rng, w, w, {w, w}));
                for (const char* bias : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
                    m.add(p + bias, Tensor({w}, 0.0));
                m.add(p + "ff.W1", glorot_uniform(rng, w, config.ff_width, {w, config.ff_width}));
                m.add(p + "ff.b1", Tensor({config.ff_width}, 0.0));
                m.add(p + "ff.W2", glorot_uniform(rng, config.ff_width, w, {config.ff_width, w}));
                m.add(p + "ff.b2", Tensor({w}, 0.0));
            }
        } else {
            m.add("lstm.Wx", glorot_uniform(rng, w, 4 * w, {w, 4 * w}));
            m.add("lstm.Wh", glorot_uniform(rng, w, 4 * w, {w, 4 * w}));
            m.add("lstm.b", Tensor({4 * w}, 0.0));
        }
        m.add("dialogue_embed.W", glorot_uniform(rng, w, d, {w, d}));
        m.add("dialogue_embed.b", Tensor({d}, 0.0));
        m.add("action_proj.W", glorot_uniform(rng, fa, w, {fa, w}));
        m.add("action_proj.b", Tensor({w}, 0.0));
        m.add("action_embed.W", glorot_uniform(rng, w, d, {w, d}));
        m.add("action_embed.b", Tensor({d}, 0.0));
        return m;
    }

    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }

    Tensor& param(const std::string& name) {
        for (auto& [n, t] : params_)
            if (n == name) return t;
        throw DataError("model has no parameter '" + name + "'");
    }
    const Tensor& param(const std::string& name) const {
        for (const auto& [n, t] : params_)
            if (n == name) return t;
        throw DataError("model has no parameter '" + name + "'");
    }
    bool has_param(const std::string& name) const {
        for (const auto& [n, _] : params_)
            if (n == name) return true;
        return false;
    }

  private:
    void add(const std::string& name, Tensor t) {
        if (has_param(name)) throw DataError("duplicate parameter name '" + name + "'");
        params_.emplace_back(name, std::move(t));
    }

    std::vector<std::pair<std::string, Tensor>> params_;
};

// Model parameters registered as leaves on a tape, in declaration order.
class TapedModel {
  public:
    TapedModel(Tape& tape, const TedModel& model, bool requires_grad)
        : tape_(&tape), model_(&model) {
        for (const auto& [name, tensor] : model.params()) {
            Tensor t = tensor;
            t.set_requires_grad(requires_grad);
            ids_.emplace_back(name, tape.input(std::move(t)));
        }
    }

    Tape& tape() const { return *tape_; }
    const TedModel& model() const { return *model_; }
    const TedConfig& config() const { return model_->config; }

    NodeId id(const std::string& name) const {
        for (const auto& [n, id] : ids_)
            if (n == name) return id;
        throw DataError("no tape leaf for parameter '" + name + "'");
    }

    const std::vector<std::pair<std::string, NodeId>>& ids() const { return ids_; }

    // Train-time inverted dropout; masks are drawn from the training stream
    // so runs stay deterministic. Prediction paths never enable this.
    void enable_dropout(double rate, Rng* rng) {
        dropout_rate_ = rate;
        dropout_rng_ = rng;
    }

    NodeId maybe_dropout(NodeId node) {
        if (dropout_rate_ <= 0.0 || dropout_rng_ == nullptr) return node;
        const Tensor& value = tape_->value(node);
        Tensor mask(value.shape());
        const double keep = 1.0 - dropout_rate_;
        for (std::size_t i = 0; i < mask.numel(); ++i)
            mask[i] = dropout_rng_->bernoulli(keep) ? 1.0 / keep : 0.0;
        return tape_->mul(node, tape_->input(std::move(mask)));
    }

  private:
    Tape* tape_;
    const TedModel* model_;
    std::vector<std::pair<std::string, NodeId>> ids_;
    double dropout_rate_ = 0.0;
    Rng* dropout_rng_ = nullptr;
};

struct EncodeResult {
    std::vector<NodeId> states;  // one 1 x width node per turn
    // attention[layer][head] is turns x turns; row t holds the attention
    // distribution of prediction turn t over history columns, zero outside
    // the causal window.
    std::vector<std::vector<Tensor>> attention;
};

namespace detail {

inline Tensor causal_mask(std::size_t w) {
    Tensor mask({w, w}, 0.0);
    for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j <= i; ++j) mask.at(i, j) = 1.0;
    return mask;
}

// X (T x input_dim) -> input-projected H (T x width) shared by both encoders.
inline NodeId project_inputs(TapedModel& tm, const std::vector<TurnFeatures>& feats) {
    const FeatureVocab& vocab = tm.model().vocab;
    const std::size_t fin = vocab.input_dim();
    Tensor x({feats.size(), fin});
    for (std::size_t t = 0; t < feats.size(); ++t) {
        const std::vector<double> row = input_row(feats[t]);
        if (row.size() != fin)
            throw ShapeError(strf("turn %zu features have width %zu, model expects %zu", t,
                                  row.size(), fin));
        std::copy(row.begin(), row.end(), x.data() + t * fin);
    }
    Tape& tape = tm.tape();
    return tape.add(tape.matmul(tape.input(std::move(x)), tm.id("input.W")), tm.id("input.b"));
}

}  // namespace detail

// Causal self-attention encoder over dialogue turns. The window for turn t
// covers the last max_history turns ending at t; the state is the output at
// the window's final position.
inline EncodeResult transformer_encode(TapedModel& tm, const std::vector<TurnFeatures>& feats,
                                       bool want_attention = false) {
    if (feats.empty()) throw UsageError("encode: need at least one turn");
    const TedConfig& cfg = tm.config();
    Tape& tape = tm.tape();
    const std::size_t T = feats.size();
    const std::size_t N = cfg.max_history;
    const std::size_t heads = cfg.n_heads;
    const std::size_t dk = cfg.width / heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    EncodeResult out;
    if (want_attention)
        out.attention.assign(cfg.n_layers, std::vector<Tensor>(heads, Tensor({T, T}, 0.0)));

    const NodeId h_full = detail::project_inputs(tm, feats);

    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t w0 = t + 1 > N ? t + 1 - N : 0;
        const std::size_t w = t + 1 - w0;
        NodeId h = tape.add(tape.slice_rows(h_full, w0, t + 1),
                            tape.slice_rows(tm.id("pos.P"), 0, w));
        const Tensor mask = detail::causal_mask(w);
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            NodeId q = tape.add(tape.matmul(h, tm.id(p + "attn.Wq")), tm.id(p + "attn.bq"));
            NodeId k = tape.add(tape.matmul(h, tm.id(p + "attn.Wk")), tm.id(p + "attn.bk"));
            NodeId v = tape.add(tape.matmul(h, tm.id(p + "attn.Wv")), tm.id(p + "attn.bv"));
            std::vector<NodeId> ctx;
            for (std::size_t hd = 0; hd < heads; ++hd) {
                NodeId qh = tape.slice_cols(q, hd * dk, (hd + 1) * dk);
                NodeId kh = tape.slice_cols(k, hd * dk, (hd + 1) * dk);
                NodeId vh = tape.slice_cols(v, hd * dk, (hd + 1) * dk);
                NodeId scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dk);
                NodeId attn = tape.masked_softmax(scores, mask);
                if (want_attention) {
                    const Tensor& a = tape.value(attn);
                    for (std::size_t j = 0; j < w; ++j)
                        out.attention[l][hd].at(t, w0 + j) = a.at(w - 1, j);
                }
                ctx.push_back(tape.matmul(attn, vh));
            }
            NodeId merged = tape.add(tape.matmul(tape.concat_cols(ctx), tm.id(p + "attn.Wo")),
                                     tm.id(p + "attn.bo"));
            NodeId res = tape.add(h, tm.maybe_dropout(merged));
            NodeId ff = tape.add(
                tape.matmul(tape.relu(tape.add(tape.matmul(res, tm.id(p + "ff.W1")),
                                               tm.id(p + "ff.b1"))),
                            tm.id(p + "ff.W2")),
                tm.id(p + "ff.b2"));
            h = tape.add(res, tm.maybe_dropout(ff));
        }
        out.states.push_back(tape.slice_rows(h, w - 1, w));
    }
    return out;
}

// The same architecture with the transformer replaced by a single LSTM cell:
// for each turn, the cell is run over the window from a zero state and the
// state at the window's final position is the turn encoding. Gate order in
// the fused weight matrices is (input, forget, cell, output).
inline EncodeResult lstm_encode(TapedModel& tm, const std::vector<TurnFeatures>& feats) {
    if (feats.empty()) throw UsageError("encode: need at least one turn");
    const TedConfig& cfg = tm.config();
    Tape& tape = tm.tape();
    const std::size_t T = feats.size();
    const std::size_t N = cfg.max_history;
    const std::size_t w = cfg.width;

    EncodeResult out;
    const NodeId h_full = tm.maybe_dropout(detail::project_inputs(tm, feats));
    // Input-to-gate projection for every turn at once; the recurrence below
    // only adds the hidden-to-gate term per step.
    const NodeId zx_full = tape.add(tape.matmul(h_full, tm.id("lstm.Wx")), tm.id("lstm.b"));

    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t w0 = t + 1 > N ? t + 1 - N : 0;
        NodeId h = tape.input(Tensor({1, w}, 0.0));
        NodeId c = tape.input(Tensor({1, w}, 0.0));
        for (std::size_t j = w0; j <= t; ++j) {
            NodeId z = tape.add(tape.slice_rows(zx_full, j, j + 1),
                                tape.matmul(h, tm.id("lstm.Wh")));
            NodeId gi = tape.sigmoid_fn(tape.slice_cols(z, 0, w));
            NodeId gf = tape.sigmoid_fn(tape.slice_cols(z, w, 2 * w));
            NodeId gg = tape.tanh_fn(tape.slice_cols(z, 2 * w, 3 * w));
            NodeId go = tape.sigmoid_fn(tape.slice_cols(z, 3 * w, 4 * w));
            c = tape.add(tape.mul(gf, c), tape.mul(gi, gg));
            h = tape.mul(go, tape.tanh_fn(c));
        }
        out.states.push_back(h);
    }
    return out;
}

inline EncodeResult encode_dialogue(TapedModel& tm, const std::vector<TurnFeatures>& feats,
                                    bool want_attention = false) {
    if (tm.config().encoder == EncoderKind::transformer)
        return transformer_encode(tm, feats, want_attention);
    if (want_attention)
        throw DataError("attention maps requested from an LSTM encoder");
    return lstm_encode(tm, feats);
}

// Dialogue tower: 1 x width encoder state -> 1 x embed_dim.
inline NodeId dialogue_embedding(TapedModel& tm, NodeId state) {
    Tape& tape = tm.tape();
    return tape.add(tape.matmul(state, tm.id("dialogue_embed.W")), tm.id("dialogue_embed.b"));
}

// Action tower applied to a batch of action feature rows: projection, relu,
// then the embedding map. Returns rows x embed_dim.
inline NodeId action_embeddings(TapedModel& tm, NodeId action_features) {
    Tape& tape = tm.tape();
    NodeId hidden = tape.relu(tape.add(tape.matmul(action_features, tm.id("action_proj.W")),
                                       tm.id("action_proj.b")));
    return tape.add(tape.matmul(hidden, tm.id("action_embed.W")), tm.id("action_embed.b"));
}

// Feature rows of the whole action inventory, in action-index order.
inline Tensor action_feature_matrix(const FeatureVocab& vocab) {
    const std::size_t n = vocab.n_actions();
    Tensor x({n, vocab.action_feature_dim()});
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> row = featurize_action(vocab.action_label(i), vocab);
        std::copy(row.begin(), row.end(), x.data() + i * row.size());
    }
    return x;
}

// Both towers applied to one (state, action feature row) pair, as node ids.
inline std::pair<NodeId, NodeId> embed_pair(TapedModel& tm, NodeId state,
                                            const Tensor& action_feature_row) {
    NodeId h_dialogue = dialogue_embedding(tm, state);
    NodeId h_action = action_embeddings(tm, tm.tape().input(action_feature_row));
    return {h_dialogue, h_action};
}

// Dot-product similarity of two 1 x d embeddings, as a scalar node.
inline NodeId similarity(Tape& tape, NodeId h_dialogue, NodeId h_action) {
    const Tensor& a = tape.value(h_dialogue);
    const Tensor& b = tape.value(h_action);
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols())
        throw ShapeError("similarity: expected two 1 x d embeddings of equal length");
    return tape.reshape(tape.matmul(h_dialogue, tape.transpose(h_action)), {1});
}

// Per-step retrieval loss from a 1 x (1 + k) similarity row whose column 0
// is the gold action: logsumexp(all) - S+. Non-negative, exactly 0 when
// there are no negatives.
inline NodeId ted_loss_row(Tape& tape, NodeId sims_row) {
    const Tensor& s = tape.value(sims_row);
    if (s.rank() != 2 || s.rows() != 1) throw ShapeError("ted_loss_row: expected a 1 x k row");
    NodeId lse = tape.logsumexp(sims_row);
    NodeId s_plus = tape.reshape(tape.slice_cols(sims_row, 0, 1), {1});
    return tape.sub(lse, s_plus);
}

// Spec-shaped overload: scalar S+ node plus a list of scalar S- nodes.
inline NodeId ted_loss(Tape& tape, NodeId s_plus, const std::vector<NodeId>& s_minus) {
    std::vector<NodeId> all{s_plus};
    all.insert(all.end(), s_minus.begin(), s_minus.end());
    NodeId joined = tape.concat_rows(all);
    return tape.sub(tape.logsumexp(joined), s_plus);
}

// Ranking: indices sorted by score descending, ties broken by index so the
// order is independent of iteration order and of any constant score shift.
inline std::vector<std::size_t> rank_scores(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

struct Prediction {
    std::vector<std::pair<std::string, double>> ranked;  // (label, similarity), descending
    std::vector<std::vector<Tensor>> attention;          // transformer only

    const std::string& top() const {
        if (ranked.empty()) throw DataError("empty prediction");
        return ranked.front().first;
    }
};

// Similarity of every turn's dialogue embedding against all action
// embeddings; one ranked Prediction per turn.
inline std::vector<Prediction> predict_all_turns(const TedModel& model,
                                                 const std::vector<TurnFeatures>& feats,
                                                 bool want_attention = false) {
    if (feats.empty()) throw UsageError("predict: empty dialogue prefix");
    Tape tape;
    TapedModel tm(tape, model, /*requires_grad=*/false);
    EncodeResult enc = encode_dialogue(tm, feats, want_attention);
    NodeId all_actions = action_embeddings(tm, tape.input(action_feature_matrix(model.vocab)));
    NodeId all_actions_t = tape.transpose(all_actions);

    std::vector<Prediction> out;
    for (std::size_t t = 0; t < feats.size(); ++t) {
        NodeId sims = tape.matmul(dialogue_embedding(tm, enc.states[t]), all_actions_t);
        const Tensor& row = tape.value(sims);
        std::vector<double> scores(row.vec());
        Prediction p;
        for (std::size_t idx : rank_scores(scores))
            p.ranked.emplace_back(model.vocab.action_label(idx), scores[idx]);
        if (want_attention && t + 1 == feats.size()) p.attention = enc.attention;
        out.push_back(std::move(p));
    }
    return out;
}

// Ranked next-action retrieval for the latest turn of a dialogue prefix.
inline Prediction predict(const TedModel& model, const std::vector<TurnFeatures>& prefix,
                          bool want_attention = false) {
    return predict_all_turns(model, prefix, want_attention).back();
}

// Per-layer/head attention matrices for a full dialogue (transformer only).
inline std::vector<std::vector<Tensor>> attention_maps(const TedModel& model,
                                                       const std::vector<TurnFeatures>& feats) {
    if (model.config.encoder != EncoderKind::transformer)
        throw DataError("attention maps are only defined for the transformer encoder");
    Tape tape;
    TapedModel tm(tape, model, /*requires_grad=*/false);
    return transformer_encode(tm, feats, /*want_attention=*/true).attention;
}

}  // namespace ted
