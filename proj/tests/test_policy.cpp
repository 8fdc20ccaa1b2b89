#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "ted/policy.hpp"
#include "ted/train.hpp"

using ted::EncoderKind;
using ted::FeatureVocab;
using ted::NodeId;
using ted::Rng;
using ted::Tape;
using ted::TapedModel;
using ted::TedConfig;
using ted::TedModel;
using ted::Tensor;
using ted::TurnFeatures;

namespace {

FeatureVocab synthetic_vocab(std::size_t n_intents, std::size_t n_entities,
                             std::size_t n_actions) {
    FeatureVocab v;
    v.mode = ted::FeatureMode::modular;
    for (std::size_t i = 0; i < n_intents; ++i)
        v.intent_index["intent" + std::to_string(i)] = i;
    for (std::size_t i = 0; i < n_entities; ++i)
        v.entity_index["entity" + std::to_string(i)] = i;
    v.slot_index = v.entity_index;
    for (std::size_t i = 0; i < n_actions; ++i) {
        const std::string label = ted::strf("action%02zu", i);
        v.action_index[label] = i;
        v.action_texts[label] = "response " + std::to_string(i);
    }
    v.rebuild_labels();
    return v;
}

std::vector<TurnFeatures> random_features(const FeatureVocab& vocab, std::size_t turns,
                                          Rng& rng) {
    std::vector<TurnFeatures> out;
    for (std::size_t t = 0; t < turns; ++t) {
        TurnFeatures f;
        f.user_vec.resize(vocab.user_dim());
        f.slot_vec.resize(vocab.slot_dim());
        f.prev_action_vec.resize(vocab.prev_action_dim());
        for (auto* vec : {&f.user_vec, &f.slot_vec, &f.prev_action_vec})
            for (double& x : *vec) x = rng.bernoulli(0.35) ? 1.0 : 0.0;
        f.action_target_index = rng.uniform_int(vocab.n_actions());
        out.push_back(std::move(f));
    }
    return out;
}

TedConfig tiny_config(EncoderKind kind, std::size_t heads = 1, std::size_t width = 8) {
    TedConfig cfg;
    cfg.width = width;
    cfg.n_heads = heads;
    cfg.ff_width = 2 * width;
    cfg.n_layers = 1;
    cfg.max_history = 10;
    cfg.encoder = kind;
    cfg.seed = 77;
    return cfg;
}

// Hand-rolled single-layer single-head windowed attention forward, written
// with explicit loops and the test-local matmul oracle only.
std::vector<std::vector<double>> reference_transformer_states(
    const TedModel& model, const std::vector<TurnFeatures>& feats) {
    const TedConfig& cfg = model.config;
    const std::size_t T = feats.size();
    const std::size_t N = cfg.max_history;
    const std::size_t width = cfg.width;

    Tensor x({T, model.vocab.input_dim()});
    for (std::size_t t = 0; t < T; ++t) {
        auto row = ted::input_row(feats[t]);
        std::copy(row.begin(), row.end(), x.data() + t * row.size());
    }
    auto add_bias = [](Tensor m, const Tensor& b) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) += b[j];
        return m;
    };
    Tensor proj = add_bias(oracle::matmul(x, model.param("input.W")), model.param("input.b"));

    std::vector<std::vector<double>> states;
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t w0 = t + 1 > N ? t + 1 - N : 0;
        const std::size_t w = t + 1 - w0;
        Tensor h({w, width});
        const Tensor& pos = model.param("pos.P");
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t j = 0; j < width; ++j)
                h.at(i, j) = proj.at(w0 + i, j) + pos.at(i, j);

        Tensor q = add_bias(oracle::matmul(h, model.param("layer0.attn.Wq")),
                            model.param("layer0.attn.bq"));
        Tensor k = add_bias(oracle::matmul(h, model.param("layer0.attn.Wk")),
                            model.param("layer0.attn.bk"));
        Tensor v = add_bias(oracle::matmul(h, model.param("layer0.attn.Wv")),
                            model.param("layer0.attn.bv"));

        // scores, causal mask, softmax
        Tensor attn({w, w}, 0.0);
        for (std::size_t i = 0; i < w; ++i) {
            std::vector<double> row(i + 1);
            for (std::size_t j = 0; j <= i; ++j) {
                double dot = 0.0;
                for (std::size_t d = 0; d < width; ++d) dot += q.at(i, d) * k.at(j, d);
                row[j] = dot / std::sqrt(static_cast<double>(width));
            }
            double denom = 0.0;
            for (double s : row) denom += std::exp(s);
            for (std::size_t j = 0; j <= i; ++j) attn.at(i, j) = std::exp(row[j]) / denom;
        }
        Tensor ctx = oracle::matmul(attn, v);
        Tensor merged = add_bias(oracle::matmul(ctx, model.param("layer0.attn.Wo")),
                                 model.param("layer0.attn.bo"));
        Tensor res = h;
        for (std::size_t i = 0; i < res.numel(); ++i) res[i] += merged[i];

        Tensor f1 = add_bias(oracle::matmul(res, model.param("layer0.ff.W1")),
                             model.param("layer0.ff.b1"));
        for (std::size_t i = 0; i < f1.numel(); ++i) f1[i] = std::max(f1[i], 0.0);
        Tensor f2 = add_bias(oracle::matmul(f1, model.param("layer0.ff.W2")),
                             model.param("layer0.ff.b2"));
        std::vector<double> state(width);
        for (std::size_t j = 0; j < width; ++j) state[j] = res.at(w - 1, j) + f2.at(w - 1, j);
        states.push_back(std::move(state));
    }
    return states;
}

std::vector<Tensor> encode_states(const TedModel& model, const std::vector<TurnFeatures>& feats) {
    Tape tape;
    TapedModel tm(tape, model, false);
    ted::EncodeResult enc = ted::encode_dialogue(tm, feats);
    std::vector<Tensor> out;
    for (NodeId id : enc.states) out.push_back(tape.value(id));
    return out;
}

}  // namespace

TEST(TedConfig, ValidatesDimensions) {
    TedConfig cfg;
    cfg.n_heads = 3;  // 128 % 3 != 0
    EXPECT_THROW(cfg.validate(), ted::UsageError);
    TedConfig ok;
    EXPECT_NO_THROW(ok.validate());
    EXPECT_EQ(ok.embed_dim, 20u);
}

TEST(TransformerEncode, SingleTurnDialogueWorks) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    Rng rng(1);
    auto feats = random_features(vocab, 1, rng);
    auto states = encode_states(model, feats);
    ASSERT_EQ(states.size(), 1u);
    auto ref = reference_transformer_states(model, feats);
    for (std::size_t j = 0; j < model.config.width; ++j)
        EXPECT_NEAR(states[0][j], ref[0][j], 1e-10);
}

TEST(TransformerEncode, MatchesHandRolledOracle) {
    FeatureVocab vocab = synthetic_vocab(4, 3, 6);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    Rng rng(2);
    auto feats = random_features(vocab, 3, rng);
    auto states = encode_states(model, feats);
    auto ref = reference_transformer_states(model, feats);
    for (std::size_t t = 0; t < feats.size(); ++t)
        for (std::size_t j = 0; j < model.config.width; ++j)
            EXPECT_NEAR(states[t][j], ref[t][j], 1e-10) << "turn " << t << " dim " << j;
}

TEST(TransformerEncode, WindowedOracleAgreesBeyondMaxHistory) {
    FeatureVocab vocab = synthetic_vocab(4, 3, 6);
    TedConfig cfg = tiny_config(EncoderKind::transformer);
    cfg.max_history = 3;
    TedModel model = TedModel::init(cfg, vocab);
    Rng rng(3);
    auto feats = random_features(vocab, 7, rng);
    auto states = encode_states(model, feats);
    auto ref = reference_transformer_states(model, feats);
    for (std::size_t t = 0; t < feats.size(); ++t)
        for (std::size_t j = 0; j < model.config.width; ++j)
            EXPECT_NEAR(states[t][j], ref[t][j], 1e-10);
}

TEST(Encode, PrefixStatesAreBitIdentical) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    Rng rng(4);
    for (auto kind : {EncoderKind::transformer, EncoderKind::lstm}) {
        TedConfig cfg = tiny_config(kind, 2, 8);
        cfg.max_history = 4;
        TedModel model = TedModel::init(cfg, vocab);
        auto feats = random_features(vocab, 6, rng);
        auto full = encode_states(model, feats);
        for (std::size_t cut = 1; cut <= feats.size(); ++cut) {
            std::vector<TurnFeatures> prefix(feats.begin(), feats.begin() + cut);
            auto part = encode_states(model, prefix);
            for (std::size_t t = 0; t < cut; ++t)
                EXPECT_EQ(part[t].vec(), full[t].vec()) << "cut " << cut << " turn " << t;
        }
    }
}

TEST(Encode, FeatureWidthMismatchThrows) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    TurnFeatures bad;
    bad.user_vec = {1.0};
    bad.slot_vec = {0.0};
    bad.prev_action_vec = {0.0};
    Tape tape;
    TapedModel tm(tape, model, false);
    EXPECT_THROW(ted::encode_dialogue(tm, {bad}), ted::ShapeError);
}

TEST(LstmEncode, ZeroCellWeightsGiveZeroStates) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::lstm), vocab);
    for (const char* name : {"lstm.Wx", "lstm.Wh", "lstm.b"}) {
        Tensor& t = model.param(name);
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.0;
    }
    Rng rng(5);
    auto feats = random_features(vocab, 4, rng);
    for (const Tensor& s : encode_states(model, feats))
        for (std::size_t i = 0; i < s.numel(); ++i) EXPECT_EQ(s[i], 0.0);
}

TEST(LstmEncode, OneStepMatchesGateEquations) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::lstm), vocab);
    Rng rng(6);
    auto feats = random_features(vocab, 1, rng);
    auto states = encode_states(model, feats);

    // oracle: input projection then one cell step from zero state
    const Tensor& win = model.param("input.W");
    const Tensor& bin = model.param("input.b");
    const auto row = ted::input_row(feats[0]);
    const std::size_t width = model.config.width;
    std::vector<double> x(width, 0.0);
    for (std::size_t j = 0; j < width; ++j) {
        double acc = bin[j];
        for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * win.at(i, j);
        x[j] = acc;
    }
    std::vector<double> h0(width, 0.0), c0(width, 0.0), h1, c1;
    oracle::LstmStepOracle::step(x, h0, c0, model.param("lstm.Wx"), model.param("lstm.Wh"),
                                 model.param("lstm.b"), h1, c1);
    for (std::size_t j = 0; j < width; ++j) EXPECT_NEAR(states[0][j], h1[j], 1e-12);
}

TEST(LstmEncode, PerturbingTurnZeroChangesLaterStates) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::lstm), vocab);
    Rng rng(7);
    auto feats = random_features(vocab, 3, rng);
    auto base = encode_states(model, feats);
    auto flipped = feats;
    flipped[0].user_vec[0] = 1.0 - flipped[0].user_vec[0];
    auto changed = encode_states(model, flipped);
    double diff = 0.0;
    for (std::size_t j = 0; j < model.config.width; ++j)
        diff += std::fabs(changed[2][j] - base[2][j]);
    EXPECT_GT(diff, 0.0);
}

TEST(EmbedPair, OutputsAreTwentyDimensional) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 7);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    Rng rng(8);
    auto feats = random_features(vocab, 2, rng);
    Tape tape;
    TapedModel tm(tape, model, false);
    auto enc = ted::encode_dialogue(tm, feats);
    auto [h_dlg, h_act] =
        ted::embed_pair(tm, enc.states.back(),
                        Tensor::row(ted::featurize_action(vocab.action_label(0), vocab)));
    EXPECT_EQ(tape.value(h_dlg).shape(), (std::vector<std::size_t>{1, 20}));
    EXPECT_EQ(tape.value(h_act).shape(), (std::vector<std::size_t>{1, 20}));
}

TEST(EmbedPair, ZeroInputZeroBiasGivesZeroEmbedding) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    Tape tape;
    TapedModel tm(tape, model, false);
    NodeId zero_state = tape.input(Tensor({1, model.config.width}, 0.0));
    NodeId h = ted::dialogue_embedding(tm, zero_state);
    EXPECT_EQ(tape.value(h), Tensor({1, 20}, 0.0));  // bias is zero-initialized
}

TEST(EmbedPair, ActionTowerMatchesMatmulOracle) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    Tape tape;
    TapedModel tm(tape, model, false);
    Rng rng(9);
    Tensor action_row = oracle::random_tensor(rng, {1, vocab.action_feature_dim()}, 0.0, 1.0);
    NodeId h = ted::action_embeddings(tm, tape.input(action_row));

    Tensor hidden = oracle::matmul(action_row, model.param("action_proj.W"));
    for (std::size_t j = 0; j < hidden.numel(); ++j) {
        hidden[j] += model.param("action_proj.b")[j];
        hidden[j] = std::max(hidden[j], 0.0);
    }
    Tensor want = oracle::matmul(hidden, model.param("action_embed.W"));
    for (std::size_t j = 0; j < want.numel(); ++j) want[j] += model.param("action_embed.b")[j];
    const Tensor& got = tape.value(h);
    for (std::size_t j = 0; j < want.numel(); ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
}

TEST(Similarity, OrthogonalVectorsGiveZero) {
    Tape tape;
    Tensor a({1, 20}, 0.0), b({1, 20}, 0.0);
    a.at(0, 0) = 2.0;
    b.at(0, 1) = 3.0;
    NodeId s = ted::similarity(tape, tape.input(a), tape.input(b));
    EXPECT_EQ(tape.scalar_value(s), 0.0);
}

TEST(Similarity, SelfSimilarityIsSquaredNorm) {
    Rng rng(10);
    Tensor h = oracle::random_tensor(rng, {1, 20});
    double norm2 = 0.0;
    for (std::size_t i = 0; i < 20; ++i) norm2 += h[i] * h[i];
    Tape tape;
    NodeId s = ted::similarity(tape, tape.input(h), tape.input(h));
    EXPECT_NEAR(tape.scalar_value(s), norm2, 1e-12);
}

TEST(Similarity, MatchesSumOfProductsOracle) {
    Rng rng(11);
    Tensor a = oracle::random_tensor(rng, {1, 20});
    Tensor b = oracle::random_tensor(rng, {1, 20});
    double want = 0.0;
    for (std::size_t i = 0; i < 20; ++i) want += a[i] * b[i];
    Tape tape;
    EXPECT_NEAR(tape.scalar_value(ted::similarity(tape, tape.input(a), tape.input(b))), want,
                1e-12);
}

TEST(Similarity, LengthMismatchThrows) {
    Tape tape;
    EXPECT_THROW(
        ted::similarity(tape, tape.input(Tensor({1, 20}, 0.0)), tape.input(Tensor({1, 19}, 0.0))),
        ted::ShapeError);
}

TEST(TedLoss, NoNegativesMeansExactlyZero) {
    for (double s_plus : {-3.0, 0.0, 2.5, 100.0}) {
        Tape tape;
        NodeId sp = tape.input(Tensor::scalar(s_plus));
        NodeId loss = ted::ted_loss(tape, sp, {});
        EXPECT_EQ(tape.scalar_value(loss), 0.0);
    }
}

TEST(TedLoss, SymmetricZeroPairGivesLogTwo) {
    Tape tape;
    NodeId sp = tape.input(Tensor::scalar(0.0));
    NodeId sm = tape.input(Tensor::scalar(0.0));
    NodeId loss = ted::ted_loss(tape, sp, {sm});
    EXPECT_NEAR(tape.scalar_value(loss), std::log(2.0), 1e-12);
}

TEST(TedLoss, MatchesDirectEvaluationOracle) {
    Tape tape;
    NodeId sp = tape.input(Tensor::scalar(2.0));
    NodeId sm0 = tape.input(Tensor::scalar(0.0));
    NodeId sm1 = tape.input(Tensor::scalar(-1.0));
    NodeId loss = ted::ted_loss(tape, sp, {sm0, sm1});
    const double want = oracle::retrieval_loss(2.0, {0.0, -1.0});
    EXPECT_NEAR(tape.scalar_value(loss), want, 1e-12);
    EXPECT_NEAR(want, 0.1698, 5e-4);  // spot value
}

TEST(TedLoss, NonNegativeAndPositiveWithNegatives) {
    Rng rng(12);
    for (int rep = 0; rep < 50; ++rep) {
        const double sp = rng.uniform(-5.0, 5.0);
        std::vector<double> sm;
        const std::size_t k = 1 + rng.uniform_int(5);
        for (std::size_t i = 0; i < k; ++i) sm.push_back(rng.uniform(-5.0, 5.0));
        Tape tape;
        std::vector<NodeId> sm_ids;
        for (double s : sm) sm_ids.push_back(tape.input(Tensor::scalar(s)));
        NodeId loss = ted::ted_loss(tape, tape.input(Tensor::scalar(sp)), sm_ids);
        const double got = tape.scalar_value(loss);
        EXPECT_GT(got, 0.0);
        EXPECT_NEAR(got, oracle::retrieval_loss(sp, sm), 1e-12);
    }
}

TEST(TedLoss, GradientSignsAndSumZero) {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor sp = Tensor::scalar(rng.uniform(-2.0, 2.0));
        sp.set_requires_grad(true);
        std::vector<Tensor> sm;
        const std::size_t k = 1 + rng.uniform_int(4);
        for (std::size_t i = 0; i < k; ++i) {
            Tensor t = Tensor::scalar(rng.uniform(-2.0, 2.0));
            t.set_requires_grad(true);
            sm.push_back(t);
        }
        Tape tape;
        NodeId sp_id = tape.input(sp);
        std::vector<NodeId> sm_ids;
        for (const Tensor& t : sm) sm_ids.push_back(tape.input(t));
        NodeId loss = ted::ted_loss(tape, sp_id, sm_ids);
        ted::GradStore grads = tape.backward(loss);

        const double g_plus = grads.at(sp_id)[0];
        EXPECT_GT(g_plus, -1.0);
        EXPECT_LE(g_plus, 0.0);
        double sum = g_plus;
        for (NodeId id : sm_ids) sum += grads.at(id)[0];
        EXPECT_NEAR(sum, 0.0, 1e-10);
    }
}

TEST(Ranking, ScoresSortedNonIncreasingAndShiftInvariant) {
    Rng rng(14);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> scores;
        for (int i = 0; i < 12; ++i) scores.push_back(rng.uniform(-3.0, 3.0));
        auto order = ted::rank_scores(scores);
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            EXPECT_GE(scores[order[i]], scores[order[i + 1]]);
        std::vector<double> shifted = scores;
        for (double& s : shifted) s += 17.25;
        EXPECT_EQ(ted::rank_scores(shifted), order);
    }
}

TEST(Ranking, TiesBrokenByActionIndex) {
    std::vector<double> scores = {1.0, 5.0, 5.0, -2.0};
    auto order = ted::rank_scores(scores);
    EXPECT_EQ(order, (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(Predict, RankedListCoversAllActionsSorted) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 6);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer, 2, 8), vocab);
    Rng rng(15);
    auto feats = random_features(vocab, 3, rng);
    ted::Prediction p = ted::predict(model, feats);
    ASSERT_EQ(p.ranked.size(), vocab.n_actions());
    for (std::size_t i = 0; i + 1 < p.ranked.size(); ++i)
        EXPECT_GE(p.ranked[i].second, p.ranked[i + 1].second);
}

TEST(Predict, EmptyPrefixThrows) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::transformer), vocab);
    EXPECT_THROW(ted::predict(model, {}), ted::UsageError);
}

TEST(Predict, PrefixPredictionMatchesFullPassComponent) {
    FeatureVocab vocab = synthetic_vocab(4, 3, 6);
    Rng rng(16);
    for (auto kind : {EncoderKind::transformer, EncoderKind::lstm}) {
        TedConfig cfg = tiny_config(kind, 2, 8);
        cfg.max_history = 4;
        TedModel model = TedModel::init(cfg, vocab);
        auto feats = random_features(vocab, 5, rng);
        auto full = ted::predict_all_turns(model, feats);
        for (std::size_t cut = 1; cut <= feats.size(); ++cut) {
            std::vector<TurnFeatures> prefix(feats.begin(), feats.begin() + cut);
            ted::Prediction p = ted::predict(model, prefix);
            ASSERT_EQ(p.ranked.size(), full[cut - 1].ranked.size());
            for (std::size_t i = 0; i < p.ranked.size(); ++i) {
                EXPECT_EQ(p.ranked[i].first, full[cut - 1].ranked[i].first);
                EXPECT_EQ(p.ranked[i].second, full[cut - 1].ranked[i].second);  // bit-identical
            }
        }
    }
}

TEST(Predict, MaxHistoryWindowMakesOldTurnsIrrelevant) {
    FeatureVocab vocab = synthetic_vocab(4, 3, 6);
    TedConfig cfg = tiny_config(EncoderKind::transformer, 2, 8);
    cfg.max_history = 3;
    TedModel model = TedModel::init(cfg, vocab);
    Rng rng(17);
    auto a = random_features(vocab, 7, rng);
    auto b = random_features(vocab, 9, rng);
    // force the last N turns to agree
    for (std::size_t i = 0; i < cfg.max_history; ++i)
        b[b.size() - 1 - i] = a[a.size() - 1 - i];
    ted::Prediction pa = ted::predict(model, a);
    ted::Prediction pb = ted::predict(model, b);
    ASSERT_EQ(pa.ranked.size(), pb.ranked.size());
    for (std::size_t i = 0; i < pa.ranked.size(); ++i) {
        EXPECT_EQ(pa.ranked[i].first, pb.ranked[i].first);
        EXPECT_EQ(pa.ranked[i].second, pb.ranked[i].second);
    }
}

TEST(AttentionMaps, UpperTriangleExactlyZeroAndRowsSumToOne) {
    FeatureVocab vocab = synthetic_vocab(4, 3, 6);
    TedConfig cfg = tiny_config(EncoderKind::transformer, 2, 8);
    cfg.max_history = 4;
    cfg.n_layers = 2;
    TedModel model = TedModel::init(cfg, vocab);
    Rng rng(18);
    auto feats = random_features(vocab, 6, rng);
    auto maps = ted::attention_maps(model, feats);
    ASSERT_EQ(maps.size(), cfg.n_layers);
    ASSERT_EQ(maps[0].size(), cfg.n_heads);
    const std::size_t T = feats.size();
    for (const auto& layer : maps) {
        for (const Tensor& m : layer) {
            ASSERT_EQ(m.rows(), T);
            for (std::size_t i = 0; i < T; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < T; ++j) {
                    if (j > i) {
                        EXPECT_EQ(m.at(i, j), 0.0);
                    }
                    sum += m.at(i, j);
                }
                EXPECT_NEAR(sum, 1.0, 1e-9);
                // outside the window must be zero as well
                for (std::size_t j = 0; i >= cfg.max_history && j + cfg.max_history <= i; ++j)
                    EXPECT_EQ(m.at(i, j), 0.0);
            }
        }
    }
}

TEST(AttentionMaps, LstmEncoderRejected) {
    FeatureVocab vocab = synthetic_vocab(3, 2, 5);
    TedModel model = TedModel::init(tiny_config(EncoderKind::lstm), vocab);
    Rng rng(19);
    auto feats = random_features(vocab, 2, rng);
    EXPECT_THROW(ted::attention_maps(model, feats), ted::DataError);
}

// Full-model gradient check: finite differences on a sample of parameter
// entries through encoder, towers and loss.
TEST(ModelGradients, EndToEndFiniteDifferenceSpotCheck) {
    for (auto kind : {EncoderKind::transformer, EncoderKind::lstm}) {
        FeatureVocab vocab = synthetic_vocab(3, 2, 5);
        TedConfig cfg = tiny_config(kind, 2, 6);
        cfg.ff_width = 8;
        TedModel model = TedModel::init(cfg, vocab);
        Rng rng(20);
        auto feats = random_features(vocab, 3, rng);
        const Tensor action_feats = ted::action_feature_matrix(vocab);

        auto loss_of = [&](const TedModel& m) {
            Tape tape;
            TapedModel tm(tape, m, false);
            Rng neg_rng(99);
            NodeId embeds = ted::action_embeddings(tm, tape.input(action_feats));
            return tape.scalar_value(
                ted::dialogue_loss(tm, feats, embeds, vocab.n_actions(), 2, neg_rng));
        };

        Tape tape;
        TapedModel tm(tape, model, true);
        Rng neg_rng(99);
        NodeId embeds = ted::action_embeddings(tm, tape.input(action_feats));
        NodeId loss = ted::dialogue_loss(tm, feats, embeds, vocab.n_actions(), 2, neg_rng);
        ted::GradStore grads = tape.backward(loss);

        Rng pick(21);
        for (int rep = 0; rep < 12; ++rep) {
            const std::size_t pi = pick.uniform_int(model.params().size());
            auto& [name, tensor] = model.params()[pi];
            const std::size_t ei = pick.uniform_int(tensor.numel());
            const double h = 1e-6;
            TedModel plus = model, minus = model;
            plus.params()[pi].second[ei] += h;
            minus.params()[pi].second[ei] -= h;
            const double fd = (loss_of(plus) - loss_of(minus)) / (2 * h);
            const double analytic = grads.at(tm.ids()[pi].second)[ei];
            const double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-4});
            EXPECT_LE(std::fabs(fd - analytic) / denom, 1e-5)
                << to_string(kind) << " param " << name << " entry " << ei;
        }
    }
}
