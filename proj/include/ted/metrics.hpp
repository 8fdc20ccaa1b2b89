#pragma once

// Evaluation: per-turn retrieval accuracy, full-dialogue accuracy (every
// action in the conversation correct), unweighted macro-F1 over labels with
// support, and a per-turn prediction log that is sufficient to recompute
// all of the above independently.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ted/corpus.hpp"
#include "ted/featurizer.hpp"
#include "ted/policy.hpp"

namespace ted {

struct LabelStat {
    std::string label;
    std::size_t support = 0;    // gold occurrences
    std::size_t predicted = 0;  // predicted occurrences
    std::size_t correct = 0;    // gold == predicted
    double precision = 0.0;     // 0 when never predicted
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    double full_dialogue_accuracy = 0.0;
    double action_accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n_dialogues = 0;
    std::size_t n_turns = 0;
    std::size_t n_unknown_gold_turns = 0;  // gold labels outside the vocab, counted wrong
    FeaturizeStats featurize_stats;
    std::vector<LabelStat> per_label;  // sorted by label name
};

struct PredictionLogRow {
    std::string dialogue_id;
    std::size_t turn = 0;
    std::string gold;
    std::string predicted;
    double score = 0.0;
    bool correct = false;
};

struct EvalResult {
    EvalReport report;
    std::vector<PredictionLogRow> log;
};

// Confusion-count aggregation shared by evaluate() and the recompute path.
inline EvalReport metrics_from_log(const std::vector<PredictionLogRow>& log,
                                   std::size_t n_dialogues) {
    EvalReport rep;
    rep.n_dialogues = n_dialogues;
    rep.n_turns = log.size();
    std::map<std::string, LabelStat> stats;
    std::map<std::string, bool> dialogue_ok;
    std::size_t correct_turns = 0;
    for (const auto& row : log) {
        auto& gold_stat = stats[row.gold];
        gold_stat.label = row.gold;
        ++gold_stat.support;
        auto& pred_stat = stats[row.predicted];
        pred_stat.label = row.predicted;
        ++pred_stat.predicted;
        if (row.correct) {
            ++correct_turns;
            ++gold_stat.correct;
        }
        auto [it, inserted] = dialogue_ok.emplace(row.dialogue_id, true);
        if (!row.correct) it->second = false;
    }
    rep.action_accuracy =
        log.empty() ? 0.0 : static_cast<double>(correct_turns) / static_cast<double>(log.size());
    std::size_t ok = 0;
    for (const auto& [_, good] : dialogue_ok) ok += good ? 1 : 0;
    rep.full_dialogue_accuracy =
        dialogue_ok.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(dialogue_ok.size());

    double f1_sum = 0.0;
    std::size_t f1_count = 0;
    for (auto& [label, s] : stats) {
        s.precision = s.predicted == 0 ? 0.0
                                       : static_cast<double>(s.correct) /
                                             static_cast<double>(s.predicted);
        s.recall = s.support == 0
                       ? 0.0
                       : static_cast<double>(s.correct) / static_cast<double>(s.support);
        s.f1 = (s.precision + s.recall) == 0.0
                   ? 0.0
                   : 2.0 * s.precision * s.recall / (s.precision + s.recall);
        if (s.support > 0) {  // macro-F1 is over labels that actually occur
            f1_sum += s.f1;
            ++f1_count;
        }
        rep.per_label.push_back(s);
    }
    rep.macro_f1 = f1_count == 0 ? 0.0 : f1_sum / static_cast<double>(f1_count);
    return rep;
}

inline EvalResult evaluate(const TedModel& model, const Corpus& test) {
    EvalResult result;
    if (test.dialogues.empty()) throw DataError("evaluate: empty test corpus");
    FeaturizeStats stats;
    std::size_t unknown_gold = 0;
    for (const Dialogue& d : test.dialogues) {
        auto feats = featurize_dialogue(d, model.vocab, SymbolPolicy::lenient, &stats);
        auto preds = predict_all_turns(model, feats);
        for (std::size_t t = 0; t < feats.size(); ++t) {
            PredictionLogRow row;
            row.dialogue_id = d.id;
            row.turn = t;
            row.gold = d.turns[t].system_action;
            row.predicted = preds[t].ranked.front().first;
            row.score = preds[t].ranked.front().second;
            row.correct = feats[t].target_known && row.predicted == row.gold;
            if (!feats[t].target_known) ++unknown_gold;
            result.log.push_back(std::move(row));
        }
    }
    result.report = metrics_from_log(result.log, test.dialogues.size());
    result.report.n_unknown_gold_turns = unknown_gold;
    result.report.featurize_stats = stats;
    return result;
}

// --- serialization ---------------------------------------------------------

inline std::string prediction_log_to_tsv(const std::vector<PredictionLogRow>& log) {
    std::string out = "dialogue_id\tturn\tgold\tpredicted\tscore\tcorrect\n";
    for (const auto& r : log)
        out += strf("%s\t%zu\t%s\t%s\t%.9g\t%d\n", r.dialogue_id.c_str(), r.turn, r.gold.c_str(),
                    r.predicted.c_str(), r.score, r.correct ? 1 : 0);
    return out;
}

inline std::vector<PredictionLogRow> prediction_log_from_tsv(const std::string& text) {
    std::vector<PredictionLogRow> log;
    const auto lines = split(text, '\n');
    for (std::size_t i = 1; i < lines.size(); ++i) {  // skip header
        if (trim(lines[i]).empty()) continue;
        const auto cols = split(lines[i], '\t');
        if (cols.size() != 6)
            throw DataError(strf("prediction log line %zu: expected 6 columns", i + 1));
        PredictionLogRow r;
        r.dialogue_id = cols[0];
        r.turn = std::stoull(cols[1]);
        r.gold = cols[2];
        r.predicted = cols[3];
        r.score = std::stod(cols[4]);
        r.correct = cols[5] == "1";
        log.push_back(std::move(r));
    }
    return log;
}

inline json eval_report_to_json(const EvalReport& rep) {
    json per_label = json::array();
    for (const auto& s : rep.per_label) {
        per_label.push_back(json{{"label", s.label},
                                 {"support", s.support},
                                 {"predicted", s.predicted},
                                 {"correct", s.correct},
                                 {"precision", s.precision},
                                 {"recall", s.recall},
                                 {"f1", s.f1}});
    }
    return json{{"full_dialogue_accuracy", rep.full_dialogue_accuracy},
                {"action_accuracy", rep.action_accuracy},
                {"macro_f1", rep.macro_f1},
                {"n_dialogues", rep.n_dialogues},
                {"n_turns", rep.n_turns},
                {"n_unknown_gold_turns", rep.n_unknown_gold_turns},
                {"dropped_tokens", rep.featurize_stats.dropped_tokens},
                {"unknown_intents", rep.featurize_stats.unknown_intents},
                {"unknown_entities", rep.featurize_stats.unknown_entities},
                {"unknown_prev_actions", rep.featurize_stats.unknown_prev_actions},
                {"per_label", per_label}};
}

inline std::string eval_report_to_text(const EvalReport& rep) {
    std::string out;
    out += strf("dialogues: %zu  turns: %zu\n", rep.n_dialogues, rep.n_turns);
    out += strf("full_dialogue_accuracy: %.6f\n", rep.full_dialogue_accuracy);
    out += strf("action_accuracy:        %.6f\n", rep.action_accuracy);
    out += strf("macro_f1:               %.6f\n", rep.macro_f1);
    if (rep.n_unknown_gold_turns > 0)
        out += strf("unknown gold labels on %zu turns (counted as wrong)\n",
                    rep.n_unknown_gold_turns);
    out += "label                             support  prec    recall  f1\n";
    for (const auto& s : rep.per_label) {
        if (s.support == 0 && s.predicted == 0) continue;
        out += strf("%-33s %7zu  %.4f  %.4f  %.4f\n", s.label.c_str(), s.support, s.precision,
                    s.recall, s.f1);
    }
    return out;
}

}  // namespace ted
