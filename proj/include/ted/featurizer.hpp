#pragma once

// Turns dialogues into binary vectors. Modular mode encodes the recognized
// intent and detected entity names; end-to-end mode encodes utterances as
// bag-of-words. Slots are tracked most-recent-value-wins and always encoded
// as two bits per slot: [filled, dont_care].

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ted/common.hpp"
#include "ted/corpus.hpp"

namespace ted {

enum class FeatureMode { modular, end_to_end };

inline std::string to_string(FeatureMode m) {
    return m == FeatureMode::modular ? "modular" : "e2e";
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "modular") return FeatureMode::modular;
    if (s == "e2e" || s == "end_to_end") return FeatureMode::end_to_end;
    throw UsageError("unknown feature mode '" + s + "' (expected modular or e2e)");
}

// Unknown-symbol handling: strict raises DataError (training contract),
// lenient zero-fills and counts (evaluation of out-of-vocab test dialogues).
enum class SymbolPolicy { strict, lenient };

struct FeaturizeStats {
    std::size_t unknown_intents = 0;
    std::size_t unknown_entities = 0;
    std::size_t unknown_actions = 0;       // gold labels missing from the vocab
    std::size_t unknown_prev_actions = 0;  // previous-turn labels missing
    std::size_t dropped_tokens = 0;        // end-to-end: tokens outside the vocab

    std::size_t total() const {
        return unknown_intents + unknown_entities + unknown_actions + unknown_prev_actions +
               dropped_tokens;
    }
};

constexpr int kVocabFormatVersion = 1;

class FeatureVocab {
  public:
    FeatureMode mode = FeatureMode::modular;
    std::map<std::string, std::size_t> intent_index;
    std::map<std::string, std::size_t> entity_index;
    std::map<std::string, std::size_t> slot_index;
    std::map<std::string, std::size_t> action_index;
    std::map<std::string, std::size_t> token_index;
    // Canonical response text per action label, for retrieval-target
    // featurization in end-to-end mode and for the REPL transcript.
    std::map<std::string, std::string> action_texts;

    std::vector<std::string> action_labels;  // index -> label

    std::size_t user_dim() const {
        return mode == FeatureMode::modular ? intent_index.size() + entity_index.size()
                                            : token_index.size();
    }
    std::size_t slot_dim() const { return 2 * slot_index.size(); }
    std::size_t prev_action_dim() const {
        return mode == FeatureMode::modular ? action_index.size() : token_index.size();
    }
    std::size_t action_feature_dim() const { return prev_action_dim(); }
    std::size_t input_dim() const { return user_dim() + slot_dim() + prev_action_dim(); }
    std::size_t n_actions() const { return action_index.size(); }

    const std::string& action_label(std::size_t index) const {
        if (index >= action_labels.size())
            throw DataError("action index " + std::to_string(index) + " out of range");
        return action_labels[index];
    }

    std::string to_manifest() const {
        std::ostringstream out;
        out << "vocab_format " << kVocabFormatVersion << "\n";
        out << "mode " << to_string(mode) << "\n";
        auto section = [&out](const char* name, const std::map<std::string, std::size_t>& m) {
            out << "section " << name << " " << m.size() << "\n";
            for (const auto& [sym, idx] : m) out << sym << "\t" << idx << "\n";
        };
        section("intents", intent_index);
        section("entities", entity_index);
        section("slots", slot_index);
        section("actions", action_index);
        section("tokens", token_index);
        out << "section action_texts " << action_texts.size() << "\n";
        for (const auto& [label, text] : action_texts) {
            if (text.find('\t') != std::string::npos || text.find('\n') != std::string::npos)
                throw DataError("action text for '" + label + "' contains tab or newline");
            out << label << "\t" << text << "\n";
        }
        return out.str();
    }

    std::string digest() const { return to_hex(fnv1a64(to_manifest())); }

    static FeatureVocab from_manifest(const std::string& text) {
        FeatureVocab v;
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        auto next_line = [&]() {
            if (!std::getline(in, line)) throw DataError("vocab manifest: unexpected end of file");
            ++line_no;
            return line;
        };
        {
            std::istringstream h(next_line());
            std::string tag;
            int version = 0;
            h >> tag >> version;
            if (tag != "vocab_format" || version != kVocabFormatVersion)
                throw DataError("vocab manifest: unsupported header '" + line + "'");
        }
        {
            std::istringstream h(next_line());
            std::string tag, m;
            h >> tag >> m;
            if (tag != "mode") throw DataError("vocab manifest: expected mode line");
            v.mode = feature_mode_from_string(m);
        }
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            std::istringstream h(line);
            std::string tag, name;
            std::size_t count = 0;
            h >> tag >> name >> count;
            if (tag != "section")
                throw DataError(strf("vocab manifest line %zu: expected section header", line_no));
            for (std::size_t i = 0; i < count; ++i) {
                const std::string& entry = next_line();
                const auto tab = entry.find('\t');
                if (tab == std::string::npos)
                    throw DataError(strf("vocab manifest line %zu: missing tab", line_no));
                const std::string sym = entry.substr(0, tab);
                const std::string rest = entry.substr(tab + 1);
                if (name == "action_texts") {
                    v.action_texts[sym] = rest;
                } else {
                    const std::size_t idx = std::stoull(rest);
                    if (name == "intents") v.intent_index[sym] = idx;
                    else if (name == "entities") v.entity_index[sym] = idx;
                    else if (name == "slots") v.slot_index[sym] = idx;
                    else if (name == "actions") v.action_index[sym] = idx;
                    else if (name == "tokens") v.token_index[sym] = idx;
                    else throw DataError("vocab manifest: unknown section '" + name + "'");
                }
            }
        }
        v.rebuild_labels();
        return v;
    }

    void rebuild_labels() {
        action_labels.assign(action_index.size(), "");
        for (const auto& [label, idx] : action_index) {
            if (idx >= action_labels.size())
                throw DataError("vocab: non-contiguous action indices");
            action_labels[idx] = label;
        }
    }
};

namespace detail {

inline std::map<std::string, std::size_t> enumerate(const std::set<std::string>& symbols) {
    std::map<std::string, std::size_t> index;
    std::size_t i = 0;
    for (const auto& s : symbols) index[s] = i++;  // lexicographic by set order
    return index;
}

}  // namespace detail

inline FeatureVocab build_vocab(const Corpus& corpus, FeatureMode mode) {
    if (corpus.dialogues.empty()) throw DataError("build_vocab: empty corpus");
    std::set<std::string> intents, entities, actions, tokens;
    std::map<std::string, std::string> action_texts;       // first cooperative occurrence
    std::map<std::string, std::string> action_texts_any;   // first occurrence fallback
    for (const Dialogue& d : corpus.dialogues) {
        for (const Turn& t : d.turns) {
            intents.insert(t.user_intent);
            actions.insert(t.system_action);
            for (const auto& [k, _] : t.user_entities) entities.insert(k);
            if (t.cooperative) action_texts.emplace(t.system_action, t.system_text);
            action_texts_any.emplace(t.system_action, t.system_text);
            if (mode == FeatureMode::end_to_end) {
                for (const auto& w : tokenize_words(t.user_text)) tokens.insert(w);
                for (const auto& w : tokenize_words(t.system_text)) tokens.insert(w);
            }
        }
    }
    FeatureVocab v;
    v.mode = mode;
    v.intent_index = detail::enumerate(intents);
    v.entity_index = detail::enumerate(entities);
    v.slot_index = v.entity_index;  // tracked slots are the observed entity names
    v.action_index = detail::enumerate(actions);
    v.token_index = detail::enumerate(tokens);
    for (const auto& [label, _] : v.action_index) {
        auto it = action_texts.find(label);
        v.action_texts[label] =
            it != action_texts.end() ? it->second : action_texts_any.at(label);
    }
    v.rebuild_labels();
    return v;
}

// Per-slot tracking state. Status never reverts to absent; the most recent
// value wins, and the sentinel value "any" marks the slot as dont_care.
class SlotState {
  public:
    enum class Status { absent, filled, dont_care };

    explicit SlotState(const FeatureVocab& vocab)
        : vocab_(&vocab), status_(vocab.slot_index.size(), Status::absent),
          last_value_(vocab.slot_index.size()) {}

    void observe(const std::string& slot, const std::string& value) {
        auto it = vocab_->slot_index.find(slot);
        if (it == vocab_->slot_index.end())
            throw DataError("slot '" + slot + "' not present in vocab");
        status_[it->second] =
            value == templates::kDontCareValue ? Status::dont_care : Status::filled;
        last_value_[it->second] = value;
    }

    Status status(std::size_t slot_idx) const { return status_[slot_idx]; }
    const std::string& last_value(std::size_t slot_idx) const { return last_value_[slot_idx]; }

    // Two bits per slot: [filled, dont_care]; absent is [0, 0].
    std::vector<double> to_bits() const {
        std::vector<double> bits(2 * status_.size(), 0.0);
        for (std::size_t i = 0; i < status_.size(); ++i) {
            if (status_[i] == Status::filled) bits[2 * i] = 1.0;
            if (status_[i] == Status::dont_care) bits[2 * i + 1] = 1.0;
        }
        return bits;
    }

  private:
    const FeatureVocab* vocab_;
    std::vector<Status> status_;
    std::vector<std::string> last_value_;
};

struct TurnFeatures {
    std::vector<double> user_vec;
    std::vector<double> slot_vec;
    std::vector<double> prev_action_vec;
    std::size_t action_target_index = 0;
    bool target_known = true;  // false only under SymbolPolicy::lenient
};

// Retrieval-target featurization of an action label: one-hot over the label
// inventory in modular mode, bag-of-words of the label's canonical response
// text in end-to-end mode.
inline std::vector<double> featurize_action(const std::string& label, const FeatureVocab& vocab) {
    auto it = vocab.action_index.find(label);
    if (it == vocab.action_index.end())
        throw DataError("unknown action label '" + label + "'");
    std::vector<double> vec(vocab.action_feature_dim(), 0.0);
    if (vocab.mode == FeatureMode::modular) {
        vec[it->second] = 1.0;
    } else {
        for (const auto& w : tokenize_words(vocab.action_texts.at(label))) {
            auto tok = vocab.token_index.find(w);
            if (tok != vocab.token_index.end()) vec[tok->second] = 1.0;
        }
    }
    return vec;
}

inline std::vector<double> bag_of_words(const std::string& text, const FeatureVocab& vocab,
                                        FeaturizeStats* stats) {
    std::vector<double> vec(vocab.token_index.size(), 0.0);
    for (const auto& w : tokenize_words(text)) {
        auto it = vocab.token_index.find(w);
        if (it != vocab.token_index.end()) {
            vec[it->second] = 1.0;  // binary clip of the token multiset
        } else if (stats) {
            ++stats->dropped_tokens;
        }
    }
    return vec;
}

// Featurizes a dialogue turn by turn. Turn t sees the slot state after its
// own entities are consumed and the system action of turn t-1 (zeros at
// t=0). No lookahead: the features of a prefix equal the prefix of the
// features.
inline std::vector<TurnFeatures> featurize_dialogue(const Dialogue& dialogue,
                                                    const FeatureVocab& vocab,
                                                    SymbolPolicy policy = SymbolPolicy::strict,
                                                    FeaturizeStats* stats = nullptr) {
    FeaturizeStats local;
    FeaturizeStats* st = stats ? stats : &local;
    std::vector<TurnFeatures> out;
    SlotState slot_state(vocab);
    const bool modular = vocab.mode == FeatureMode::modular;

    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        const Turn& turn = dialogue.turns[t];
        TurnFeatures f;

        // user input
        if (modular) {
            f.user_vec.assign(vocab.user_dim(), 0.0);
            auto it = vocab.intent_index.find(turn.user_intent);
            if (it != vocab.intent_index.end()) {
                f.user_vec[it->second] = 1.0;
            } else if (policy == SymbolPolicy::strict) {
                throw DataError("unknown intent '" + turn.user_intent + "' in dialogue " +
                                dialogue.id + " turn " + std::to_string(t));
            } else {
                ++st->unknown_intents;
            }
            for (const auto& [name, _] : turn.user_entities) {
                auto ent = vocab.entity_index.find(name);
                if (ent != vocab.entity_index.end()) {
                    f.user_vec[vocab.intent_index.size() + ent->second] = 1.0;
                } else if (policy == SymbolPolicy::strict) {
                    throw DataError("unknown entity '" + name + "' in dialogue " + dialogue.id +
                                    " turn " + std::to_string(t));
                } else {
                    ++st->unknown_entities;
                }
            }
        } else {
            f.user_vec = bag_of_words(turn.user_text, vocab, st);
        }

        // slot state after consuming this turn's entities
        for (const auto& [name, value] : turn.user_entities) {
            if (vocab.slot_index.count(name)) slot_state.observe(name, value);
        }
        f.slot_vec = slot_state.to_bits();

        // previous system action (utterance in end-to-end mode)
        if (t == 0) {
            f.prev_action_vec.assign(vocab.prev_action_dim(), 0.0);
        } else if (modular) {
            const std::string& prev = dialogue.turns[t - 1].system_action;
            f.prev_action_vec.assign(vocab.prev_action_dim(), 0.0);
            auto it = vocab.action_index.find(prev);
            if (it != vocab.action_index.end()) {
                f.prev_action_vec[it->second] = 1.0;
            } else if (policy == SymbolPolicy::strict) {
                throw DataError("unknown previous action '" + prev + "' in dialogue " +
                                dialogue.id + " turn " + std::to_string(t));
            } else {
                ++st->unknown_prev_actions;
            }
        } else {
            f.prev_action_vec = bag_of_words(dialogue.turns[t - 1].system_text, vocab, st);
        }

        // gold label
        auto act = vocab.action_index.find(turn.system_action);
        if (act != vocab.action_index.end()) {
            f.action_target_index = act->second;
        } else if (policy == SymbolPolicy::strict) {
            throw DataError("unknown action '" + turn.system_action + "' in dialogue " +
                            dialogue.id + " turn " + std::to_string(t));
        } else {
            f.target_known = false;
            ++st->unknown_actions;
        }
        out.push_back(std::move(f));
    }
    return out;
}

// Flattened per-turn input for the encoders: user_vec | slot_vec | prev_action_vec.
inline std::vector<double> input_row(const TurnFeatures& f) {
    std::vector<double> row;
    row.reserve(f.user_vec.size() + f.slot_vec.size() + f.prev_action_vec.size());
    row.insert(row.end(), f.user_vec.begin(), f.user_vec.end());
    row.insert(row.end(), f.slot_vec.begin(), f.slot_vec.end());
    row.insert(row.end(), f.prev_action_vec.begin(), f.prev_action_vec.end());
    return row;
}

inline void save_vocab(const FeatureVocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << vocab.to_manifest();
    if (!out) throw DataError("failed writing vocab to '" + path + "'");
}

inline FeatureVocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocab file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return FeatureVocab::from_manifest(buf.str());
}

}  // namespace ted
