#pragma once

// Interactive loop over a trained policy. Modular checkpoints take
// `intent` or `intent[slot=value, slot=value]` per line; end-to-end
// checkpoints take free text. After each user turn the top-3 ranked actions
// are printed and the best one is appended to the dialogue as the system
// turn. `:reset`, `:history` and `:quit` are session commands.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ted/featurizer.hpp"
#include "ted/metrics.hpp"
#include "ted/policy.hpp"

namespace ted {

class ReplSession {
  public:
    explicit ReplSession(TedModel model) : model_(std::move(model)) {
        dialogue_.id = "repl";
        dialogue_.domain = "repl";
    }

    bool done() const { return done_; }

    std::string greeting() const {
        std::string out = "ted policy repl (" + to_string(model_.config.encoder) + ", " +
                          to_string(model_.vocab.mode) + " mode)\n";
        out += model_.vocab.mode == FeatureMode::modular
                   ? "type: intent or intent[slot=value,...]   commands: :reset :history :quit\n"
                   : "type a user message.   commands: :reset :history :quit\n";
        return out;
    }

    std::string handle_line(const std::string& raw) {
        const std::string line = trim(raw);
        if (line.empty()) return "";
        if (line == ":quit") {
            done_ = true;
            return "bye\n";
        }
        if (line == ":reset") {
            dialogue_.turns.clear();
            return "session reset\n";
        }
        if (line == ":history") return history();
        if (line[0] == ':') return "unknown command '" + line + "'\n";

        Turn turn;
        turn.user_text = line;
        if (model_.vocab.mode == FeatureMode::modular) {
            std::string error = parse_modular_input(line, turn);
            if (!error.empty()) return error;  // turn not consumed
        } else {
            turn.user_intent = "utterance";
        }

        dialogue_.turns.push_back(turn);
        Prediction pred;
        try {
            auto feats =
                featurize_dialogue(dialogue_, model_.vocab, SymbolPolicy::lenient, nullptr);
            pred = predict(model_, feats);
        } catch (...) {
            dialogue_.turns.pop_back();
            throw;
        }

        Turn& current = dialogue_.turns.back();
        current.system_action = pred.top();
        auto text_it = model_.vocab.action_texts.find(current.system_action);
        current.system_text =
            text_it != model_.vocab.action_texts.end() ? text_it->second : current.system_action;

        std::string out;
        const std::size_t top_k = std::min<std::size_t>(3, pred.ranked.size());
        for (std::size_t i = 0; i < top_k; ++i)
            out += strf("  %zu. %-32s %+.4f\n", i + 1, pred.ranked[i].first.c_str(),
                        pred.ranked[i].second);
        out += "bot> " + current.system_text + "\n";
        return out;
    }

    const Dialogue& transcript() const { return dialogue_; }

  private:
    std::string history() const {
        if (dialogue_.turns.empty()) return "(empty session)\n";
        std::string out;
        for (std::size_t t = 0; t < dialogue_.turns.size(); ++t) {
            const Turn& turn = dialogue_.turns[t];
            out += strf("%2zu user> %s\n", t, turn.user_text.c_str());
            out += strf("   bot>  [%s] %s\n", turn.system_action.c_str(),
                        turn.system_text.c_str());
        }
        return out;
    }

    std::string known_intents() const {
        std::vector<std::string> names;
        for (const auto& [name, _] : model_.vocab.intent_index) names.push_back(name);
        return join(names.begin(), names.end(), ", ");
    }

    // "intent" or "intent[a=1, b=2]"; returns an error message on failure.
    std::string parse_modular_input(const std::string& line, Turn& turn) const {
        std::string intent = line;
        std::string entity_part;
        const auto bracket = line.find('[');
        if (bracket != std::string::npos) {
            if (line.back() != ']') return "expected closing ']' in '" + line + "'\n";
            intent = trim(line.substr(0, bracket));
            entity_part = line.substr(bracket + 1, line.size() - bracket - 2);
        }
        if (!model_.vocab.intent_index.count(intent))
            return "unknown intent '" + intent + "'. known intents: " + known_intents() + "\n";
        turn.user_intent = intent;
        if (!entity_part.empty()) {
            for (const auto& item : split(entity_part, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    return "expected slot=value in '" + trim(item) + "'\n";
                const std::string slot = trim(item.substr(0, eq));
                const std::string value = trim(item.substr(eq + 1));
                if (!model_.vocab.entity_index.count(slot))
                    return "unknown entity '" + slot + "'. known entities: " +
                           join_keys(model_.vocab.entity_index) + "\n";
                turn.user_entities[slot] = value;
            }
        }
        return "";
    }

    static std::string join_keys(const std::map<std::string, std::size_t>& m) {
        std::vector<std::string> names;
        for (const auto& [name, _] : m) names.push_back(name);
        return join(names.begin(), names.end(), ", ");
    }

    TedModel model_;
    Dialogue dialogue_;
    bool done_ = false;
};

inline void run_repl(TedModel model, std::istream& in, std::ostream& out) {
    ReplSession session(std::move(model));
    out << session.greeting();
    std::string line;
    while (!session.done()) {
        out << "user> " << std::flush;
        if (!std::getline(in, line)) break;
        out << session.handle_line(line);
    }
}

}  // namespace ted
