#pragma once

// Plain key=value config files. '#' starts a comment; whitespace around
// keys and values is trimmed. Every TedConfig and GenerationConfig field is
// addressable; unknown keys are usage errors so typos do not pass silently.

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ted/common.hpp"
#include "ted/corpus.hpp"
#include "ted/policy.hpp"

namespace ted {

inline std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(strf("config line %zu: expected key=value", line_no));
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str());
}

inline std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    for (const auto& item : split(value, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

// Fallback chit-chat templates for intents that are not in the built-in pool.
inline ChitchatIntent make_chitchat_intent(const std::string& name) {
    for (const ChitchatIntent& c : GenerationConfig::default_chitchat_pool())
        if (c.name == name) return c;
    std::string topic = name;
    if (topic.rfind("chitchat_", 0) == 0) topic = topic.substr(9);
    ChitchatIntent c;
    c.name = name;
    c.user_texts = {"can we talk about " + topic, "i was wondering about " + topic};
    c.answer_text = "i do not have much to say about " + topic + ".";
    return c;
}

inline GenerationConfig generation_config_from_kv(
    const std::vector<std::pair<std::string, std::string>>& kvs) {
    GenerationConfig cfg;
    bool domains_set = false;
    for (const auto& [key, value] : kvs) {
        try {
            if (key == "n_dialogues") {
                cfg.n_dialogues = std::stoull(value);
            } else if (key == "domains") {
                cfg.domains = parse_list(value);
                domains_set = true;
            } else if (key.rfind("slots.", 0) == 0) {
                cfg.required_slots[key.substr(6)] = parse_list(value);
            } else if (key == "digression_probability") {
                cfg.digression_probability = std::stod(value);
            } else if (key == "digression_length_min") {
                cfg.digression_length_min = std::stoull(value);
            } else if (key == "digression_length_max") {
                cfg.digression_length_max = std::stoull(value);
            } else if (key == "chitchat_intents") {
                cfg.chitchat_pool.clear();
                for (const auto& name : parse_list(value))
                    cfg.chitchat_pool.push_back(make_chitchat_intent(name));
            } else if (key.rfind("chitchat_user_text.", 0) == 0) {
                const std::string name = key.substr(19);
                for (auto& c : cfg.chitchat_pool)
                    if (c.name == name) c.user_texts = {value};
            } else if (key.rfind("chitchat_answer_text.", 0) == 0) {
                const std::string name = key.substr(21);
                for (auto& c : cfg.chitchat_pool)
                    if (c.name == name) c.answer_text = value;
            } else if (key == "seed") {
                cfg.seed = std::stoull(value);
            } else {
                throw UsageError("unknown generation config key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw UsageError("bad value '" + value + "' for generation config key '" + key + "'");
        } catch (const std::out_of_range&) {
            throw UsageError("value '" + value + "' out of range for key '" + key + "'");
        }
    }
    // Domains trimmed in the config keep only their own slot lists.
    if (domains_set) {
        std::map<std::string, std::vector<std::string>> kept;
        for (const auto& d : cfg.domains) {
            auto it = cfg.required_slots.find(d);
            if (it != cfg.required_slots.end()) kept[d] = it->second;
        }
        cfg.required_slots = std::move(kept);
    }
    return cfg;
}

inline TedConfig ted_config_from_kv(const std::vector<std::pair<std::string, std::string>>& kvs) {
    TedConfig cfg;
    for (const auto& [key, value] : kvs) cfg.set_field(key, value);
    return cfg;
}

}  // namespace ted
