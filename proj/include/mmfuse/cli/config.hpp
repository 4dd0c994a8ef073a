#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/resample/resample.hpp"

namespace mmfuse {

// Flat TOML-style key-value run configuration: "section.key = value" lines,
// '#' comments, optional double quotes around strings. Unknown keys are
// rejected so typos fail loudly.
class RunConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "run.seed", "run.out_dir", "data.dir",
            "text.max_vocab", "text.lasso_lambda", "text.lasso_max_iter", "text.rfe_keep",
            "text.rfe_step_fraction", "text.pad_width", "text.stopword_file",
            "text.lemma_rule_file",
            "audio.frame_length", "audio.hop_length", "audio.gbdt_rounds", "audio.gbdt_depth",
            "audio.gbdt_learning_rate", "audio.gbdt_l2", "audio.gbdt_min_leaf",
            "video.gbdt_rounds", "video.gbdt_depth", "video.gbdt_learning_rate",
            "video.gbdt_l2", "video.gbdt_min_leaf", "video.out_of_fold", "video.interpolation",
            "resample.apply_label_map", "resample.label_map", "resample.train_fraction",
            "resample.val_fraction", "resample.test_fraction", "resample.oversample",
            "resample.target_counts",
            "model.project_video", "model.n_classes",
            "train.epochs", "train.batch_size", "train.learning_rate",
            "train.early_stop_patience", "train.plateau_patience", "train.plateau_factor",
            "train.min_lr",
            "synth.classes", "synth.per_class", "synth.separation", "synth.theme_words",
            "synth.filler_words", "synth.sample_rate", "synth.clip_seconds",
            "synth.noise_sigma", "synth.video_dim", "synth.missing_rate", "synth.seed",
        };
        return keys;
    }

    RunConfig() = default;

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        RunConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            if (!known_keys().count(key))
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": unknown config key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def = "") const {
        const auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
        }
    }

    std::size_t get_size(const std::string& key, std::size_t def) const {
        return static_cast<std::size_t>(get_u64(key, def));
    }

    bool get_bool(const std::string& key, bool def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error("config key '" + key + "': expected true/false");
    }

    // "0:0,1:1,2:1" style integer maps.
    std::map<int, long long> get_int_map(const std::string& key) const {
        std::map<int, long long> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("config key '" + key + "': expected k:v pairs");
            out[std::stoi(item.substr(0, colon))] = std::stoll(item.substr(colon + 1));
        }
        return out;
    }

    LabelMap label_map() const {
        if (!has("resample.label_map")) return default_label_map();
        LabelMap m;
        for (const auto& [k, v] : get_int_map("resample.label_map")) m[k] = static_cast<int>(v);
        return m;
    }

    TargetCounts target_counts() const {
        if (!has("resample.target_counts")) return default_target_counts();
        TargetCounts t;
        for (const auto& [k, v] : get_int_map("resample.target_counts"))
            t[k] = static_cast<std::size_t>(v);
        return t;
    }

    void set(const std::string& key, const std::string& value) {
        if (!known_keys().count(key))
            throw std::runtime_error("unknown config key '" + key + "'");
        values_[key] = value;
    }

    // Resolved snapshot for run provenance.
    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace mmfuse
