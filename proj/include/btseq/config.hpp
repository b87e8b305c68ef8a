#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

#include <json.hpp>

#include "btseq/corpus.hpp"
#include "btseq/decode.hpp"
#include "btseq/errors.hpp"
#include "btseq/model.hpp"
#include "btseq/model_io.hpp"
#include "btseq/rng.hpp"
#include "btseq/trainer.hpp"

namespace btseq {

struct CorpusConfig {
    int min_tokens = 10;
    int max_tokens = 30;
    long min_count = 5;
    std::optional<long> min_likes;
};

// Everything a run needs, serializable as one JSON document. Unknown
// keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
    std::uint64_t seed = 42;
    ModelConfig model;      // vocab_size 0 means "derive from the vocab file"
    TrainConfig train;
    int bt_iterations = 4;
    int bt_pseudo_beam = 5;
    int bt_max_steps_per_phase = 2000;
    int bt_mono_valid = 32;
    DecodeConfig decode;
    CorpusConfig corpus;
    double multitask_mixing = 0.3;
    SynthSpec synth;

    BtConfig bt() const {
        BtConfig b;
        b.num_iterations = bt_iterations;
        b.pseudo_beam_size = bt_pseudo_beam;
        b.max_steps_per_phase = bt_max_steps_per_phase;
        b.mono_valid_count = bt_mono_valid;
        b.train = train;
        return b;
    }
};

namespace detail {

inline void check_keys(const nlohmann::ordered_json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read_if(const nlohmann::ordered_json& obj, const char* key, T& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
    RunConfig cfg;
    detail::check_keys(j, {"seed", "model", "train", "bt", "decode", "corpus", "multitask", "synth"},
                       "top level");
    detail::read_if(j, "seed", cfg.seed);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::check_keys(m, {"vocab_size", "embed_dim", "hidden_dim", "num_layers", "max_len"}, "model");
        detail::read_if(m, "vocab_size", cfg.model.vocab_size);
        detail::read_if(m, "embed_dim", cfg.model.embed_dim);
        detail::read_if(m, "hidden_dim", cfg.model.hidden_dim);
        detail::read_if(m, "num_layers", cfg.model.num_layers);
        detail::read_if(m, "max_len", cfg.model.max_len);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::check_keys(t, {"lr", "clip_norm", "batch_size", "eps_conv", "patience", "eval_every",
                               "max_steps", "joint"},
                           "train");
        detail::read_if(t, "lr", cfg.train.lr);
        detail::read_if(t, "clip_norm", cfg.train.clip_norm);
        detail::read_if(t, "batch_size", cfg.train.batch_size);
        detail::read_if(t, "eps_conv", cfg.train.eps_conv);
        detail::read_if(t, "patience", cfg.train.patience);
        detail::read_if(t, "eval_every", cfg.train.eval_every);
        detail::read_if(t, "max_steps", cfg.train.max_steps);
        detail::read_if(t, "joint", cfg.train.joint);
    }
    if (j.contains("bt")) {
        const auto& b = j.at("bt");
        detail::check_keys(b, {"iterations", "pseudo_beam", "max_steps_per_phase", "mono_valid"}, "bt");
        detail::read_if(b, "iterations", cfg.bt_iterations);
        detail::read_if(b, "pseudo_beam", cfg.bt_pseudo_beam);
        detail::read_if(b, "max_steps_per_phase", cfg.bt_max_steps_per_phase);
        detail::read_if(b, "mono_valid", cfg.bt_mono_valid);
    }
    if (j.contains("decode")) {
        const auto& d = j.at("decode");
        detail::check_keys(d, {"strategy", "beam", "max_len", "nucleus_p", "groups", "diversity", "alpha",
                               "mmi_lambda", "candidates"},
                           "decode");
        if (d.contains("strategy")) cfg.decode.strategy = parse_strategy(d.at("strategy").get<std::string>());
        detail::read_if(d, "beam", cfg.decode.beam_size);
        detail::read_if(d, "max_len", cfg.decode.max_len);
        detail::read_if(d, "nucleus_p", cfg.decode.nucleus_p);
        detail::read_if(d, "groups", cfg.decode.num_groups);
        detail::read_if(d, "diversity", cfg.decode.diversity_strength);
        detail::read_if(d, "alpha", cfg.decode.fusion_alpha);
        detail::read_if(d, "mmi_lambda", cfg.decode.mmi_lambda);
        detail::read_if(d, "candidates", cfg.decode.mmi_candidates);
    }
    if (j.contains("corpus")) {
        const auto& c = j.at("corpus");
        detail::check_keys(c, {"min_tokens", "max_tokens", "min_count", "min_likes"}, "corpus");
        detail::read_if(c, "min_tokens", cfg.corpus.min_tokens);
        detail::read_if(c, "max_tokens", cfg.corpus.max_tokens);
        detail::read_if(c, "min_count", cfg.corpus.min_count);
        if (c.contains("min_likes") && !c.at("min_likes").is_null())
            cfg.corpus.min_likes = c.at("min_likes").get<long>();
    }
    if (j.contains("multitask")) {
        const auto& m = j.at("multitask");
        detail::check_keys(m, {"mixing_ratio"}, "multitask");
        detail::read_if(m, "mixing_ratio", cfg.multitask_mixing);
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        detail::check_keys(s, {"pair_train", "pair_valid", "pair_test", "mono_count", "num_topics",
                               "generic_prob", "required_gap"},
                           "synth");
        detail::read_if(s, "pair_train", cfg.synth.pair_train);
        detail::read_if(s, "pair_valid", cfg.synth.pair_valid);
        detail::read_if(s, "pair_test", cfg.synth.pair_test);
        detail::read_if(s, "mono_count", cfg.synth.mono_count);
        detail::read_if(s, "num_topics", cfg.synth.num_topics);
        detail::read_if(s, "generic_prob", cfg.synth.generic_prob);
        detail::read_if(s, "required_gap", cfg.synth.required_gap);
    }
    return cfg;
}

inline nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["model"] = {{"vocab_size", cfg.model.vocab_size},
                  {"embed_dim", cfg.model.embed_dim},
                  {"hidden_dim", cfg.model.hidden_dim},
                  {"num_layers", cfg.model.num_layers},
                  {"max_len", cfg.model.max_len}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"clip_norm", cfg.train.clip_norm},
                  {"batch_size", cfg.train.batch_size},
                  {"eps_conv", cfg.train.eps_conv},
                  {"patience", cfg.train.patience},
                  {"eval_every", cfg.train.eval_every},
                  {"max_steps", cfg.train.max_steps},
                  {"joint", cfg.train.joint}};
    j["bt"] = {{"iterations", cfg.bt_iterations},
               {"pseudo_beam", cfg.bt_pseudo_beam},
               {"max_steps_per_phase", cfg.bt_max_steps_per_phase},
               {"mono_valid", cfg.bt_mono_valid}};
    j["decode"] = {{"strategy", strategy_name(cfg.decode.strategy)},
                   {"beam", cfg.decode.beam_size},
                   {"max_len", cfg.decode.max_len},
                   {"nucleus_p", cfg.decode.nucleus_p},
                   {"groups", cfg.decode.num_groups},
                   {"diversity", cfg.decode.diversity_strength},
                   {"alpha", cfg.decode.fusion_alpha},
                   {"mmi_lambda", cfg.decode.mmi_lambda},
                   {"candidates", cfg.decode.mmi_candidates}};
    j["corpus"] = {{"min_tokens", cfg.corpus.min_tokens},
                   {"max_tokens", cfg.corpus.max_tokens},
                   {"min_count", cfg.corpus.min_count},
                   {"min_likes", cfg.corpus.min_likes.has_value()
                                     ? nlohmann::ordered_json(*cfg.corpus.min_likes)
                                     : nlohmann::ordered_json(nullptr)}};
    j["multitask"] = {{"mixing_ratio", cfg.multitask_mixing}};
    j["synth"] = {{"pair_train", cfg.synth.pair_train},
                  {"pair_valid", cfg.synth.pair_valid},
                  {"pair_test", cfg.synth.pair_test},
                  {"mono_count", cfg.synth.mono_count},
                  {"num_topics", cfg.synth.num_topics},
                  {"generic_prob", cfg.synth.generic_prob},
                  {"required_gap", cfg.synth.required_gap}};
    return j;
}

inline std::string config_fingerprint(const RunConfig& cfg) {
    return hex64(fnv1a64(run_config_to_json(cfg).dump()));
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

inline void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("config: cannot open " + path + " for writing");
    out << run_config_to_json(cfg).dump(2) << "\n";
    if (!out) throw IoError("config: write failed for " + path);
}

}  // namespace btseq
