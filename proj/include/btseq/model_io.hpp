#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>

#include "btseq/checkpoint.hpp"
#include "btseq/model.hpp"
#include "btseq/tokens.hpp"

namespace btseq {

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline ordered_json model_header(const char* kind, const ModelConfig& cfg, std::uint64_t vocab_fp) {
    ordered_json h;
    h["kind"] = kind;
    h["vocab_size"] = cfg.vocab_size;
    h["embed_dim"] = cfg.embed_dim;
    h["hidden_dim"] = cfg.hidden_dim;
    h["num_layers"] = cfg.num_layers;
    h["max_len"] = cfg.max_len;
    h["vocab_fingerprint"] = hex64(vocab_fp);
    h["specials"] = ordered_json{{"pad", kPadId}, {"bos", kBosId}, {"eos", kEosId}, {"unk", kUnkId}};
    return h;
}

inline ModelConfig config_from_header(const ordered_json& h) {
    ModelConfig cfg;
    cfg.vocab_size = h.at("vocab_size");
    cfg.embed_dim = h.at("embed_dim");
    cfg.hidden_dim = h.at("hidden_dim");
    cfg.num_layers = h.at("num_layers");
    cfg.max_len = h.at("max_len");
    return cfg;
}

inline std::uint64_t vocab_fp_from_header(const ordered_json& h) {
    return std::stoull(h.at("vocab_fingerprint").get<std::string>(), nullptr, 16);
}

inline void save_seq2seq(const std::string& path, Seq2SeqPair& model, std::uint64_t vocab_fp) {
    std::vector<const Parameter*> params;
    for (Parameter* p : model.all_params()) params.push_back(p);
    save_checkpoint(path, params, model_header("seq2seq_pair", model.config, vocab_fp));
}

struct LoadedSeq2Seq {
    Seq2SeqPair model;
    std::uint64_t vocab_fingerprint = 0;
};

inline LoadedSeq2Seq load_seq2seq(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.header.value("kind", "") != "seq2seq_pair")
        throw IoError("checkpoint: " + path + " is not a seq2seq_pair");
    Rng scratch(0);
    LoadedSeq2Seq out{Seq2SeqPair::create(config_from_header(ck.header), scratch),
                      vocab_fp_from_header(ck.header)};
    load_into(ck, out.model.all_params());
    return out;
}

inline void save_lm(const std::string& path, LanguageModel& lm, std::uint64_t vocab_fp) {
    std::vector<const Parameter*> params;
    for (Parameter* p : lm.params()) params.push_back(p);
    save_checkpoint(path, params, model_header("language_model", lm.config, vocab_fp));
}

inline LanguageModel load_lm(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.header.value("kind", "") != "language_model")
        throw IoError("checkpoint: " + path + " is not a language_model");
    Rng scratch(0);
    LanguageModel lm = LanguageModel::create(config_from_header(ck.header), scratch);
    load_into(ck, lm.params());
    return lm;
}

inline void save_discriminator(const std::string& path, Discriminator& disc, std::uint64_t vocab_fp) {
    std::vector<const Parameter*> params;
    for (Parameter* p : disc.params()) params.push_back(p);
    save_checkpoint(path, params, model_header("discriminator", disc.config, vocab_fp));
}

inline Discriminator load_discriminator(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.header.value("kind", "") != "discriminator")
        throw IoError("checkpoint: " + path + " is not a discriminator");
    Rng scratch(0);
    Discriminator d = Discriminator::create(config_from_header(ck.header), scratch);
    load_into(ck, d.params());
    return d;
}

}  // namespace btseq
