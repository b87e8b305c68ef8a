#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btseq/autodiff.hpp"
#include "btseq/lstm.hpp"
#include "btseq/rng.hpp"
#include "btseq/tokens.hpp"

namespace btseq {

struct ModelConfig {
    int vocab_size = 0;
    int embed_dim = 32;   // reference setup uses 300
    int hidden_dim = 64;  // reference setup uses 500
    int num_layers = 2;
    int max_len = 50;

    void validate() const {
        if (vocab_size <= kNumSpecialTokens) throw ConfigError("model: vocab_size too small");
        if (embed_dim < 1 || hidden_dim < 1 || num_layers < 1) throw ConfigError("model: dims must be >= 1");
        if (max_len < 2) throw ConfigError("model: max_len must be >= 2");
    }
};

enum class Direction { Forward, Backward };

inline const char* direction_name(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }
inline Direction flip(Direction d) { return d == Direction::Forward ? Direction::Backward : Direction::Forward; }

// Forward and backward seq2seq sharing one encoder (and its embedding
// table); the decoders are shape-identical but independent. There is no
// attention: the decoder starts from the final encoder state and sees
// the final encoder summary concatenated onto every input.
struct Seq2SeqPair {
    ModelConfig config;
    Parameter embedding;  // [V, E]
    LstmStack encoder;
    LstmStack decoder_f;
    LstmStack decoder_b;
    Parameter proj_f_w, proj_f_b;  // [H, V], [1, V]
    Parameter proj_b_w, proj_b_b;

    static Seq2SeqPair create(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        Seq2SeqPair m;
        m.config = cfg;
        m.embedding = Parameter("embedding", Tensor::uniform(cfg.vocab_size, cfg.embed_dim, -0.1, 0.1, rng));
        m.encoder = LstmStack::create("encoder", cfg.embed_dim, cfg.hidden_dim, cfg.num_layers, rng);
        m.decoder_f = LstmStack::create("decoder_f", cfg.embed_dim + cfg.hidden_dim, cfg.hidden_dim,
                                        cfg.num_layers, rng);
        m.decoder_b = LstmStack::create("decoder_b", cfg.embed_dim + cfg.hidden_dim, cfg.hidden_dim,
                                        cfg.num_layers, rng);
        m.proj_f_w = Parameter("proj_f.w", Tensor::uniform(cfg.hidden_dim, cfg.vocab_size, -0.1, 0.1, rng));
        m.proj_f_b = Parameter("proj_f.b", Tensor::zeros(1, cfg.vocab_size));
        m.proj_b_w = Parameter("proj_b.w", Tensor::uniform(cfg.hidden_dim, cfg.vocab_size, -0.1, 0.1, rng));
        m.proj_b_b = Parameter("proj_b.b", Tensor::zeros(1, cfg.vocab_size));
        return m;
    }

    std::vector<Parameter*> encoder_params() {
        std::vector<Parameter*> out{&embedding};
        for (Parameter* p : encoder.params()) out.push_back(p);
        return out;
    }

    std::vector<Parameter*> decoder_params(Direction dir) {
        LstmStack& dec = dir == Direction::Forward ? decoder_f : decoder_b;
        std::vector<Parameter*> out = dec.params();
        out.push_back(dir == Direction::Forward ? &proj_f_w : &proj_b_w);
        out.push_back(dir == Direction::Forward ? &proj_f_b : &proj_b_b);
        return out;
    }

    // encoder (shared) plus the direction's own decoder; the optimizer
    // group for single-direction training
    std::vector<Parameter*> direction_params(Direction dir) {
        std::vector<Parameter*> out = encoder_params();
        for (Parameter* p : decoder_params(dir)) out.push_back(p);
        return out;
    }

    std::vector<Parameter*> all_params() {
        std::vector<Parameter*> out = encoder_params();
        for (Parameter* p : decoder_params(Direction::Forward)) out.push_back(p);
        for (Parameter* p : decoder_params(Direction::Backward)) out.push_back(p);
        return out;
    }
};

// Unconditional next-token model over the same vocabulary (the fusion
// and multitask baselines train it on the monologue corpus).
struct LanguageModel {
    ModelConfig config;
    Parameter embedding;
    LstmStack lstm;
    Parameter proj_w, proj_b;

    static LanguageModel create(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        LanguageModel m;
        m.config = cfg;
        m.embedding = Parameter("lm.embedding", Tensor::uniform(cfg.vocab_size, cfg.embed_dim, -0.1, 0.1, rng));
        m.lstm = LstmStack::create("lm.lstm", cfg.embed_dim, cfg.hidden_dim, cfg.num_layers, rng);
        m.proj_w = Parameter("lm.proj.w", Tensor::uniform(cfg.hidden_dim, cfg.vocab_size, -0.1, 0.1, rng));
        m.proj_b = Parameter("lm.proj.b", Tensor::zeros(1, cfg.vocab_size));
        return m;
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out{&embedding};
        for (Parameter* p : lstm.params()) out.push_back(p);
        out.push_back(&proj_w);
        out.push_back(&proj_b);
        return out;
    }
};

// Context/response relevance classifier: two separate LSTM encoders over
// a shared embedding, concat of the two final states into a small MLP
// head with a single logit. The final head layer starts at zero so an
// untrained discriminator scores exactly 0.5.
struct Discriminator {
    ModelConfig config;
    Parameter embedding;
    LstmStack ctx_encoder;
    LstmStack resp_encoder;
    Parameter head_w1, head_b1;  // [2H, H], [1, H]
    Parameter head_w2, head_b2;  // [H, 1], [1, 1]

    static Discriminator create(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        Discriminator d;
        d.config = cfg;
        d.embedding = Parameter("disc.embedding", Tensor::uniform(cfg.vocab_size, cfg.embed_dim, -0.1, 0.1, rng));
        d.ctx_encoder = LstmStack::create("disc.ctx", cfg.embed_dim, cfg.hidden_dim, cfg.num_layers, rng);
        d.resp_encoder = LstmStack::create("disc.resp", cfg.embed_dim, cfg.hidden_dim, cfg.num_layers, rng);
        d.head_w1 = Parameter("disc.head.w1", Tensor::uniform(2 * cfg.hidden_dim, cfg.hidden_dim, -0.1, 0.1, rng));
        d.head_b1 = Parameter("disc.head.b1", Tensor::zeros(1, cfg.hidden_dim));
        d.head_w2 = Parameter("disc.head.w2", Tensor::zeros(cfg.hidden_dim, 1));
        d.head_b2 = Parameter("disc.head.b2", Tensor::zeros(1, 1));
        return d;
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out{&embedding};
        for (Parameter* p : ctx_encoder.params()) out.push_back(p);
        for (Parameter* p : resp_encoder.params()) out.push_back(p);
        out.push_back(&head_w1);
        out.push_back(&head_b1);
        out.push_back(&head_w2);
        out.push_back(&head_b2);
        return out;
    }
};

// ---- shared tape plumbing -------------------------------------------

struct BoundDirection {
    Var emb;
    BoundLstm encoder;
    BoundLstm decoder;
    Var proj_w, proj_b;
};

inline BoundDirection bind_direction(Tape& tape, Seq2SeqPair& m, Direction dir) {
    BoundDirection b;
    b.emb = tape.param(m.embedding);
    b.encoder = bind_lstm(tape, m.encoder);
    b.decoder = bind_lstm(tape, dir == Direction::Forward ? m.decoder_f : m.decoder_b);
    b.proj_w = tape.param(dir == Direction::Forward ? m.proj_f_w : m.proj_b_w);
    b.proj_b = tape.param(dir == Direction::Forward ? m.proj_f_b : m.proj_b_b);
    return b;
}

inline void check_ids(const TokenSeq& seq, int vocab_size, const char* where) {
    for (int id : seq)
        if (id < 0 || id >= vocab_size) throw InputError(std::string(where) + ": token id out of vocabulary");
}

inline Tensor expand_mask_column(const TokenBatch& batch, int col, int width) {
    Tensor m(batch.rows, width);
    for (int r = 0; r < batch.rows; ++r) {
        const double v = batch.mask_at(r, col);
        for (int j = 0; j < width; ++j) m.at(r, j) = v;
    }
    return m;
}

inline Tensor invert_mask(const Tensor& m) {
    Tensor inv(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) inv.vec()[i] = 1.0 - m.vec()[i];
    return inv;
}

struct EncodedBatch {
    LstmStateVars state;
    Var summary;  // [B, H], final top-layer hidden
};

// Runs the encoder over a right-padded batch. State updates are frozen
// on PAD steps so each row ends at the state of its last real token.
inline EncodedBatch encode_batch(Tape& tape, const BoundLstm& enc, Var emb, const TokenBatch& src,
                                 int hidden_dim) {
    LstmStateVars state = lstm_zero_state(tape, enc, src.rows);
    Var summary = tape.input(Tensor::zeros(src.rows, hidden_dim));
    for (int t = 0; t < src.cols; ++t) {
        std::vector<int> ids(static_cast<std::size_t>(src.rows));
        bool any_real = false;
        for (int r = 0; r < src.rows; ++r) {
            ids[static_cast<std::size_t>(r)] = src.id_at(r, t);
            any_real = any_real || src.mask_at(r, t) > 0.0;
        }
        if (!any_real) break;
        Var x = tape.embedding(emb, ids);
        LstmStateVars next = lstm_step(tape, enc, state, x);
        Var m = tape.input(expand_mask_column(src, t, hidden_dim));
        Var minv = tape.input(invert_mask(tape.value(m)));
        LstmStateVars sel;
        for (std::size_t l = 0; l < next.hc.size(); ++l) {
            Var h = tape.add(tape.mul(next.hc[l].first, m), tape.mul(state.hc[l].first, minv));
            Var c = tape.add(tape.mul(next.hc[l].second, m), tape.mul(state.hc[l].second, minv));
            sel.hc.emplace_back(h, c);
        }
        state = sel;
        summary = tape.add(tape.mul(state.hc.back().first, m), tape.mul(summary, minv));
    }
    return {state, summary};
}

struct BatchNll {
    Var mean;            // scalar, total / token_count
    Var total;           // scalar sum of per-token cross entropies
    double token_count;  // number of real (non-PAD) target tokens incl. EOS
};

// Teacher-forced NLL over a batch of (src, tgt) pairs for one direction.
// Targets are wrapped [BOS t1..tn] -> [t1..tn EOS] internally; the mean
// is per non-PAD target token.
inline BatchNll batch_nll(Tape& tape, Seq2SeqPair& m, Direction dir, const std::vector<TokenSeq>& srcs,
                          const std::vector<TokenSeq>& tgts) {
    if (srcs.empty() || srcs.size() != tgts.size()) throw InputError("batch_nll: bad batch");
    const ModelConfig& cfg = m.config;
    for (const TokenSeq& s : srcs) {
        if (s.empty() || static_cast<int>(s.size()) > cfg.max_len) throw InputError("batch_nll: source length out of range");
        check_ids(s, cfg.vocab_size, "batch_nll");
    }
    std::vector<TokenSeq> tgt_in, tgt_out;
    tgt_in.reserve(tgts.size());
    tgt_out.reserve(tgts.size());
    for (const TokenSeq& t : tgts) {
        if (t.empty()) throw InputError("batch_nll: empty target");
        if (static_cast<int>(t.size()) > cfg.max_len) throw InputError("batch_nll: target length out of range");
        check_ids(t, cfg.vocab_size, "batch_nll");
        TokenSeq in{kBosId};
        in.insert(in.end(), t.begin(), t.end());
        TokenSeq out = t;
        out.push_back(kEosId);
        tgt_in.push_back(std::move(in));
        tgt_out.push_back(std::move(out));
    }
    const TokenBatch src_b = TokenBatch::from_rows(srcs);
    const TokenBatch in_b = TokenBatch::from_rows(tgt_in);
    const TokenBatch out_b = TokenBatch::from_rows(tgt_out);

    BoundDirection bd = bind_direction(tape, m, dir);
    EncodedBatch enc = encode_batch(tape, bd.encoder, bd.emb, src_b, cfg.hidden_dim);

    LstmStateVars state = enc.state;
    Var total = tape.input(Tensor::scalar(0.0));
    double token_count = 0.0;
    for (int t = 0; t < in_b.cols; ++t) {
        std::vector<int> in_ids(static_cast<std::size_t>(in_b.rows));
        std::vector<int> targets(static_cast<std::size_t>(out_b.rows));
        Tensor mask_col(out_b.rows, 1);
        bool any_real = false;
        for (int r = 0; r < in_b.rows; ++r) {
            in_ids[static_cast<std::size_t>(r)] = in_b.id_at(r, t);
            targets[static_cast<std::size_t>(r)] = out_b.id_at(r, t);
            mask_col.at(r, 0) = out_b.mask_at(r, t);
            any_real = any_real || out_b.mask_at(r, t) > 0.0;
            token_count += out_b.mask_at(r, t);
        }
        if (!any_real) break;
        Var x = tape.concat_cols(tape.embedding(bd.emb, in_ids), enc.summary);
        state = lstm_step(tape, bd.decoder, state, x);
        Var logits = tape.add_row(tape.matmul(state.top_h(), bd.proj_w), bd.proj_b);
        Var xe = tape.softmax_xent(logits, targets);
        total = tape.add(total, tape.sum(tape.mul(xe, tape.input(mask_col))));
    }
    BatchNll out;
    out.total = total;
    out.token_count = token_count;
    out.mean = tape.scale(total, 1.0 / token_count);
    return out;
}

// Teacher-forced NLL (mean per target token incl. EOS) for one pair.
inline Var sequence_nll(Tape& tape, Seq2SeqPair& m, Direction dir, const TokenSeq& src, const TokenSeq& tgt) {
    return batch_nll(tape, m, dir, {src}, {tgt}).mean;
}

inline double sequence_nll(Seq2SeqPair& m, Direction dir, const TokenSeq& src, const TokenSeq& tgt) {
    Tape tape;
    return tape.scalar_value(sequence_nll(tape, m, dir, src, tgt));
}

// Autoencoding objective: encode an utterance and reconstruct it with
// the forward decoder (the decoder the multitask objective shares).
inline Var autoencode_nll(Tape& tape, Seq2SeqPair& m, const TokenSeq& utterance) {
    return sequence_nll(tape, m, Direction::Forward, utterance, utterance);
}

inline double autoencode_nll(Seq2SeqPair& m, const TokenSeq& utterance) {
    Tape tape;
    return tape.scalar_value(autoencode_nll(tape, m, utterance));
}

// ---- language model --------------------------------------------------

struct BoundLm {
    Var emb;
    BoundLstm lstm;
    Var proj_w, proj_b;
};

inline BoundLm bind_lm(Tape& tape, LanguageModel& lm) {
    return {tape.param(lm.embedding), bind_lstm(tape, lm.lstm), tape.param(lm.proj_w), tape.param(lm.proj_b)};
}

inline BatchNll lm_batch_nll(Tape& tape, LanguageModel& lm, const std::vector<TokenSeq>& utts) {
    if (utts.empty()) throw InputError("lm_batch_nll: empty batch");
    const ModelConfig& cfg = lm.config;
    std::vector<TokenSeq> in_rows, out_rows;
    for (const TokenSeq& u : utts) {
        if (u.empty()) throw InputError("lm_batch_nll: empty utterance");
        if (static_cast<int>(u.size()) > cfg.max_len) throw InputError("lm_batch_nll: utterance too long");
        check_ids(u, cfg.vocab_size, "lm_batch_nll");
        TokenSeq in{kBosId};
        in.insert(in.end(), u.begin(), u.end());
        TokenSeq out = u;
        out.push_back(kEosId);
        in_rows.push_back(std::move(in));
        out_rows.push_back(std::move(out));
    }
    const TokenBatch in_b = TokenBatch::from_rows(in_rows);
    const TokenBatch out_b = TokenBatch::from_rows(out_rows);
    BoundLm bm = bind_lm(tape, lm);
    LstmStateVars state = lstm_zero_state(tape, bm.lstm, in_b.rows);
    Var total = tape.input(Tensor::scalar(0.0));
    double token_count = 0.0;
    for (int t = 0; t < in_b.cols; ++t) {
        std::vector<int> in_ids(static_cast<std::size_t>(in_b.rows));
        std::vector<int> targets(static_cast<std::size_t>(out_b.rows));
        Tensor mask_col(out_b.rows, 1);
        bool any_real = false;
        for (int r = 0; r < in_b.rows; ++r) {
            in_ids[static_cast<std::size_t>(r)] = in_b.id_at(r, t);
            targets[static_cast<std::size_t>(r)] = out_b.id_at(r, t);
            mask_col.at(r, 0) = out_b.mask_at(r, t);
            any_real = any_real || out_b.mask_at(r, t) > 0.0;
            token_count += out_b.mask_at(r, t);
        }
        if (!any_real) break;
        Var x = tape.embedding(bm.emb, in_ids);
        state = lstm_step(tape, bm.lstm, state, x);
        Var logits = tape.add_row(tape.matmul(state.top_h(), bm.proj_w), bm.proj_b);
        Var xe = tape.softmax_xent(logits, targets);
        total = tape.add(total, tape.sum(tape.mul(xe, tape.input(mask_col))));
    }
    BatchNll out;
    out.total = total;
    out.token_count = token_count;
    out.mean = tape.scale(total, 1.0 / token_count);
    return out;
}

inline Var lm_nll(Tape& tape, LanguageModel& lm, const TokenSeq& utterance) {
    return lm_batch_nll(tape, lm, {utterance}).mean;
}

inline double lm_nll(LanguageModel& lm, const TokenSeq& utterance) {
    Tape tape;
    return tape.scalar_value(lm_nll(tape, lm, utterance));
}

// ---- stepwise inference (no gradients) --------------------------------

struct DecoderState {
    std::vector<std::pair<Tensor, Tensor>> hc;  // per layer [1,H]
    Tensor summary;                             // [1,H]
};

// Deterministic encoder pass for a single source sequence.
inline DecoderState encode(Seq2SeqPair& m, const TokenSeq& src) {
    const ModelConfig& cfg = m.config;
    if (src.empty() || static_cast<int>(src.size()) > cfg.max_len)
        throw InputError("encode: source length out of range");
    check_ids(src, cfg.vocab_size, "encode");
    Tape tape;
    Var emb = tape.param(m.embedding);
    BoundLstm enc = bind_lstm(tape, m.encoder);
    LstmStateVars state = lstm_zero_state(tape, enc, 1);
    for (int id : src) {
        Var x = tape.embedding(emb, {id});
        state = lstm_step(tape, enc, state, x);
    }
    DecoderState out;
    for (auto& [h, c] : state.hc) out.hc.emplace_back(tape.value(h), tape.value(c));
    out.summary = tape.value(state.hc.back().first);
    return out;
}

inline std::vector<double> log_softmax_row(const Tensor& logits) {
    std::vector<double> out(static_cast<std::size_t>(logits.cols()));
    double mx = logits.at(0, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits.at(0, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) z += std::exp(logits.at(0, j) - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < logits.cols(); ++j) out[static_cast<std::size_t>(j)] = logits.at(0, j) - lse;
    return out;
}

// One decoder step for a single hypothesis row.
inline std::pair<Tensor, DecoderState> step_logits(Seq2SeqPair& m, Direction dir, const DecoderState& state,
                                                   int prev_token) {
    const ModelConfig& cfg = m.config;
    if (prev_token < 0 || prev_token >= cfg.vocab_size) throw InputError("step_logits: token out of vocabulary");
    Tape tape;
    Var emb = tape.param(m.embedding);
    BoundLstm dec = bind_lstm(tape, dir == Direction::Forward ? m.decoder_f : m.decoder_b);
    Var proj_w = tape.param(dir == Direction::Forward ? m.proj_f_w : m.proj_b_w);
    Var proj_b = tape.param(dir == Direction::Forward ? m.proj_f_b : m.proj_b_b);
    LstmStateVars sv;
    for (const auto& [h, c] : state.hc) sv.hc.emplace_back(tape.input(h), tape.input(c));
    Var x = tape.concat_cols(tape.embedding(emb, {prev_token}), tape.input(state.summary));
    LstmStateVars next = lstm_step(tape, dec, sv, x);
    Var logits = tape.add_row(tape.matmul(next.top_h(), proj_w), proj_b);
    DecoderState out;
    for (auto& [h, c] : next.hc) out.hc.emplace_back(tape.value(h), tape.value(c));
    out.summary = state.summary;
    return {tape.value(logits), out};
}

// Log-probability of emitting exactly `tokens` (terminal EOS included if
// present, nothing appended) after encoding `src`. Matches the score a
// decoding strategy accumulates for the same hypothesis.
inline double sequence_logprob(Seq2SeqPair& m, Direction dir, const TokenSeq& src, const TokenSeq& tokens) {
    if (tokens.empty()) throw InputError("sequence_logprob: empty token sequence");
    check_ids(tokens, m.config.vocab_size, "sequence_logprob");
    DecoderState state = encode(m, src);
    double lp = 0.0;
    int prev = kBosId;
    for (int tok : tokens) {
        auto [logits, next] = step_logits(m, dir, state, prev);
        lp += log_softmax_row(logits)[static_cast<std::size_t>(tok)];
        state = std::move(next);
        prev = tok;
    }
    return lp;
}

// ---- language model stepping ------------------------------------------

struct LmState {
    std::vector<std::pair<Tensor, Tensor>> hc;
};

inline LmState lm_initial_state(const LanguageModel& lm) {
    LmState s;
    for (int l = 0; l < lm.config.num_layers; ++l)
        s.hc.emplace_back(Tensor::zeros(1, lm.config.hidden_dim), Tensor::zeros(1, lm.config.hidden_dim));
    return s;
}

inline std::pair<Tensor, LmState> lm_step_logits(LanguageModel& lm, const LmState& state, int prev_token) {
    if (prev_token < 0 || prev_token >= lm.config.vocab_size)
        throw InputError("lm_step_logits: token out of vocabulary");
    Tape tape;
    BoundLm bm = bind_lm(tape, lm);
    LstmStateVars sv;
    for (const auto& [h, c] : state.hc) sv.hc.emplace_back(tape.input(h), tape.input(c));
    Var x = tape.embedding(bm.emb, {prev_token});
    LstmStateVars next = lstm_step(tape, bm.lstm, sv, x);
    Var logits = tape.add_row(tape.matmul(next.top_h(), bm.proj_w), bm.proj_b);
    LmState out;
    for (auto& [h, c] : next.hc) out.hc.emplace_back(tape.value(h), tape.value(c));
    return {tape.value(logits), out};
}

// ---- discriminator -----------------------------------------------------

// One logit per row for a batch of (context, response) pairs.
inline Var discriminator_logits(Tape& tape, Discriminator& d, const std::vector<TokenSeq>& ctxs,
                                const std::vector<TokenSeq>& resps) {
    if (ctxs.empty() || ctxs.size() != resps.size()) throw InputError("discriminator: bad batch");
    for (const TokenSeq& s : ctxs) {
        if (s.empty()) throw InputError("discriminator: empty context");
        check_ids(s, d.config.vocab_size, "discriminator");
    }
    for (const TokenSeq& s : resps) {
        if (s.empty()) throw InputError("discriminator: empty response");
        check_ids(s, d.config.vocab_size, "discriminator");
    }
    Var emb = tape.param(d.embedding);
    BoundLstm ctx_enc = bind_lstm(tape, d.ctx_encoder);
    BoundLstm resp_enc = bind_lstm(tape, d.resp_encoder);
    EncodedBatch ec = encode_batch(tape, ctx_enc, emb, TokenBatch::from_rows(ctxs), d.config.hidden_dim);
    EncodedBatch er = encode_batch(tape, resp_enc, emb, TokenBatch::from_rows(resps), d.config.hidden_dim);
    Var joint = tape.concat_cols(ec.summary, er.summary);
    Var hidden = tape.tanh_(tape.add_row(tape.matmul(joint, tape.param(d.head_w1)), tape.param(d.head_b1)));
    return tape.add_row(tape.matmul(hidden, tape.param(d.head_w2)), tape.param(d.head_b2));
}

// Probability that (context, response) is a genuine pair.
inline double discriminator_score(Discriminator& d, const TokenSeq& context, const TokenSeq& response) {
    Tape tape;
    Var logit = discriminator_logits(tape, d, {context}, {response});
    const double z = tape.value(logit).at(0, 0);
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// ---- fingerprinting ----------------------------------------------------

// Order-sensitive hash of raw parameter bytes; used to assert bitwise
// frozen-ness across training phases.
inline std::uint64_t params_fingerprint(const std::vector<Parameter*>& params) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const Parameter* p : params) mix(p->value.data(), p->value.size() * sizeof(double));
    return h;
}

}  // namespace btseq
