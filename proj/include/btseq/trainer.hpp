#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "btseq/corpus.hpp"
#include "btseq/decode.hpp"
#include "btseq/metrics.hpp"
#include "btseq/model.hpp"
#include "btseq/optim.hpp"
#include "btseq/rng.hpp"

namespace btseq {

struct TrainConfig {
    double lr = 0.15;  // reference value from the original setup; desk runs want ~0.01
    double clip_norm = 5.0;
    int batch_size = 16;  // reference setup uses 256
    double eps_conv = 1e-3;
    int patience = 3;
    int eval_every = 200;
    int max_steps = 20000;
    std::uint64_t rng_seed = 0;
    bool joint = true;  // init_train optimizes both directions; false trains forward only

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
        if (clip_norm <= 0.0) throw ConfigError("train: clip_norm must be > 0");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (eps_conv <= 0.0) throw ConfigError("train: eps_conv must be > 0");
        if (patience < 1 || eval_every < 1) throw ConfigError("train: patience and eval_every must be >= 1");
        if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
    }

    AdamConfig adam() const {
        AdamConfig a;
        a.lr = lr;
        return a;
    }
};

struct BtConfig {
    int num_iterations = 4;
    int pseudo_beam_size = 5;
    int max_steps_per_phase = 2000;
    int mono_valid_count = 32;  // held-out tail of the monologue corpus
    TrainConfig train;

    void validate() const {
        train.validate();
        if (num_iterations < 0) throw ConfigError("bt: num_iterations must be >= 0");
        if (pseudo_beam_size < 1) throw ConfigError("bt: pseudo_beam_size must be >= 1");
        if (max_steps_per_phase < 0) throw ConfigError("bt: max_steps_per_phase must be >= 0");
        if (mono_valid_count < 1) throw ConfigError("bt: mono_valid_count must be >= 1");
    }
};

// A synthetic training example: the target is a verbatim member of a
// real corpus, the source was decoded by a frozen model.
struct PseudoPair {
    enum class Origin { BackwardPhase, ForwardPhase };
    TokenSeq source;
    TokenSeq target;
    Origin origin = Origin::BackwardPhase;
};

// Validation perplexities per iteration; entry 0 is measured right after
// initialization.
struct IterationTrace {
    std::vector<double> fwd_ppl;
    std::vector<double> bwd_ppl;

    std::size_t iterations_completed() const { return fwd_ppl.empty() ? 0 : fwd_ppl.size() - 1; }
};

inline std::string iteration_trace_csv(const IterationTrace& t) {
    std::string s = "iteration,fwd_ppl,bwd_ppl\n";
    for (std::size_t i = 0; i < t.fwd_ppl.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g\n", i, t.fwd_ppl[i], t.bwd_ppl[i]);
        s += buf;
    }
    return s;
}

struct TrainResult {
    int steps = 0;
    int evals = 0;
    double best_valid = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

// ---- internals ------------------------------------------------------------

namespace detail {

// Patience-based stop on held-out loss: stop after `patience`
// evaluations without a relative improvement of at least eps_rel.
class EarlyStopper {
  public:
    EarlyStopper(double eps_rel, int patience) : eps_rel_(eps_rel), patience_(patience) {}

    bool should_stop(double value) {
        if (!std::isfinite(best_) || (best_ - value) / std::abs(best_) > eps_rel_) {
            best_ = value;
            bad_ = 0;
            return false;
        }
        return ++bad_ >= patience_;
    }

    double best() const { return best_; }

  private:
    double eps_rel_;
    int patience_;
    double best_ = std::numeric_limits<double>::quiet_NaN();
    int bad_ = 0;
};

// Deterministic epoch shuffling over item indices.
class BatchSchedule {
  public:
    BatchSchedule(std::size_t n, Rng rng) : rng_(std::move(rng)), order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        rng_.shuffle(order_);
    }

    std::vector<std::size_t> next(int batch_size) {
        std::vector<std::size_t> out;
        for (int k = 0; k < batch_size; ++k) {
            if (pos_ == order_.size()) {
                rng_.shuffle(order_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

  private:
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

inline std::vector<PairedExample> gather(const std::vector<PairedExample>& items,
                                         const std::vector<std::size_t>& idx) {
    std::vector<PairedExample> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

inline double eval_pairs_nll(Seq2SeqPair& model, Direction dir, const std::vector<PairedExample>& pairs,
                             int batch_size) {
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<TokenSeq> srcs, tgts;
        for (std::size_t i = start; i < end; ++i) {
            srcs.push_back(pairs[i].source);
            tgts.push_back(pairs[i].target);
        }
        Tape tape;
        BatchNll nll = batch_nll(tape, model, dir, srcs, tgts);
        total += tape.scalar_value(nll.total);
        tokens += nll.token_count;
    }
    return total / tokens;
}

inline double eval_joint_nll(Seq2SeqPair& model, const std::vector<PairedExample>& pairs, bool joint,
                             int batch_size) {
    double nll = eval_pairs_nll(model, Direction::Forward, pairs, batch_size);
    if (joint) {
        std::vector<PairedExample> flipped;
        flipped.reserve(pairs.size());
        for (const PairedExample& p : pairs) flipped.push_back({p.target, p.source});
        nll += eval_pairs_nll(model, Direction::Backward, flipped, batch_size);
    }
    return nll;
}

}  // namespace detail

inline std::vector<PairedExample> pseudo_to_examples(const std::vector<PseudoPair>& pseudo) {
    std::vector<PairedExample> out;
    out.reserve(pseudo.size());
    for (const PseudoPair& p : pseudo) out.push_back({p.source, p.target});
    return out;
}

// Beam-decodes a synthetic counterpart for every real sequence under a
// frozen model. Targets are kept verbatim; decodes that come back empty
// (immediate EOS) are dropped.
inline std::vector<PseudoPair> make_pseudo_pairs(Seq2SeqPair& frozen_model, Direction decode_dir,
                                                 const std::vector<TokenSeq>& reals, int beam_size,
                                                 PseudoPair::Origin origin) {
    DecodeConfig dc;
    dc.beam_size = beam_size;
    dc.num_groups = 1;
    dc.max_len = frozen_model.config.max_len;
    std::vector<PseudoPair> out;
    for (const TokenSeq& real : reals) {
        auto hyps = beam_search(frozen_model, decode_dir, real, dc);
        if (hyps.empty()) continue;
        TokenSeq src = hyps.front().surface();
        if (src.empty()) continue;
        out.push_back({std::move(src), real, origin});
    }
    return out;
}

// Initialization stage: joint teacher-forced training of both directions
// on the paired corpus until the held-out joint loss stops improving.
inline TrainResult init_train(Seq2SeqPair& model, const PairedCorpus& train, const PairedCorpus& valid,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (train.items.empty()) throw InputError("init_train: empty training corpus");
    if (valid.items.empty()) throw InputError("init_train: empty validation corpus");

    std::vector<Parameter*> group =
        cfg.joint ? model.all_params() : model.direction_params(Direction::Forward);
    reset_optimizer_state(group);
    zero_grads(group);
    detail::BatchSchedule schedule(train.items.size(), Rng::substream(cfg.rng_seed, "init.shuffle"));
    detail::EarlyStopper stopper(cfg.eps_conv, cfg.patience);

    TrainResult res;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        const std::vector<PairedExample> batch = detail::gather(train.items, schedule.next(cfg.batch_size));
        std::vector<TokenSeq> srcs, tgts;
        for (const PairedExample& p : batch) {
            srcs.push_back(p.source);
            tgts.push_back(p.target);
        }
        Tape tape;
        Var loss = batch_nll(tape, model, Direction::Forward, srcs, tgts).mean;
        if (cfg.joint) loss = tape.add(loss, batch_nll(tape, model, Direction::Backward, tgts, srcs).mean);
        tape.backward(loss);
        clip_global_norm(group, cfg.clip_norm);
        adam_step(group, cfg.adam());
        res.steps = step;

        if (step % cfg.eval_every == 0) {
            const double v = detail::eval_joint_nll(model, valid.items, cfg.joint, cfg.batch_size);
            ++res.evals;
            if (stopper.should_stop(v)) {
                res.converged = true;
                break;
            }
        }
    }
    res.best_valid = stopper.best();
    return res;
}

namespace detail {

// Shared phase loop: train one direction on pseudo pairs with early
// stopping on a held-out pseudo set.
inline TrainResult train_direction_on(Seq2SeqPair& model, Direction dir,
                                      const std::vector<PairedExample>& train,
                                      const std::vector<PairedExample>& valid, const TrainConfig& cfg,
                                      int max_steps, const std::string& stream_tag) {
    std::vector<Parameter*> group = model.direction_params(dir);
    reset_optimizer_state(group);
    zero_grads(group);
    BatchSchedule schedule(train.size(), Rng::substream(cfg.rng_seed, stream_tag));
    EarlyStopper stopper(cfg.eps_conv, cfg.patience);

    TrainResult res;
    for (int step = 1; step <= max_steps; ++step) {
        const std::vector<PairedExample> batch = gather(train, schedule.next(cfg.batch_size));
        std::vector<TokenSeq> srcs, tgts;
        for (const PairedExample& p : batch) {
            srcs.push_back(p.source);
            tgts.push_back(p.target);
        }
        Tape tape;
        Var loss = batch_nll(tape, model, dir, srcs, tgts).mean;
        tape.backward(loss);
        clip_global_norm(group, cfg.clip_norm);
        adam_step(group, cfg.adam());
        res.steps = step;

        if (!valid.empty() && step % cfg.eval_every == 0) {
            const double v = eval_pairs_nll(model, dir, valid, cfg.batch_size);
            ++res.evals;
            if (stopper.should_stop(v)) {
                res.converged = true;
                break;
            }
        }
    }
    res.best_valid = stopper.best();
    return res;
}

}  // namespace detail

// Backward phase: pseudo contexts are decoded for monologue utterances
// by a frozen snapshot of the backward model, then the forward model
// (and the shared encoder) trains on (b(T), T). The live backward
// decoder must come out bitwise unchanged.
inline TrainResult backward_phase(Seq2SeqPair& model, const std::vector<TokenSeq>& mono_train,
                                  const std::vector<TokenSeq>& mono_valid, const BtConfig& cfg,
                                  int iteration = 0) {
    cfg.validate();
    if (mono_train.empty()) throw InputError("backward_phase: empty monologue corpus");
    const std::uint64_t frozen_before = params_fingerprint(model.decoder_params(Direction::Backward));

    Seq2SeqPair snapshot = model;
    const std::vector<PseudoPair> train_pp = make_pseudo_pairs(
        snapshot, Direction::Backward, mono_train, cfg.pseudo_beam_size, PseudoPair::Origin::BackwardPhase);
    const std::vector<PseudoPair> valid_pp = make_pseudo_pairs(
        snapshot, Direction::Backward, mono_valid, cfg.pseudo_beam_size, PseudoPair::Origin::BackwardPhase);
    if (train_pp.empty()) throw InputError("backward_phase: no usable pseudo pairs");

    TrainResult res = detail::train_direction_on(
        model, Direction::Forward, pseudo_to_examples(train_pp), pseudo_to_examples(valid_pp), cfg.train,
        cfg.max_steps_per_phase, "bt.backward.shuffle." + std::to_string(iteration));

    if (params_fingerprint(model.decoder_params(Direction::Backward)) != frozen_before)
        throw std::logic_error("backward_phase: frozen backward decoder changed");
    return res;
}

// Forward phase: mirror image. The gold responses are dropped; the
// backward model trains on (f(X), X) decoded by a frozen forward
// snapshot, and the live forward decoder must stay bitwise unchanged.
inline TrainResult forward_phase(Seq2SeqPair& model, const PairedCorpus& paired_train,
                                 const std::vector<TokenSeq>& ctx_valid, const BtConfig& cfg,
                                 int iteration = 0) {
    cfg.validate();
    if (paired_train.items.empty()) throw InputError("forward_phase: empty paired corpus");
    const std::uint64_t frozen_before = params_fingerprint(model.decoder_params(Direction::Forward));

    std::vector<TokenSeq> contexts;
    contexts.reserve(paired_train.items.size());
    for (const PairedExample& p : paired_train.items) contexts.push_back(p.source);

    Seq2SeqPair snapshot = model;
    const std::vector<PseudoPair> train_pp = make_pseudo_pairs(
        snapshot, Direction::Forward, contexts, cfg.pseudo_beam_size, PseudoPair::Origin::ForwardPhase);
    const std::vector<PseudoPair> valid_pp = make_pseudo_pairs(
        snapshot, Direction::Forward, ctx_valid, cfg.pseudo_beam_size, PseudoPair::Origin::ForwardPhase);
    if (train_pp.empty()) throw InputError("forward_phase: no usable pseudo pairs");

    TrainResult res = detail::train_direction_on(
        model, Direction::Backward, pseudo_to_examples(train_pp), pseudo_to_examples(valid_pp), cfg.train,
        cfg.max_steps_per_phase, "bt.forward.shuffle." + std::to_string(iteration));

    if (params_fingerprint(model.decoder_params(Direction::Forward)) != frozen_before)
        throw std::logic_error("forward_phase: frozen forward decoder changed");
    return res;
}

// Full iterative back-translation over an initialized pair. After each
// iteration the trace records the perplexity of each direction on fresh
// pseudo pairs decoded by its current counterpart; the loop stops early
// after two consecutive forward-perplexity increases.
inline IterationTrace run_bt(Seq2SeqPair& model, const PairedCorpus& paired_train,
                             const PairedCorpus& paired_valid, const MonoCorpus& mono, const BtConfig& cfg,
                             const std::function<void(int, Seq2SeqPair&, const IterationTrace&)>&
                                 on_iteration = {}) {
    cfg.validate();
    if (paired_train.items.empty() || paired_valid.items.empty())
        throw InputError("run_bt: empty paired corpus");
    if (mono.items.empty()) throw InputError("run_bt: empty monologue corpus");

    const int valid_n = std::min<int>(cfg.mono_valid_count,
                                      std::max<int>(1, static_cast<int>(mono.items.size()) / 2));
    std::vector<TokenSeq> mono_train(mono.items.begin(), mono.items.end() - valid_n);
    std::vector<TokenSeq> mono_valid(mono.items.end() - valid_n, mono.items.end());
    if (mono_train.empty()) mono_train = mono_valid;  // degenerate single-item corpus

    std::vector<TokenSeq> ctx_valid;
    for (const PairedExample& p : paired_valid.items) ctx_valid.push_back(p.source);

    IterationTrace trace;
    auto measure = [&]() {
        const auto fwd_pp = make_pseudo_pairs(model, Direction::Backward, mono_valid,
                                              cfg.pseudo_beam_size, PseudoPair::Origin::BackwardPhase);
        const auto bwd_pp = make_pseudo_pairs(model, Direction::Forward, ctx_valid, cfg.pseudo_beam_size,
                                              PseudoPair::Origin::ForwardPhase);
        if (fwd_pp.empty() || bwd_pp.empty())
            throw NumericError("run_bt: validation pseudo pairs all decoded empty");
        trace.fwd_ppl.push_back(perplexity(model, Direction::Forward, pseudo_to_examples(fwd_pp),
                                           cfg.train.batch_size));
        trace.bwd_ppl.push_back(perplexity(model, Direction::Backward, pseudo_to_examples(bwd_pp),
                                           cfg.train.batch_size));
    };
    measure();  // entry 0: post-initialization anchor

    int rising = 0;
    for (int iter = 1; iter <= cfg.num_iterations; ++iter) {
        backward_phase(model, mono_train, mono_valid, cfg, iter);
        forward_phase(model, paired_train, ctx_valid, cfg, iter);
        measure();
        if (on_iteration) on_iteration(iter, model, trace);
        const std::size_t k = trace.fwd_ppl.size() - 1;
        rising = trace.fwd_ppl[k] > trace.fwd_ppl[k - 1] ? rising + 1 : 0;
        if (rising >= 2) break;
    }
    return trace;
}

// Multi-task baseline: seq2seq batches from the paired corpus and
// autoencoder batches from the monologue corpus share the forward
// decoder; mixing_ratio is the expected fraction of autoencoder batches.
inline TrainResult multitask_train(Seq2SeqPair& model, const PairedCorpus& train, const PairedCorpus& valid,
                                   const MonoCorpus& mono, double mixing_ratio, const TrainConfig& cfg) {
    cfg.validate();
    if (!(mixing_ratio > 0.0 && mixing_ratio < 1.0))
        throw ConfigError("multitask: mixing_ratio must be in (0,1)");
    if (train.items.empty() || valid.items.empty()) throw InputError("multitask: empty paired corpus");
    if (mono.items.empty()) throw InputError("multitask: empty monologue corpus");

    std::vector<Parameter*> group = model.direction_params(Direction::Forward);
    reset_optimizer_state(group);
    zero_grads(group);
    detail::BatchSchedule pair_sched(train.items.size(), Rng::substream(cfg.rng_seed, "multitask.pairs"));
    detail::BatchSchedule mono_sched(mono.items.size(), Rng::substream(cfg.rng_seed, "multitask.mono"));
    Rng mix = Rng::substream(cfg.rng_seed, "multitask.mix");
    detail::EarlyStopper stopper(cfg.eps_conv, cfg.patience);

    TrainResult res;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        Tape tape;
        Var loss;
        if (mix.uniform() < mixing_ratio) {
            std::vector<TokenSeq> utts;
            for (std::size_t i : mono_sched.next(cfg.batch_size)) utts.push_back(mono.items[i]);
            loss = batch_nll(tape, model, Direction::Forward, utts, utts).mean;
        } else {
            std::vector<TokenSeq> srcs, tgts;
            for (std::size_t i : pair_sched.next(cfg.batch_size)) {
                srcs.push_back(train.items[i].source);
                tgts.push_back(train.items[i].target);
            }
            loss = batch_nll(tape, model, Direction::Forward, srcs, tgts).mean;
        }
        tape.backward(loss);
        clip_global_norm(group, cfg.clip_norm);
        adam_step(group, cfg.adam());
        res.steps = step;

        if (step % cfg.eval_every == 0) {
            const double v = detail::eval_pairs_nll(model, Direction::Forward, valid.items, cfg.batch_size);
            ++res.evals;
            if (stopper.should_stop(v)) {
                res.converged = true;
                break;
            }
        }
    }
    res.best_valid = stopper.best();
    return res;
}

// Binary relevance training: each gold pair is matched by one uniformly
// mismatched response. The logit feeds a two-class cross entropy, which
// is exactly logistic loss on sigmoid(logit).
inline TrainResult train_discriminator(Discriminator& disc, const PairedCorpus& train,
                                       const PairedCorpus& valid, const TrainConfig& cfg) {
    cfg.validate();
    if (train.items.size() < 2 || valid.items.size() < 2)
        throw InputError("train_discriminator: need at least two pairs per split");

    std::vector<Parameter*> group = disc.params();
    reset_optimizer_state(group);
    zero_grads(group);
    detail::BatchSchedule schedule(train.items.size(), Rng::substream(cfg.rng_seed, "disc.shuffle"));
    Rng neg_rng = Rng::substream(cfg.rng_seed, "disc.negatives");
    detail::EarlyStopper stopper(cfg.eps_conv, cfg.patience);

    auto mismatched = [](const std::vector<PairedExample>& items, std::size_t i, Rng& rng) {
        std::size_t j = i;
        while (j == i) j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items.size())));
        return items[j].target;
    };

    auto batch_loss = [&](const std::vector<PairedExample>& items, const std::vector<std::size_t>& idx,
                          Rng& rng, bool train_pass) {
        std::vector<TokenSeq> ctxs, resps;
        std::vector<int> labels;
        for (std::size_t i : idx) {
            ctxs.push_back(items[i].source);
            resps.push_back(items[i].target);
            labels.push_back(1);
        }
        for (std::size_t i : idx) {
            ctxs.push_back(items[i].source);
            resps.push_back(mismatched(items, i, rng));
            labels.push_back(0);
        }
        Tape tape;
        Var logit = discriminator_logits(tape, disc, ctxs, resps);
        Var two_class = tape.concat_cols(tape.input(Tensor::zeros(static_cast<int>(labels.size()), 1)), logit);
        Var mean = tape.scale(tape.sum(tape.softmax_xent(two_class, labels)), 1.0 / labels.size());
        if (train_pass) {
            tape.backward(mean);
            return 0.0;
        }
        return tape.scalar_value(mean);
    };

    TrainResult res;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        batch_loss(train.items, schedule.next(cfg.batch_size), neg_rng, true);
        clip_global_norm(group, cfg.clip_norm);
        adam_step(group, cfg.adam());
        res.steps = step;

        if (step % cfg.eval_every == 0) {
            Rng valid_rng = Rng::substream(cfg.rng_seed, "disc.valid-negatives");
            std::vector<std::size_t> all(valid.items.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            const double v = batch_loss(valid.items, all, valid_rng, false);
            ++res.evals;
            if (stopper.should_stop(v)) {
                res.converged = true;
                break;
            }
        }
    }
    res.best_valid = stopper.best();
    return res;
}

}  // namespace btseq
