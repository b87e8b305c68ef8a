#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btseq/errors.hpp"
#include "btseq/model.hpp"
#include "btseq/rng.hpp"
#include "btseq/tokens.hpp"

namespace btseq {

enum class Strategy { Beam, DiverseBeam, Nucleus, Fused, Mmi };

inline Strategy parse_strategy(const std::string& s) {
    if (s == "beam") return Strategy::Beam;
    if (s == "diverse") return Strategy::DiverseBeam;
    if (s == "nucleus") return Strategy::Nucleus;
    if (s == "fused") return Strategy::Fused;
    if (s == "mmi") return Strategy::Mmi;
    throw ConfigError("decode: unknown strategy '" + s + "'");
}

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Beam: return "beam";
        case Strategy::DiverseBeam: return "diverse";
        case Strategy::Nucleus: return "nucleus";
        case Strategy::Fused: return "fused";
        case Strategy::Mmi: return "mmi";
    }
    return "?";
}

struct DecodeConfig {
    Strategy strategy = Strategy::Beam;
    int beam_size = 5;
    int max_len = 50;
    double nucleus_p = 0.9;
    int num_groups = 5;
    double diversity_strength = 0.3;
    double fusion_alpha = 0.5;
    double mmi_lambda = 0.5;
    int mmi_candidates = 200;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (beam_size < 1) throw ConfigError("decode: beam_size must be >= 1");
        if (max_len < 1) throw ConfigError("decode: max_len must be >= 1");
        if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) throw ConfigError("decode: nucleus_p must be in (0,1]");
        if (num_groups < 1 || num_groups > beam_size) throw ConfigError("decode: need 1 <= groups <= beam_size");
        if (fusion_alpha < 0.0 || fusion_alpha > 1.0) throw ConfigError("decode: fusion_alpha must be in [0,1]");
        if (mmi_lambda < 0.0) throw ConfigError("decode: mmi_lambda must be >= 0");
        if (diversity_strength < 0.0) throw ConfigError("decode: diversity_strength must be >= 0");
        if (mmi_candidates < 1) throw ConfigError("decode: mmi_candidates must be >= 1");
    }
};

// A partial or complete decode. `logprob` is the plain sum of the
// model's stepwise log-probabilities of `tokens` (diversity penalties
// and fusion weights never leak into it), so any hypothesis can be
// re-scored against the model it came from.
template <class State>
struct Hypothesis {
    TokenSeq tokens;
    double logprob = 0.0;
    State state;
    bool finished = false;

    // tokens without the terminal EOS; what a reader sees
    TokenSeq surface() const {
        TokenSeq s = tokens;
        if (!s.empty() && s.back() == kEosId) s.pop_back();
        return s;
    }
};

// Anything decodable one token at a time: bound to a source at
// construction, stepped with the previously emitted token.
template <class M>
concept StepDecodable = requires(const M& m, const typename M::State& s, int tok) {
    { m.initial_state() } -> std::convertible_to<typename M::State>;
    { m.step_log_probs(s, tok) } -> std::convertible_to<std::pair<std::vector<double>, typename M::State>>;
    { m.vocab_size() } -> std::convertible_to<int>;
};

// ---- concrete steppers -------------------------------------------------

class Seq2SeqStepper {
  public:
    using State = DecoderState;

    Seq2SeqStepper(Seq2SeqPair& model, Direction dir, const TokenSeq& src)
        : model_(&model), dir_(dir), init_(encode(model, src)) {}

    State initial_state() const { return init_; }

    std::pair<std::vector<double>, State> step_log_probs(const State& s, int prev) const {
        auto [logits, next] = step_logits(*model_, dir_, s, prev);
        return {log_softmax_row(logits), std::move(next)};
    }

    int vocab_size() const { return model_->config.vocab_size; }

  private:
    Seq2SeqPair* model_;
    Direction dir_;
    State init_;
};

class LmStepper {
  public:
    using State = LmState;

    explicit LmStepper(LanguageModel& lm) : lm_(&lm) {}

    State initial_state() const { return lm_initial_state(*lm_); }

    std::pair<std::vector<double>, State> step_log_probs(const State& s, int prev) const {
        auto [logits, next] = lm_step_logits(*lm_, s, prev);
        return {log_softmax_row(logits), std::move(next)};
    }

    int vocab_size() const { return lm_->config.vocab_size; }

  private:
    LanguageModel* lm_;
};

// Probability-space mixture of two steppers:
//   p(w) = alpha * p_a(w) + (1 - alpha) * p_b(w)
template <class A, class B>
    requires StepDecodable<A> && StepDecodable<B>
class FusedStepper {
  public:
    using State = std::pair<typename A::State, typename B::State>;

    FusedStepper(A a, B b, double alpha) : a_(std::move(a)), b_(std::move(b)), alpha_(alpha) {
        if (a_.vocab_size() != b_.vocab_size())
            throw ConfigError("fused decode: vocabulary sizes disagree");
    }

    State initial_state() const { return {a_.initial_state(), b_.initial_state()}; }

    std::pair<std::vector<double>, State> step_log_probs(const State& s, int prev) const {
        auto [la, na] = a_.step_log_probs(s.first, prev);
        auto [lb, nb] = b_.step_log_probs(s.second, prev);
        std::vector<double> out(la.size());
        for (std::size_t i = 0; i < la.size(); ++i) {
            const double p = alpha_ * std::exp(la[i]) + (1.0 - alpha_) * std::exp(lb[i]);
            out[i] = std::log(p);
        }
        return {std::move(out), State{std::move(na), std::move(nb)}};
    }

    int vocab_size() const { return a_.vocab_size(); }

  private:
    A a_;
    B b_;
    double alpha_;
};

// ---- beam machinery ------------------------------------------------------

namespace detail {

// One synchronized step of a beam set. `penalty(tok)` is subtracted from
// the selection score of new extensions only; kept scores stay raw.
// Newly chosen extension tokens are appended to *emitted when given.
template <class M, class Penalty>
    requires StepDecodable<M>
void beam_set_step(const M& model, std::vector<Hypothesis<typename M::State>>& hyps, int width,
                   int max_len, Penalty&& penalty, std::vector<int>* emitted, bool& done) {
    using Hyp = Hypothesis<typename M::State>;
    if (done) return;

    struct Cand {
        double sel;      // selection score (raw minus penalty)
        double raw;      // accumulated log-probability
        int origin;      // index into hyps
        int token;       // -1 for a carried finished hypothesis
    };
    std::vector<Cand> cands;
    std::vector<std::pair<std::vector<double>, typename M::State>> steps(hyps.size());
    const int V = model.vocab_size();
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const Hyp& h = hyps[i];
        if (h.finished) {
            cands.push_back({h.logprob, h.logprob, static_cast<int>(i), -1});
            continue;
        }
        const int prev = h.tokens.empty() ? kBosId : h.tokens.back();
        steps[i] = model.step_log_probs(h.state, prev);
        const std::vector<double>& lp = steps[i].first;
        for (int v = 0; v < V; ++v) {
            if (v == kPadId || v == kBosId) continue;
            const double raw = h.logprob + lp[static_cast<std::size_t>(v)];
            cands.push_back({raw - penalty(v), raw, static_cast<int>(i), v});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.sel != b.sel) return a.sel > b.sel;
        if (a.origin != b.origin) return a.origin < b.origin;
        return a.token < b.token;
    });
    const int keep = std::min<int>(width, static_cast<int>(cands.size()));
    std::vector<Hyp> next;
    next.reserve(static_cast<std::size_t>(keep));
    for (int k = 0; k < keep; ++k) {
        const Cand& c = cands[static_cast<std::size_t>(k)];
        if (c.token < 0) {
            next.push_back(hyps[static_cast<std::size_t>(c.origin)]);
            continue;
        }
        Hyp h;
        h.tokens = hyps[static_cast<std::size_t>(c.origin)].tokens;
        h.tokens.push_back(c.token);
        h.logprob = c.raw;
        h.state = steps[static_cast<std::size_t>(c.origin)].second;
        h.finished = c.token == kEosId || static_cast<int>(h.tokens.size()) >= max_len;
        if (emitted != nullptr) emitted->push_back(c.token);
        next.push_back(std::move(h));
    }
    hyps = std::move(next);

    bool any_open = false;
    double best_open = 0.0, worst_finished = 0.0;
    bool any_finished = false;
    for (const Hyp& h : hyps) {
        if (h.finished) {
            worst_finished = any_finished ? std::min(worst_finished, h.logprob) : h.logprob;
            any_finished = true;
        } else {
            best_open = any_open ? std::max(best_open, h.logprob) : h.logprob;
            any_open = true;
        }
    }
    // extensions only lower a score, so once no open hypothesis can pass
    // the worst kept finished one the search is settled
    if (!any_open || (any_finished && best_open <= worst_finished)) done = true;
}

template <class State>
void sort_and_prune_finished(std::vector<Hypothesis<State>>& hyps) {
    hyps.erase(std::remove_if(hyps.begin(), hyps.end(),
                              [](const Hypothesis<State>& h) { return !h.finished; }),
               hyps.end());
    std::stable_sort(hyps.begin(), hyps.end(), [](const auto& a, const auto& b) {
        return a.logprob > b.logprob;
    });
}

}  // namespace detail

// Breadth-limited best-first search; returns up to beam_size finished
// hypotheses, best first.
template <class M>
    requires StepDecodable<M>
std::vector<Hypothesis<typename M::State>> beam_search(const M& model, const DecodeConfig& cfg) {
    cfg.validate();
    using Hyp = Hypothesis<typename M::State>;
    std::vector<Hyp> hyps(1);
    hyps[0].state = model.initial_state();
    bool done = false;
    for (int t = 0; t < cfg.max_len && !done; ++t)
        detail::beam_set_step(model, hyps, cfg.beam_size, cfg.max_len, [](int) { return 0.0; }, nullptr, done);
    detail::sort_and_prune_finished(hyps);
    return hyps;
}

inline std::vector<Hypothesis<DecoderState>> beam_search(Seq2SeqPair& model, Direction dir,
                                                         const TokenSeq& src, const DecodeConfig& cfg) {
    return beam_search(Seq2SeqStepper(model, dir, src), cfg);
}

// Group-wise beam search with a Hamming diversity penalty: at each step,
// group g pays diversity_strength for every earlier group that already
// emitted the same token at this step. Group 0 is plain beam search over
// beam_size/num_groups beams. Results are group-major, best first within
// each group.
template <class M>
    requires StepDecodable<M>
std::vector<Hypothesis<typename M::State>> diverse_beam_search(const M& model, const DecodeConfig& cfg) {
    cfg.validate();
    if (cfg.beam_size % cfg.num_groups != 0)
        throw ConfigError("diverse beam: num_groups must divide beam_size");
    using Hyp = Hypothesis<typename M::State>;
    const int G = cfg.num_groups;
    const int group_width = cfg.beam_size / G;

    std::vector<std::vector<Hyp>> groups(static_cast<std::size_t>(G), std::vector<Hyp>(1));
    std::vector<char> done(static_cast<std::size_t>(G), 0);
    for (auto& g : groups) g[0].state = model.initial_state();

    std::vector<int> counts(static_cast<std::size_t>(model.vocab_size()), 0);
    for (int t = 0; t < cfg.max_len; ++t) {
        bool all_done = true;
        std::fill(counts.begin(), counts.end(), 0);
        for (int g = 0; g < G; ++g) {
            if (done[static_cast<std::size_t>(g)]) continue;
            all_done = false;
            std::vector<int> emitted;
            bool d = false;
            detail::beam_set_step(
                model, groups[static_cast<std::size_t>(g)], group_width, cfg.max_len,
                [&](int tok) { return cfg.diversity_strength * counts[static_cast<std::size_t>(tok)]; },
                &emitted, d);
            done[static_cast<std::size_t>(g)] = d ? 1 : 0;
            for (int tok : emitted) counts[static_cast<std::size_t>(tok)] += 1;
        }
        if (all_done) break;
    }
    std::vector<Hyp> out;
    for (auto& g : groups) {
        detail::sort_and_prune_finished(g);
        for (Hyp& h : g) out.push_back(std::move(h));
    }
    return out;
}

inline std::vector<Hypothesis<DecoderState>> diverse_beam_search(Seq2SeqPair& model, Direction dir,
                                                                 const TokenSeq& src,
                                                                 const DecodeConfig& cfg) {
    return diverse_beam_search(Seq2SeqStepper(model, dir, src), cfg);
}

// The renormalized top-p slice of a probability vector: tokens are taken
// in probability order (ties to the lower id) until their cumulative
// mass reaches p. Entries the caller zeroed never enter before mass p is
// reached.
struct NucleusSupport {
    std::vector<int> tokens;
    std::vector<double> probs;  // renormalized over the support
};

inline NucleusSupport nucleus_filter(const std::vector<double>& probs, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("nucleus_filter: p must be in (0,1]");
    std::vector<int> order(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double pa = probs[static_cast<std::size_t>(a)], pb = probs[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    NucleusSupport out;
    double cum = 0.0;
    for (int idx : order) {
        if (cum >= p) break;
        const double pi = probs[static_cast<std::size_t>(idx)];
        out.tokens.push_back(idx);
        out.probs.push_back(pi);
        cum += pi;
    }
    if (cum <= 0.0) throw NumericError("nucleus_filter: no probability mass");
    for (double& q : out.probs) q /= cum;
    return out;
}

// Ancestral top-p sampling of a single hypothesis. logprob accumulates
// the raw model log-probabilities of the sampled tokens.
template <class M>
    requires StepDecodable<M>
Hypothesis<typename M::State> nucleus_sample(const M& model, const DecodeConfig& cfg, Rng& rng) {
    cfg.validate();
    using Hyp = Hypothesis<typename M::State>;
    Hyp h;
    h.state = model.initial_state();
    const int V = model.vocab_size();
    while (!h.finished) {
        const int prev = h.tokens.empty() ? kBosId : h.tokens.back();
        auto [lp, next] = model.step_log_probs(h.state, prev);
        std::vector<double> probs(static_cast<std::size_t>(V), 0.0);
        for (int v = 0; v < V; ++v)
            if (v != kPadId && v != kBosId) probs[static_cast<std::size_t>(v)] = std::exp(lp[static_cast<std::size_t>(v)]);
        NucleusSupport sup = nucleus_filter(probs, cfg.nucleus_p);
        const int pick = sup.tokens[static_cast<std::size_t>(rng.categorical(sup.probs))];
        h.tokens.push_back(pick);
        h.logprob += lp[static_cast<std::size_t>(pick)];
        h.state = std::move(next);
        h.finished = pick == kEosId || static_cast<int>(h.tokens.size()) >= cfg.max_len;
    }
    return h;
}

inline Hypothesis<DecoderState> nucleus_sample(Seq2SeqPair& model, Direction dir, const TokenSeq& src,
                                               const DecodeConfig& cfg, Rng& rng) {
    return nucleus_sample(Seq2SeqStepper(model, dir, src), cfg, rng);
}

// Beam search over the weighted average of seq2seq and language-model
// distributions; returns the best hypothesis.
inline Hypothesis<FusedStepper<Seq2SeqStepper, LmStepper>::State> fused_decode(
    Seq2SeqPair& model, LanguageModel& lm, const TokenSeq& src, const DecodeConfig& cfg) {
    FusedStepper<Seq2SeqStepper, LmStepper> fused(Seq2SeqStepper(model, Direction::Forward, src),
                                                  LmStepper(lm), cfg.fusion_alpha);
    auto hyps = beam_search(fused, cfg);
    if (hyps.empty()) throw NumericError("fused_decode: no finished hypothesis");
    return hyps.front();
}

inline double mmi_score(double forward_logprob, double backward_logprob, double lambda) {
    return forward_logprob + lambda * backward_logprob;
}

// Sample-and-rerank with a backward model:
//   score(Y) = log P_f(Y|X) + mmi_lambda * log P_b(X|Y)
// Candidates are ancestral samples from the forward model (temperature 1),
// deduplicated before scoring; ties keep the earliest candidate.
inline Hypothesis<DecoderState> mmi_rerank(Seq2SeqPair& forward_model, Seq2SeqPair& backward_model,
                                           const TokenSeq& src, const DecodeConfig& cfg, Rng& rng) {
    cfg.validate();
    if (forward_model.config.vocab_size != backward_model.config.vocab_size)
        throw ConfigError("mmi_rerank: vocabulary sizes disagree");
    DecodeConfig sample_cfg = cfg;
    sample_cfg.nucleus_p = 1.0;
    Seq2SeqStepper stepper(forward_model, Direction::Forward, src);

    std::vector<Hypothesis<DecoderState>> cands;
    for (int i = 0; i < cfg.mmi_candidates; ++i) {
        Hypothesis<DecoderState> h = nucleus_sample(stepper, sample_cfg, rng);
        bool dup = false;
        for (const auto& c : cands)
            if (c.tokens == h.tokens) {
                dup = true;
                break;
            }
        if (!dup) cands.push_back(std::move(h));
    }

    int best = -1;
    double best_score = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const TokenSeq surface = cands[i].surface();
        if (surface.empty()) continue;  // backward model needs a non-empty source
        TokenSeq ctx_tokens = src;
        ctx_tokens.push_back(kEosId);
        const double bwd = sequence_logprob(backward_model, Direction::Backward, surface, ctx_tokens);
        const double score = mmi_score(cands[i].logprob, bwd, cfg.mmi_lambda);
        if (best < 0 || score > best_score) {
            best = static_cast<int>(i);
            best_score = score;
        }
    }
    if (best < 0) return cands.front();  // every candidate was empty; nothing to rank
    return cands[static_cast<std::size_t>(best)];
}

}  // namespace btseq
