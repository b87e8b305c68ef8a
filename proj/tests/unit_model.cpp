#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "btseq/decode.hpp"
#include "btseq/lstm.hpp"
#include "btseq/model.hpp"
#include "btseq/model_io.hpp"
#include "btseq/optim.hpp"

using namespace btseq;

namespace {

ModelConfig tiny_config(int vocab = 12) {
    ModelConfig cfg;
    cfg.vocab_size = vocab;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 16;
    cfg.num_layers = 2;
    cfg.max_len = 12;
    return cfg;
}

Seq2SeqPair tiny_pair(std::uint64_t seed = 1, int vocab = 12) {
    Rng rng(seed);
    return Seq2SeqPair::create(tiny_config(vocab), rng);
}

void zero_projection(Seq2SeqPair& m, Direction dir) {
    (dir == Direction::Forward ? m.proj_f_w : m.proj_b_w).value.fill(0.0);
    (dir == Direction::Forward ? m.proj_f_b : m.proj_b_b).value.fill(0.0);
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.vec()[i] != b.vec()[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("encode of a single token equals one lstm step from zero state") {
    Seq2SeqPair m = tiny_pair(3);
    DecoderState st = encode(m, {5});

    Tape tape;
    Var emb = tape.param(m.embedding);
    BoundLstm enc = bind_lstm(tape, m.encoder);
    LstmStateVars zero = lstm_zero_state(tape, enc, 1);
    LstmStateVars one = lstm_step(tape, enc, zero, tape.embedding(emb, {5}));
    for (std::size_t l = 0; l < one.hc.size(); ++l) {
        REQUIRE(tensors_equal(st.hc[l].first, tape.value(one.hc[l].first)));
        REQUIRE(tensors_equal(st.hc[l].second, tape.value(one.hc[l].second)));
    }
    REQUIRE(tensors_equal(st.summary, tape.value(one.hc.back().first)));
}

TEST_CASE("encode is deterministic and order sensitive") {
    Seq2SeqPair m = tiny_pair(4);
    const TokenSeq src{4, 7, 9};
    DecoderState a = encode(m, src);
    DecoderState b = encode(m, src);
    for (std::size_t l = 0; l < a.hc.size(); ++l) {
        REQUIRE(tensors_equal(a.hc[l].first, b.hc[l].first));
        REQUIRE(tensors_equal(a.hc[l].second, b.hc[l].second));
    }
    DecoderState c = encode(m, {9, 7, 4});
    bool any_diff = false;
    for (std::size_t l = 0; l < a.hc.size(); ++l)
        any_diff = any_diff || !tensors_equal(a.hc[l].first, c.hc[l].first);
    REQUIRE(any_diff);
}

TEST_CASE("encode rejects bad input") {
    Seq2SeqPair m = tiny_pair();
    REQUIRE_THROWS_AS(encode(m, {}), InputError);
    REQUIRE_THROWS_AS(encode(m, {99}), InputError);
    REQUIRE_THROWS_AS(encode(m, TokenSeq(static_cast<std::size_t>(m.config.max_len) + 1, 5)), InputError);
}

TEST_CASE("zeroed projection gives a uniform next-token distribution") {
    Seq2SeqPair m = tiny_pair(5);
    zero_projection(m, Direction::Forward);
    DecoderState st = encode(m, {4, 5});
    auto [logits, next] = step_logits(m, Direction::Forward, st, kBosId);
    for (double v : log_softmax_row(logits))
        REQUIRE(std::exp(v) == Catch::Approx(1.0 / m.config.vocab_size).margin(1e-12));
}

TEST_CASE("step distributions sum to one over random states") {
    Seq2SeqPair m = tiny_pair(6);
    Rng rng(99);
    DecoderState st = encode(m, {4, 6, 8});
    for (int trial = 0; trial < 100; ++trial) {
        const int tok = kNumSpecialTokens + rng.uniform_int(m.config.vocab_size - kNumSpecialTokens);
        auto [logits, next] = step_logits(m, Direction::Forward, st, tok);
        double sum = 0.0;
        for (double v : log_softmax_row(logits)) sum += std::exp(v);
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        st = next;
    }
}

TEST_CASE("uniform model nll is log vocab per token") {
    Seq2SeqPair m = tiny_pair(7);
    zero_projection(m, Direction::Forward);
    const double nll = sequence_nll(m, Direction::Forward, {4, 5, 6}, {7, 8});
    REQUIRE(nll == Catch::Approx(std::log(m.config.vocab_size)).margin(1e-12));
}

TEST_CASE("sequence nll decomposes into stepwise cross entropies") {
    Seq2SeqPair m = tiny_pair(8);
    const TokenSeq src{4, 9, 6};
    const TokenSeq tgt{5, 7, 11, 8};
    const double nll = sequence_nll(m, Direction::Forward, src, tgt);

    DecoderState st = encode(m, src);
    double manual = 0.0;
    int prev = kBosId;
    TokenSeq wrapped = tgt;
    wrapped.push_back(kEosId);
    for (int tok : wrapped) {
        auto [logits, next] = step_logits(m, Direction::Forward, st, prev);
        manual -= log_softmax_row(logits)[static_cast<std::size_t>(tok)];
        st = next;
        prev = tok;
    }
    manual /= static_cast<double>(wrapped.size());
    REQUIRE(nll == Catch::Approx(manual).margin(1e-10));
    REQUIRE(nll >= 0.0);
    REQUIRE_THROWS_AS(sequence_nll(m, Direction::Forward, src, {}), InputError);
}

TEST_CASE("sequence logprob matches nll for emitted tokens") {
    Seq2SeqPair m = tiny_pair(12);
    const TokenSeq src{5, 6};
    const TokenSeq tgt{7, 9};
    TokenSeq emitted = tgt;
    emitted.push_back(kEosId);
    const double lp = sequence_logprob(m, Direction::Forward, src, emitted);
    const double nll = sequence_nll(m, Direction::Forward, src, tgt);
    REQUIRE(lp == Catch::Approx(-nll * static_cast<double>(emitted.size())).margin(1e-9));
}

TEST_CASE("overfitting a single pair drives nll near zero") {
    Seq2SeqPair m = tiny_pair(10);
    const TokenSeq src{4, 5, 6, 7};
    const TokenSeq tgt{8, 9, 10, 11};
    AdamConfig adam;
    adam.lr = 0.01;
    std::vector<Parameter*> group = m.direction_params(Direction::Forward);
    for (int step = 0; step < 500; ++step) {
        Tape tape;
        tape.backward(sequence_nll(tape, m, Direction::Forward, src, tgt));
        clip_global_norm(group, 5.0);
        adam_step(group, adam);
    }
    REQUIRE(sequence_nll(m, Direction::Forward, src, tgt) < 0.05);

    // greedy rollout of the now nearly deterministic model is the target
    // and scores close to zero nll
    DecodeConfig dc;
    dc.beam_size = 1;
    dc.num_groups = 1;
    dc.max_len = m.config.max_len;
    auto hyps = beam_search(m, Direction::Forward, src, dc);
    REQUIRE(hyps.front().surface() == tgt);
    REQUIRE(hyps.front().logprob > -0.01 * static_cast<double>(hyps.front().tokens.size()));
}

TEST_CASE("autoencode equals sequence nll on the identity pair") {
    Seq2SeqPair m = tiny_pair(11);
    const TokenSeq u{4, 6, 8, 10};
    REQUIRE(autoencode_nll(m, u) == Catch::Approx(sequence_nll(m, Direction::Forward, u, u)).margin(1e-12));
    zero_projection(m, Direction::Forward);
    REQUIRE(autoencode_nll(m, u) == Catch::Approx(std::log(m.config.vocab_size)).margin(1e-12));
}

TEST_CASE("language model mirrors the seq2seq loss conventions") {
    Rng rng(13);
    LanguageModel lm = LanguageModel::create(tiny_config(9), rng);
    const TokenSeq u{4, 5, 6};

    SECTION("uniform when projection is zeroed") {
        lm.proj_w.value.fill(0.0);
        lm.proj_b.value.fill(0.0);
        REQUIRE(lm_nll(lm, u) == Catch::Approx(std::log(9.0)).margin(1e-12));
    }
    SECTION("decomposition into steps") {
        const double nll = lm_nll(lm, u);
        LmState st = lm_initial_state(lm);
        double manual = 0.0;
        int prev = kBosId;
        TokenSeq wrapped = u;
        wrapped.push_back(kEosId);
        for (int tok : wrapped) {
            auto [logits, next] = lm_step_logits(lm, st, prev);
            manual -= log_softmax_row(logits)[static_cast<std::size_t>(tok)];
            st = next;
            prev = tok;
        }
        REQUIRE(nll == Catch::Approx(manual / static_cast<double>(wrapped.size())).margin(1e-10));
    }
    SECTION("overfits one utterance") {
        AdamConfig adam;
        adam.lr = 0.01;
        for (int step = 0; step < 500; ++step) {
            Tape tape;
            tape.backward(lm_nll(tape, lm, u));
            clip_global_norm(lm.params(), 5.0);
            adam_step(lm.params(), adam);
        }
        REQUIRE(lm_nll(lm, u) < 0.05);
    }
}

TEST_CASE("shared encoder coupling leaves the other decoder bitwise untouched") {
    Seq2SeqPair m = tiny_pair(14);
    const std::uint64_t dec_f_before = params_fingerprint(m.decoder_params(Direction::Forward));
    const std::uint64_t dec_b_before = params_fingerprint(m.decoder_params(Direction::Backward));
    const std::uint64_t enc_before = params_fingerprint(m.encoder_params());

    AdamConfig adam;
    adam.lr = 0.01;
    std::vector<Parameter*> group = m.direction_params(Direction::Backward);
    Tape tape;
    tape.backward(sequence_nll(tape, m, Direction::Backward, {7, 8}, {4, 5}));
    clip_global_norm(group, 5.0);
    adam_step(group, adam);

    REQUIRE(params_fingerprint(m.decoder_params(Direction::Forward)) == dec_f_before);
    REQUIRE(params_fingerprint(m.decoder_params(Direction::Backward)) != dec_b_before);
    REQUIRE(params_fingerprint(m.encoder_params()) != enc_before);
}

TEST_CASE("discriminator with a zero head scores exactly one half") {
    Rng rng(15);
    Discriminator d = Discriminator::create(tiny_config(10), rng);
    REQUIRE(discriminator_score(d, {4, 5}, {6, 7}) == 0.5);
    REQUIRE_THROWS_AS(discriminator_score(d, {}, {6}), InputError);
}

TEST_CASE("discriminator probabilities are complementary and batch-stable") {
    Rng rng(16);
    Discriminator d = Discriminator::create(tiny_config(10), rng);
    for (Parameter* p : d.params())
        p->value = Tensor::uniform(p->value.rows(), p->value.cols(), -0.5, 0.5, rng);

    const TokenSeq ctx{4, 5, 6}, resp{7, 8};
    const double p1 = discriminator_score(d, ctx, resp);
    REQUIRE(p1 > 0.0);
    REQUIRE(p1 < 1.0);

    Tape tape;
    Var logit = discriminator_logits(tape, d, {ctx, ctx}, {resp, TokenSeq{9, 4, 5}});
    const double z = tape.value(logit).at(0, 0);
    const double sig = 1.0 / (1.0 + std::exp(-z));
    REQUIRE(p1 == Catch::Approx(sig).margin(1e-12));
    REQUIRE(sig + 1.0 / (1.0 + std::exp(z)) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("model checkpoints round trip through disk") {
    Seq2SeqPair m = tiny_pair(17);
    const auto path = std::filesystem::temp_directory_path() / "btseq_model_io_test.ckpt";
    save_seq2seq(path.string(), m, 0xabcdefull);
    LoadedSeq2Seq loaded = load_seq2seq(path.string());
    REQUIRE(loaded.vocab_fingerprint == 0xabcdefull);
    REQUIRE(loaded.model.config.vocab_size == m.config.vocab_size);
    REQUIRE(loaded.model.config.hidden_dim == m.config.hidden_dim);
    auto orig = m.all_params();
    auto back = loaded.model.all_params();
    REQUIRE(orig.size() == back.size());
    // values survive at f32 checkpoint resolution
    for (std::size_t i = 0; i < orig.size(); ++i) {
        REQUIRE(orig[i]->name == back[i]->name);
        for (std::size_t k = 0; k < orig[i]->value.size(); ++k)
            REQUIRE(static_cast<float>(orig[i]->value.vec()[k]) ==
                    static_cast<float>(back[i]->value.vec()[k]));
    }
    std::filesystem::remove(path);
}
