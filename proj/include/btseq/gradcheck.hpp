#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "btseq/autodiff.hpp"
#include "btseq/model.hpp"
#include "btseq/optim.hpp"
#include "btseq/rng.hpp"

namespace btseq {

// Central finite differences against tape gradients, for every primitive
// and for the composed teacher-forced losses. The differencing side only
// ever evaluates forward values at perturbed parameters, so it stays
// independent of the backward pass it is checking.

inline double grad_rel_err(double autodiff_g, double finite_diff_g) {
    return std::abs(autodiff_g - finite_diff_g) /
           std::max(1.0, std::abs(autodiff_g) + std::abs(finite_diff_g));
}

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    bool passed = true;
    double max_rel_err = 0.0;
    int seeds = 0;
    std::vector<GradCheckCase> cases;
};

namespace detail {

inline double max_case_error(const std::vector<Parameter*>& params,
                             const std::function<Var(Tape&)>& loss_fn, double h) {
    zero_grads(params);
    {
        Tape tape;
        Var loss = loss_fn(tape);
        tape.backward(loss);
    }
    std::vector<Tensor> ad_grads;
    ad_grads.reserve(params.size());
    for (Parameter* p : params) ad_grads.push_back(p->grad);
    zero_grads(params);

    auto eval = [&loss_fn]() {
        Tape tape;
        return tape.scalar_value(loss_fn(tape));
    };
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.vec()[i];
            p->value.vec()[i] = orig + h;
            const double f_plus = eval();
            p->value.vec()[i] = orig - h;
            const double f_minus = eval();
            p->value.vec()[i] = orig;
            const double fd = (f_plus - f_minus) / (2.0 * h);
            worst = std::max(worst, grad_rel_err(ad_grads[pi].vec()[i], fd));
        }
    }
    return worst;
}

}  // namespace detail

// One pass over every primitive plus the composed seq2seq, language
// model and discriminator losses, parameters drawn U(-0.5, 0.5).
inline std::vector<GradCheckCase> gradient_check_seed(std::uint64_t seed, double h, double tol) {
    Rng rng = Rng::substream(seed, "gradcheck");
    std::vector<GradCheckCase> cases;
    auto run = [&](const std::string& name, const std::vector<Parameter*>& params,
                   const std::function<Var(Tape&)>& loss_fn) {
        const double err = detail::max_case_error(params, loss_fn, h);
        cases.push_back({name, err, err < tol});
    };
    auto uniform_param = [&rng](const std::string& name, int r, int c) {
        return Parameter(name, Tensor::uniform(r, c, -0.5, 0.5, rng));
    };

    {
        Parameter A = uniform_param("A", 3, 4), B = uniform_param("B", 4, 2);
        const Tensor W = Tensor::uniform(3, 2, -0.5, 0.5, rng);
        run("matmul", {&A, &B}, [&](Tape& t) {
            return t.sum(t.mul(t.matmul(t.param(A), t.param(B)), t.input(W)));
        });
    }
    {
        Parameter X = uniform_param("X", 2, 3), Y = uniform_param("Y", 2, 3), b = uniform_param("b", 1, 3);
        const Tensor W = Tensor::uniform(2, 3, -0.5, 0.5, rng);
        run("add_add_row", {&X, &Y, &b}, [&](Tape& t) {
            return t.sum(t.mul(t.add_row(t.add(t.param(X), t.param(Y)), t.param(b)), t.input(W)));
        });
        run("mul", {&X, &Y}, [&](Tape& t) {
            return t.sum(t.mul(t.mul(t.param(X), t.param(Y)), t.input(W)));
        });
        run("sigmoid", {&X}, [&](Tape& t) { return t.sum(t.mul(t.sigmoid(t.param(X)), t.input(W))); });
        run("tanh", {&X}, [&](Tape& t) { return t.sum(t.mul(t.tanh_(t.param(X)), t.input(W))); });
        run("row_softmax", {&X}, [&](Tape& t) {
            return t.sum(t.mul(t.row_softmax(t.param(X)), t.input(W)));
        });
        run("scale_sum", {&X}, [&](Tape& t) { return t.scale(t.sum(t.param(X)), 0.7); });
    }
    {
        Parameter X = uniform_param("X", 2, 3), Y = uniform_param("Y", 2, 2);
        const Tensor W = Tensor::uniform(2, 3, -0.5, 0.5, rng);
        run("concat_slice", {&X, &Y}, [&](Tape& t) {
            return t.sum(t.mul(t.slice_cols(t.concat_cols(t.param(X), t.param(Y)), 1, 3), t.input(W)));
        });
    }
    {
        Parameter L = uniform_param("logits", 3, 5);
        const std::vector<int> targets{4, 0, 2};
        run("softmax_xent", {&L}, [&](Tape& t) { return t.sum(t.softmax_xent(t.param(L), targets)); });
    }
    {
        Parameter E = uniform_param("E", 6, 4);
        const std::vector<int> ids{1, 3, 3, 5};
        const Tensor W = Tensor::uniform(4, 4, -0.5, 0.5, rng);
        run("embedding", {&E}, [&](Tape& t) {
            return t.sum(t.mul(t.embedding(t.param(E), ids), t.input(W)));
        });
    }
    {
        ModelConfig cfg;
        cfg.vocab_size = 10;
        cfg.embed_dim = 5;
        cfg.hidden_dim = 6;
        cfg.num_layers = 2;
        cfg.max_len = 8;
        Seq2SeqPair pair = Seq2SeqPair::create(cfg, rng);
        for (Parameter* p : pair.all_params())
            p->value = Tensor::uniform(p->value.rows(), p->value.cols(), -0.5, 0.5, rng);
        const std::vector<TokenSeq> srcs{{4, 5, 6}, {7, 8}};
        const std::vector<TokenSeq> tgts{{9, 4}, {5, 6, 7}};
        run("seq2seq_joint_nll", pair.all_params(), [&](Tape& t) {
            Var f = batch_nll(t, pair, Direction::Forward, srcs, tgts).mean;
            Var b = batch_nll(t, pair, Direction::Backward, tgts, srcs).mean;
            return t.add(f, b);
        });
    }
    {
        ModelConfig cfg;
        cfg.vocab_size = 9;
        cfg.embed_dim = 4;
        cfg.hidden_dim = 5;
        cfg.num_layers = 2;
        cfg.max_len = 8;
        LanguageModel lm = LanguageModel::create(cfg, rng);
        for (Parameter* p : lm.params())
            p->value = Tensor::uniform(p->value.rows(), p->value.cols(), -0.5, 0.5, rng);
        const std::vector<TokenSeq> utts{{4, 5, 6, 7}, {8, 4}};
        run("lm_nll", lm.params(), [&](Tape& t) { return lm_batch_nll(t, lm, utts).mean; });
    }
    {
        ModelConfig cfg;
        cfg.vocab_size = 9;
        cfg.embed_dim = 4;
        cfg.hidden_dim = 5;
        cfg.num_layers = 1;
        cfg.max_len = 8;
        Discriminator d = Discriminator::create(cfg, rng);
        for (Parameter* p : d.params())
            p->value = Tensor::uniform(p->value.rows(), p->value.cols(), -0.5, 0.5, rng);
        const std::vector<TokenSeq> ctxs{{4, 5}, {6, 7, 8}};
        const std::vector<TokenSeq> resps{{5, 6, 7}, {8, 4}};
        const std::vector<int> labels{1, 0};
        run("discriminator_bce", d.params(), [&](Tape& t) {
            Var logit = discriminator_logits(t, d, ctxs, resps);
            Var two_class = t.concat_cols(t.input(Tensor::zeros(2, 1)), logit);
            return t.scale(t.sum(t.softmax_xent(two_class, labels)), 0.5);
        });
    }
    return cases;
}

inline GradCheckReport run_gradient_checks(std::uint64_t seed_base, int num_seeds = 10, double h = 1e-5,
                                           double tol = 1e-4) {
    GradCheckReport report;
    report.seeds = num_seeds;
    for (int s = 0; s < num_seeds; ++s) {
        for (GradCheckCase& c : gradient_check_seed(seed_base + static_cast<std::uint64_t>(s), h, tol)) {
            report.max_rel_err = std::max(report.max_rel_err, c.max_rel_err);
            report.passed = report.passed && c.passed;
            bool merged = false;
            for (GradCheckCase& existing : report.cases)
                if (existing.name == c.name) {
                    existing.max_rel_err = std::max(existing.max_rel_err, c.max_rel_err);
                    existing.passed = existing.passed && c.passed;
                    merged = true;
                    break;
                }
            if (!merged) report.cases.push_back(c);
        }
    }
    return report;
}

}  // namespace btseq
