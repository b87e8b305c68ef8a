#pragma once

#include <string>
#include <utility>
#include <vector>

#include "btseq/autodiff.hpp"
#include "btseq/rng.hpp"
#include "btseq/tensor.hpp"

namespace btseq {

// Multi-layer LSTM with weights stored pre-transposed so a step is
// x @ w_ih + h @ w_hh + bias. Gate layout along the 4H axis is
// [input | forget | candidate | output].

struct LstmLayer {
    Parameter w_ih;  // [in_dim, 4H]
    Parameter w_hh;  // [H, 4H]
    Parameter bias;  // [1, 4H]
};

struct LstmStack {
    int input_dim = 0;
    int hidden_dim = 0;
    std::vector<LstmLayer> layers;

    static LstmStack create(const std::string& name_prefix, int input_dim, int hidden_dim,
                            int num_layers, Rng& rng) {
        LstmStack s;
        s.input_dim = input_dim;
        s.hidden_dim = hidden_dim;
        for (int l = 0; l < num_layers; ++l) {
            const int in = l == 0 ? input_dim : hidden_dim;
            const std::string p = name_prefix + ".l" + std::to_string(l);
            LstmLayer layer{
                Parameter(p + ".w_ih", Tensor::uniform(in, 4 * hidden_dim, -0.1, 0.1, rng)),
                Parameter(p + ".w_hh", Tensor::uniform(hidden_dim, 4 * hidden_dim, -0.1, 0.1, rng)),
                Parameter(p + ".bias", Tensor::zeros(1, 4 * hidden_dim)),
            };
            // forget-gate bias starts at +1
            for (int j = hidden_dim; j < 2 * hidden_dim; ++j) layer.bias.value.at(0, j) = 1.0;
            s.layers.push_back(std::move(layer));
        }
        return s;
    }

    int num_layers() const { return static_cast<int>(layers.size()); }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (LstmLayer& l : layers) {
            out.push_back(&l.w_ih);
            out.push_back(&l.w_hh);
            out.push_back(&l.bias);
        }
        return out;
    }
};

struct BoundLstmLayer {
    Var w_ih, w_hh, bias;
};

// Per-tape binding of a stack's parameters; bind once, reuse every step.
struct BoundLstm {
    int hidden_dim = 0;
    std::vector<BoundLstmLayer> layers;
};

inline BoundLstm bind_lstm(Tape& tape, LstmStack& stack) {
    BoundLstm b;
    b.hidden_dim = stack.hidden_dim;
    for (LstmLayer& l : stack.layers)
        b.layers.push_back({tape.param(l.w_ih), tape.param(l.w_hh), tape.param(l.bias)});
    return b;
}

// (h, c) per layer
struct LstmStateVars {
    std::vector<std::pair<Var, Var>> hc;
    Var top_h() const { return hc.back().first; }
};

inline LstmStateVars lstm_zero_state(Tape& tape, const BoundLstm& lstm, int batch_rows) {
    LstmStateVars s;
    for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
        Var h = tape.input(Tensor::zeros(batch_rows, lstm.hidden_dim));
        Var c = tape.input(Tensor::zeros(batch_rows, lstm.hidden_dim));
        s.hc.emplace_back(h, c);
    }
    return s;
}

inline LstmStateVars lstm_step(Tape& tape, const BoundLstm& lstm, const LstmStateVars& state, Var x) {
    const int H = lstm.hidden_dim;
    LstmStateVars next;
    Var layer_in = x;
    for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
        const BoundLstmLayer& w = lstm.layers[l];
        const auto [h_prev, c_prev] = state.hc[l];
        Var pre = tape.add_row(tape.add(tape.matmul(layer_in, w.w_ih), tape.matmul(h_prev, w.w_hh)), w.bias);
        Var gi = tape.sigmoid(tape.slice_cols(pre, 0, H));
        Var gf = tape.sigmoid(tape.slice_cols(pre, H, H));
        Var gg = tape.tanh_(tape.slice_cols(pre, 2 * H, H));
        Var go = tape.sigmoid(tape.slice_cols(pre, 3 * H, H));
        Var c_new = tape.add(tape.mul(gf, c_prev), tape.mul(gi, gg));
        Var h_new = tape.mul(go, tape.tanh_(c_new));
        next.hc.emplace_back(h_new, c_new);
        layer_in = h_new;
    }
    return next;
}

}  // namespace btseq
