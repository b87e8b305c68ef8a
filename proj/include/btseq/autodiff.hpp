#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "btseq/errors.hpp"
#include "btseq/tensor.hpp"

namespace btseq {

// Reverse-mode autodiff over a define-by-run tape. A tape is built per
// batch, consumed by one backward() call and discarded. Parameters bind
// to leaf nodes; backward() accumulates d(loss)/d(param) into
// Parameter::grad additively, leaving parameters that do not reach the
// loss untouched.
class Tape {
  public:
    struct Var {
        int i = -1;
        bool valid() const { return i >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }

    const Tensor& value(Var v) const { return node(v).val; }
    double scalar_value(Var v) const { return node(v).val.item(); }

    // ---- leaves ----------------------------------------------------

    Var input(Tensor t) {
        require_finite(t, "tape.input");
        return push(std::move(t), {}, nullptr);
    }

    Var param(Parameter& p) {
        require_finite(p.value, "tape.param");
        return push(p.value, {}, &p);
    }

    // ---- primitives ------------------------------------------------

    Var matmul(Var a, Var b) {
        const Tensor& A = node(a).val;
        const Tensor& B = node(b).val;
        if (A.cols() != B.rows()) throw InputError("matmul: inner dimensions disagree");
        Tensor C(A.rows(), B.cols());
        const int m = A.rows(), k = A.cols(), n = B.cols();
        for (int i = 0; i < m; ++i) {
            const double* arow = A.data() + static_cast<std::size_t>(i) * k;
            double* crow = C.data() + static_cast<std::size_t>(i) * n;
            for (int p = 0; p < k; ++p) {
                const double av = arow[p];
                if (av == 0.0) continue;
                const double* brow = B.data() + static_cast<std::size_t>(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& A = t.node(a).val;
            const Tensor& B = t.node(b).val;
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            Tensor& dB = t.node(b).grad;
            const int m = A.rows(), k = A.cols(), n = B.cols();
            for (int i = 0; i < m; ++i) {
                const double* grow = G.data() + static_cast<std::size_t>(i) * n;
                double* darow = dA.data() + static_cast<std::size_t>(i) * k;
                for (int p = 0; p < k; ++p) {
                    const double* brow = B.data() + static_cast<std::size_t>(p) * n;
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                    darow[p] += s;
                }
                const double* arow = A.data() + static_cast<std::size_t>(i) * k;
                for (int p = 0; p < k; ++p) {
                    const double av = arow[p];
                    if (av == 0.0) continue;
                    double* dbrow = dB.data() + static_cast<std::size_t>(p) * n;
                    for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                }
            }
        });
    }

    Var add(Var a, Var b) {
        const Tensor& A = node(a).val;
        const Tensor& B = node(b).val;
        if (!A.same_shape(B)) throw InputError("add: shape mismatch");
        Tensor C = A;
        C.add_inplace(B);
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            t.node(a).grad.add_inplace(G);
            t.node(b).grad.add_inplace(G);
        });
    }

    // [m,n] + broadcast [1,n]
    Var add_row(Var a, Var row) {
        const Tensor& A = node(a).val;
        const Tensor& R = node(row).val;
        if (R.rows() != 1 || R.cols() != A.cols()) throw InputError("add_row: expected a 1xN row matching columns");
        Tensor C = A;
        for (int i = 0; i < C.rows(); ++i)
            for (int j = 0; j < C.cols(); ++j) C.at(i, j) += R.at(0, j);
        return push(std::move(C), [a, row](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            t.node(a).grad.add_inplace(G);
            Tensor& dR = t.node(row).grad;
            for (int i = 0; i < G.rows(); ++i)
                for (int j = 0; j < G.cols(); ++j) dR.at(0, j) += G.at(i, j);
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& A = node(a).val;
        const Tensor& B = node(b).val;
        if (!A.same_shape(B)) throw InputError("mul: shape mismatch");
        Tensor C(A.rows(), A.cols());
        for (std::size_t i = 0; i < C.size(); ++i) C.vec()[i] = A.vec()[i] * B.vec()[i];
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& A = t.node(a).val;
            const Tensor& B = t.node(b).val;
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            Tensor& dB = t.node(b).grad;
            for (std::size_t i = 0; i < G.size(); ++i) {
                dA.vec()[i] += G.vec()[i] * B.vec()[i];
                dB.vec()[i] += G.vec()[i] * A.vec()[i];
            }
        });
    }

    Var sigmoid(Var a) {
        const Tensor& A = node(a).val;
        Tensor C(A.rows(), A.cols());
        for (std::size_t i = 0; i < C.size(); ++i) {
            const double x = A.vec()[i];
            C.vec()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        }
        return push(std::move(C), [a](Tape& t, int self) {
            const Tensor& S = t.node_at(self).val;
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            for (std::size_t i = 0; i < G.size(); ++i) {
                const double s = S.vec()[i];
                dA.vec()[i] += G.vec()[i] * s * (1.0 - s);
            }
        });
    }

    Var tanh_(Var a) {
        const Tensor& A = node(a).val;
        Tensor C(A.rows(), A.cols());
        for (std::size_t i = 0; i < C.size(); ++i) C.vec()[i] = std::tanh(A.vec()[i]);
        return push(std::move(C), [a](Tape& t, int self) {
            const Tensor& S = t.node_at(self).val;
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            for (std::size_t i = 0; i < G.size(); ++i) {
                const double s = S.vec()[i];
                dA.vec()[i] += G.vec()[i] * (1.0 - s * s);
            }
        });
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& A = node(a).val;
        const Tensor& B = node(b).val;
        if (A.rows() != B.rows()) throw InputError("concat_cols: row counts disagree");
        Tensor C(A.rows(), A.cols() + B.cols());
        for (int i = 0; i < A.rows(); ++i) {
            for (int j = 0; j < A.cols(); ++j) C.at(i, j) = A.at(i, j);
            for (int j = 0; j < B.cols(); ++j) C.at(i, A.cols() + j) = B.at(i, j);
        }
        const int acols = A.cols();
        return push(std::move(C), [a, b, acols](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            Tensor& dB = t.node(b).grad;
            for (int i = 0; i < G.rows(); ++i) {
                for (int j = 0; j < dA.cols(); ++j) dA.at(i, j) += G.at(i, j);
                for (int j = 0; j < dB.cols(); ++j) dB.at(i, j) += G.at(i, acols + j);
            }
        });
    }

    Var slice_cols(Var a, int start, int len) {
        const Tensor& A = node(a).val;
        if (start < 0 || len < 0 || start + len > A.cols()) throw InputError("slice_cols: range out of bounds");
        Tensor C(A.rows(), len);
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < len; ++j) C.at(i, j) = A.at(i, start + j);
        return push(std::move(C), [a, start, len](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            for (int i = 0; i < G.rows(); ++i)
                for (int j = 0; j < len; ++j) dA.at(i, start + j) += G.at(i, j);
        });
    }

    // numerically stable softmax along each row
    Var row_softmax(Var a) {
        const Tensor& A = node(a).val;
        Tensor C(A.rows(), A.cols());
        for (int i = 0; i < A.rows(); ++i) {
            double mx = A.at(i, 0);
            for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
            double z = 0.0;
            for (int j = 0; j < A.cols(); ++j) {
                const double e = std::exp(A.at(i, j) - mx);
                C.at(i, j) = e;
                z += e;
            }
            for (int j = 0; j < A.cols(); ++j) C.at(i, j) /= z;
        }
        return push(std::move(C), [a](Tape& t, int self) {
            const Tensor& S = t.node_at(self).val;
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            for (int i = 0; i < S.rows(); ++i) {
                double dot = 0.0;
                for (int j = 0; j < S.cols(); ++j) dot += G.at(i, j) * S.at(i, j);
                for (int j = 0; j < S.cols(); ++j) dA.at(i, j) += S.at(i, j) * (G.at(i, j) - dot);
            }
        });
    }

    // per-row cross entropy between softmax(logits) and integer targets,
    // computed via log-sum-exp; result is [m,1]
    Var softmax_xent(Var logits, const std::vector<int>& targets) {
        const Tensor& L = node(logits).val;
        if (static_cast<int>(targets.size()) != L.rows())
            throw InputError("softmax_xent: one target per row required");
        for (int tgt : targets)
            if (tgt < 0 || tgt >= L.cols()) throw InputError("softmax_xent: target out of vocabulary");
        Tensor loss(L.rows(), 1);
        Tensor probs(L.rows(), L.cols());
        for (int i = 0; i < L.rows(); ++i) {
            double mx = L.at(i, 0);
            for (int j = 1; j < L.cols(); ++j) mx = std::max(mx, L.at(i, j));
            double z = 0.0;
            for (int j = 0; j < L.cols(); ++j) z += std::exp(L.at(i, j) - mx);
            const double lse = mx + std::log(z);
            loss.at(i, 0) = lse - L.at(i, targets[static_cast<std::size_t>(i)]);
            for (int j = 0; j < L.cols(); ++j) probs.at(i, j) = std::exp(L.at(i, j) - lse);
        }
        auto probs_copy = std::make_shared<Tensor>(std::move(probs));
        auto tgts = std::make_shared<std::vector<int>>(targets);
        return push(std::move(loss), [logits, probs_copy, tgts](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            Tensor& dL = t.node(logits).grad;
            const Tensor& P = *probs_copy;
            for (int i = 0; i < P.rows(); ++i) {
                const double g = G.at(i, 0);
                if (g == 0.0) continue;
                for (int j = 0; j < P.cols(); ++j) dL.at(i, j) += g * P.at(i, j);
                dL.at(i, (*tgts)[static_cast<std::size_t>(i)]) -= g;
            }
        });
    }

    // gather rows of an embedding table: table [V,E], ids -> [len,E]
    Var embedding(Var table, const std::vector<int>& ids) {
        const Tensor& T = node(table).val;
        for (int id : ids)
            if (id < 0 || id >= T.rows()) throw InputError("embedding: id out of vocabulary");
        Tensor C(static_cast<int>(ids.size()), T.cols());
        for (std::size_t r = 0; r < ids.size(); ++r)
            for (int j = 0; j < T.cols(); ++j) C.at(static_cast<int>(r), j) = T.at(ids[r], j);
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        return push(std::move(C), [table, ids_copy](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            Tensor& dT = t.node(table).grad;
            for (std::size_t r = 0; r < ids_copy->size(); ++r)
                for (int j = 0; j < G.cols(); ++j)
                    dT.at((*ids_copy)[r], j) += G.at(static_cast<int>(r), j);
        });
    }

    Var sum(Var a) {
        const Tensor& A = node(a).val;
        double s = 0.0;
        for (double x : A.vec()) s += x;
        return push(Tensor::scalar(s), [a](Tape& t, int self) {
            const double g = t.node_at(self).grad.item();
            Tensor& dA = t.node(a).grad;
            for (double& x : dA.vec()) x += g;
        });
    }

    Var scale(Var a, double c) {
        const Tensor& A = node(a).val;
        Tensor C(A.rows(), A.cols());
        for (std::size_t i = 0; i < C.size(); ++i) C.vec()[i] = A.vec()[i] * c;
        return push(std::move(C), [a, c](Tape& t, int self) {
            const Tensor& G = t.node_at(self).grad;
            Tensor& dA = t.node(a).grad;
            for (std::size_t i = 0; i < G.size(); ++i) dA.vec()[i] += G.vec()[i] * c;
        });
    }

    // ---- backward --------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and walks the tape once in reverse
    // execution order, then adds each bound leaf's gradient into its
    // Parameter. Callable once per tape.
    void backward(Var loss) {
        if (consumed_) throw InputError("tape.backward: tape already consumed");
        const Tensor& L = node(loss).val;
        if (L.rows() != 1 || L.cols() != 1) throw InputError("tape.backward: loss must be scalar");
        consumed_ = true;
        for (Node& n : nodes_) n.grad = Tensor(n.val.rows(), n.val.cols());
        nodes_[static_cast<std::size_t>(loss.i)].grad.vec()[0] = 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back) n.back(*this, i);
            if (n.bound) n.bound->grad.add_inplace(n.grad);
        }
    }

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&, int)> back;
        Parameter* bound = nullptr;
    };

    Node& node(Var v) {
        if (!v.valid() || v.i >= static_cast<int>(nodes_.size()))
            throw InputError("tape: invalid variable handle");
        return nodes_[static_cast<std::size_t>(v.i)];
    }
    const Node& node(Var v) const {
        if (!v.valid() || v.i >= static_cast<int>(nodes_.size()))
            throw InputError("tape: invalid variable handle");
        return nodes_[static_cast<std::size_t>(v.i)];
    }
    Node& node_at(int i) { return nodes_[static_cast<std::size_t>(i)]; }

    Var push(Tensor val, std::function<void(Tape&, int)> back, Parameter* bound) {
        require_finite(val, "tape.op");
        nodes_.push_back(Node{std::move(val), Tensor(), std::move(back), bound});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }
    Var push(Tensor val, std::function<void(Tape&, int)> back) {
        return push(std::move(val), std::move(back), nullptr);
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

using Var = Tape::Var;

}  // namespace btseq
