#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "btseq/errors.hpp"
#include "btseq/tensor.hpp"

namespace btseq {

struct AdamConfig {
    double lr = 0.15;  // reference value; desk-scale runs usually override
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline double global_grad_norm(const std::vector<Parameter*>& params) {
    double sq = 0.0;
    for (const Parameter* p : params)
        for (double g : p->grad.vec()) sq += g * g;
    return std::sqrt(sq);
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. Returns the factor applied (1.0 when already within bounds).
inline double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
    if (max_norm <= 0.0) throw InputError("clip_global_norm: max_norm must be positive");
    const double norm = global_grad_norm(params);
    if (norm <= max_norm || norm == 0.0) return 1.0;
    const double factor = max_norm / norm;
    for (Parameter* p : params)
        for (double& g : p->grad.vec()) g *= factor;
    return factor;
}

// Bias-corrected Adam update over one parameter group. All-or-nothing: a
// non-finite gradient anywhere skips the whole group. Gradients are
// zeroed after a successful update.
inline void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
    if (params.empty()) return;
    const std::int64_t t0 = params.front()->step_count;
    for (const Parameter* p : params) {
        if (p->step_count != t0) throw InputError("adam_step: inconsistent step counts in group");
        if (!p->grad.all_finite()) throw NumericError("adam_step: non-finite gradient for " + p->name);
    }
    for (Parameter* p : params) {
        p->step_count += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.vec()[i];
            double& m = p->adam_m.vec()[i];
            double& v = p->adam_v.vec()[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p->value.vec()[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p->zero_grad();
    }
}

inline void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

inline void reset_optimizer_state(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->reset_optimizer_state();
}

}  // namespace btseq
