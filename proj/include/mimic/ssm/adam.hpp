#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mimic/ssm/layer.hpp"

namespace mimic::ssm {

// Bias-corrected Adam over a parameter registry. A step with any non-finite
// gradient coordinate is skipped entirely and counted, leaving parameters
// and moments untouched.
template <typename T>
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void attach(const std::vector<ParamRef<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& pr : params) {
            m_.emplace_back(pr.p->size(), T(0));
            v_.emplace_back(pr.p->size(), T(0));
        }
        step_ = 0;
        skipped_ = 0;
    }

    // Returns false when the step was skipped because of a non-finite grad.
    bool step(std::vector<ParamRef<T>>& params) {
        for (const auto& pr : params)
            for (const T g : pr.p->g)
                if (!std::isfinite(static_cast<double>(g))) {
                    ++skipped_;
                    return false;
                }
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i].p;
            T* m = m_[i].data();
            T* v = v_[i].data();
            const std::size_t n = p.size();
            for (std::size_t j = 0; j < n; ++j) {
                const double g = static_cast<double>(p.g[j]);
                const double mj = beta1 * m[j] + (1.0 - beta1) * g;
                const double vj = beta2 * v[j] + (1.0 - beta2) * g * g;
                m[j] = T(mj);
                v[j] = T(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                p.w[j] = T(p.w[j] - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
        return true;
    }

    int64_t steps() const { return step_; }
    int64_t skipped() const { return skipped_; }

private:
    std::vector<std::vector<T>> m_, v_;
    int64_t step_ = 0;
    int64_t skipped_ = 0;
};

} // namespace mimic::ssm
