#pragma once

#include <cstdint>
#include <vector>

#include "mimic/ssm/layer.hpp"
#include "mimic/util/rng.hpp"

namespace mimic::ssm {

// Eigenvalues of the normal part of the HiPPO-LegS state matrix, size P,
// sorted by imaginary part. Every real part is exactly -1/2; the imaginary
// parts come from the skew-symmetric remainder and are returned in `im`.
void hippo_legs_eigenvalues(std::size_t p, std::vector<double>& im);

// Standard block initialization: Lambda from HiPPO-LegS, log-timescales
// log-spaced over [1e-3, 0.1], complex-normal B and C scaled by fan-in,
// D ~ N(0,1), gate weights ~ N(0, 1/H), zero gate bias, identity layer norm.
template <typename T>
void init_block(S5Block<T>& blk, uint64_t seed) {
    const std::size_t H = blk.H, P = blk.P;
    std::vector<double> im;
    hippo_legs_eigenvalues(P, im);
    for (std::size_t p = 0; p < P; ++p) {
        blk.lambda_log_re.w[p] = T(std::log(0.5));
        blk.lambda_im.w[p] = T(im[p]);
        const double lo = std::log(1e-3), hi = std::log(0.1);
        const double f = P > 1 ? static_cast<double>(p) / (P - 1) : 0.0;
        blk.log_delta.w[p] = T(lo + f * (hi - lo));
    }
    util::Rng rng(util::derive_seed(seed, 1));
    const double b_std = 1.0 / std::sqrt(2.0 * static_cast<double>(H));
    for (auto& x : blk.B_re.w) x = T(rng.normal() * b_std);
    for (auto& x : blk.B_im.w) x = T(rng.normal() * b_std);
    const double c_std = 1.0 / std::sqrt(2.0 * static_cast<double>(P));
    for (auto& x : blk.C_re.w) x = T(rng.normal() * c_std);
    for (auto& x : blk.C_im.w) x = T(rng.normal() * c_std);
    for (auto& x : blk.D.w) x = T(rng.normal());
    const double wg_std = 1.0 / std::sqrt(static_cast<double>(H));
    for (auto& x : blk.Wg.w) x = T(rng.normal() * wg_std);
}

} // namespace mimic::ssm
