#include "mimic/ssm/init.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace mimic::ssm {

// The HiPPO-LegS state matrix A (lower triangular) decomposes as
// A = A_normal - p p^T with p[n] = sqrt(n + 1/2). The normal part is
// A_normal = -I/2 + K with K skew-symmetric,
//   K[n][k] = -(1/2)·sqrt(2n+1)·sqrt(2k+1) for n > k, +... for n < k.
// i·K is Hermitian, so its (real) spectrum gives the imaginary parts of the
// eigenvalues of A_normal. This is the only eigensolve in the project; Eigen
// is used for it and nothing else.
void hippo_legs_eigenvalues(std::size_t p, std::vector<double>& im) {
    using Cplx = std::complex<double>;
    Eigen::MatrixXcd ik(p, p);
    for (std::size_t n = 0; n < p; ++n) {
        const double sn = std::sqrt(2.0 * static_cast<double>(n) + 1.0);
        for (std::size_t k = 0; k < p; ++k) {
            if (n == k) {
                ik(n, k) = Cplx(0, 0);
                continue;
            }
            const double sk = std::sqrt(2.0 * static_cast<double>(k) + 1.0);
            const double kk = (n > k ? -0.5 : 0.5) * sn * sk;
            ik(n, k) = Cplx(0, 1) * kk;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(ik);
    im.resize(p);
    for (std::size_t j = 0; j < p; ++j) im[j] = solver.eigenvalues()[j];
    std::sort(im.begin(), im.end());
}

} // namespace mimic::ssm
