#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// First-order complex diagonal recurrences, stored as separate re/im planes
// with P states per step:
//
//   forward:  x[t] = a ⊙ x[t-1] + b[t]   t = 0..L-1, x[-1] = 0
//   reverse:  g[t] = a ⊙ g[t+1] + b[t]   t = L-1..0, g[L] = 0
//
// `a` is one complex value per state, constant over time. The parallel
// variants split the time axis into chunks: each chunk scans locally from
// zero, a serial pass combines the chunk carries (the associative combiner
// (a1,b1)∘(a2,b2) = (a2·a1, a2·b1 + b2) specialised to constant a), and a
// final pass folds the carry into each chunk. The serial variants are the
// reference the parallel ones are tested against.

namespace mimic::ssm {

template <typename T>
void scan_serial(std::size_t l, std::size_t p,
                 const T* a_re, const T* a_im,
                 const T* b_re, const T* b_im,
                 T* x_re, T* x_im) {
    if (l == 0) return;
    std::copy(b_re, b_re + p, x_re);
    std::copy(b_im, b_im + p, x_im);
    for (std::size_t t = 1; t < l; ++t) {
        const T* pr = x_re + (t - 1) * p;
        const T* pi = x_im + (t - 1) * p;
        const T* br = b_re + t * p;
        const T* bi = b_im + t * p;
        T* xr = x_re + t * p;
        T* xi = x_im + t * p;
#pragma omp simd
        for (std::size_t j = 0; j < p; ++j) {
            xr[j] = a_re[j] * pr[j] - a_im[j] * pi[j] + br[j];
            xi[j] = a_re[j] * pi[j] + a_im[j] * pr[j] + bi[j];
        }
    }
}

template <typename T>
void rscan_serial(std::size_t l, std::size_t p,
                  const T* a_re, const T* a_im,
                  const T* b_re, const T* b_im,
                  T* x_re, T* x_im) {
    if (l == 0) return;
    std::copy(b_re + (l - 1) * p, b_re + l * p, x_re + (l - 1) * p);
    std::copy(b_im + (l - 1) * p, b_im + l * p, x_im + (l - 1) * p);
    for (std::size_t t = l - 1; t-- > 0;) {
        const T* nr = x_re + (t + 1) * p;
        const T* ni = x_im + (t + 1) * p;
        const T* br = b_re + t * p;
        const T* bi = b_im + t * p;
        T* xr = x_re + t * p;
        T* xi = x_im + t * p;
#pragma omp simd
        for (std::size_t j = 0; j < p; ++j) {
            xr[j] = a_re[j] * nr[j] - a_im[j] * ni[j] + br[j];
            xi[j] = a_re[j] * ni[j] + a_im[j] * nr[j] + bi[j];
        }
    }
}

namespace detail {

// `hint` forces a chunk count (tests, benchmarks); 0 picks one from the
// thread count, degenerating to a single chunk — the serial path — when
// only one thread is available.
inline std::size_t scan_chunks(std::size_t l, std::size_t hint) {
    if (hint > 0) return std::max<std::size_t>(1, std::min(hint, l));
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    if (threads <= 1) return 1;
    const std::size_t want = static_cast<std::size_t>(threads) * 4;
    const std::size_t fit = std::max<std::size_t>(1, l / 512);
    return std::max<std::size_t>(1, std::min(want, fit));
}

// A prefix power that has decayed this far contributes less than one ulp
// to any normal result, so the rest of the fold can be skipped. The check
// fires before the lanes reach denormal range, where a decaying product
// stalls on microcode assists and never rounds down to zero.
template <typename T>
inline bool fold_spent(std::size_t p, const T* pw_re, const T* pw_im) {
    T mx = T(0);
    for (std::size_t j = 0; j < p; ++j)
        mx = std::max(mx, std::max(std::abs(pw_re[j]), std::abs(pw_im[j])));
    return mx < std::numeric_limits<T>::min() * T(1e8);
}

// (re, im)^n by binary exponentiation.
template <typename T>
inline void cpow(T ar, T ai, std::size_t n, T& pr, T& pi) {
    pr = T(1);
    pi = T(0);
    while (n > 0) {
        if (n & 1) {
            const T nr = pr * ar - pi * ai;
            pi = pr * ai + pi * ar;
            pr = nr;
        }
        const T sr = ar * ar - ai * ai;
        ai = T(2) * ar * ai;
        ar = sr;
        n >>= 1;
    }
}

} // namespace detail

template <typename T>
void scan_parallel(std::size_t l, std::size_t p,
                   const T* a_re, const T* a_im,
                   const T* b_re, const T* b_im,
                   T* x_re, T* x_im, std::size_t chunk_hint = 0) {
    const std::size_t chunks = detail::scan_chunks(l, chunk_hint);
    if (chunks <= 1) {
        scan_serial(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
        return;
    }
    const std::size_t step = (l + chunks - 1) / chunks;

    // Pass 1: independent local scans from a zero carry.
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t s = c * step;
        const std::size_t e = std::min(l, s + step);
        if (s >= e) continue;
        scan_serial(e - s, p, a_re, a_im,
                    b_re + s * p, b_im + s * p,
                    x_re + s * p, x_im + s * p);
    }

    // Pass 2: serial combine of chunk carries. carry[c] is the true state
    // entering chunk c; the combiner is x -> a^len ⊙ x + local_last.
    std::vector<T> carry_re(chunks * p, T(0)), carry_im(chunks * p, T(0));
    for (std::size_t c = 1; c < chunks; ++c) {
        const std::size_t s = (c - 1) * step;
        const std::size_t e = std::min(l, s + step);
        const std::size_t len = e - s;
        const T* lr = x_re + (e - 1) * p;
        const T* li = x_im + (e - 1) * p;
        const T* cr = carry_re.data() + (c - 1) * p;
        const T* ci = carry_im.data() + (c - 1) * p;
        T* or_ = carry_re.data() + c * p;
        T* oi = carry_im.data() + c * p;
        for (std::size_t j = 0; j < p; ++j) {
            T pr, pi;
            detail::cpow(a_re[j], a_im[j], len, pr, pi);
            or_[j] = pr * cr[j] - pi * ci[j] + lr[j];
            oi[j] = pr * ci[j] + pi * cr[j] + li[j];
        }
    }

    // Pass 3: fold carries into the local results.
#pragma omp parallel for schedule(static)
    for (std::size_t c = 1; c < chunks; ++c) {
        const std::size_t s = c * step;
        const std::size_t e = std::min(l, s + step);
        if (s >= e) continue;
        const T* cr = carry_re.data() + c * p;
        const T* ci = carry_im.data() + c * p;
        std::vector<T> pw_re(a_re, a_re + p), pw_im(a_im, a_im + p);
        for (std::size_t t = s; t < e; ++t) {
            T* xr = x_re + t * p;
            T* xi = x_im + t * p;
#pragma omp simd
            for (std::size_t j = 0; j < p; ++j) {
                xr[j] += pw_re[j] * cr[j] - pw_im[j] * ci[j];
                xi[j] += pw_re[j] * ci[j] + pw_im[j] * cr[j];
            }
            if (t + 1 < e) {
#pragma omp simd
                for (std::size_t j = 0; j < p; ++j) {
                    const T nr = pw_re[j] * a_re[j] - pw_im[j] * a_im[j];
                    pw_im[j] = pw_re[j] * a_im[j] + pw_im[j] * a_re[j];
                    pw_re[j] = nr;
                }
            }
            if (((t - s) & 31u) == 31u &&
                detail::fold_spent(p, pw_re.data(), pw_im.data()))
                break;
        }
    }
}

template <typename T>
void rscan_parallel(std::size_t l, std::size_t p,
                    const T* a_re, const T* a_im,
                    const T* b_re, const T* b_im,
                    T* x_re, T* x_im, std::size_t chunk_hint = 0) {
    const std::size_t chunks = detail::scan_chunks(l, chunk_hint);
    if (chunks <= 1) {
        rscan_serial(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
        return;
    }
    const std::size_t step = (l + chunks - 1) / chunks;

#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t s = c * step;
        const std::size_t e = std::min(l, s + step);
        if (s >= e) continue;
        rscan_serial(e - s, p, a_re, a_im,
                     b_re + s * p, b_im + s * p,
                     x_re + s * p, x_im + s * p);
    }

    std::vector<T> carry_re(chunks * p, T(0)), carry_im(chunks * p, T(0));
    for (std::size_t c = chunks - 1; c-- > 0;) {
        const std::size_t s = (c + 1) * step;
        const std::size_t e = std::min(l, s + step);
        if (s >= e) {
            // empty tail chunk: carry passes through
            std::copy(carry_re.begin() + (c + 1) * p, carry_re.begin() + (c + 2) * p,
                      carry_re.begin() + c * p);
            std::copy(carry_im.begin() + (c + 1) * p, carry_im.begin() + (c + 2) * p,
                      carry_im.begin() + c * p);
            continue;
        }
        const std::size_t len = e - s;
        const T* fr = x_re + s * p;
        const T* fi = x_im + s * p;
        const T* cr = carry_re.data() + (c + 1) * p;
        const T* ci = carry_im.data() + (c + 1) * p;
        T* or_ = carry_re.data() + c * p;
        T* oi = carry_im.data() + c * p;
        for (std::size_t j = 0; j < p; ++j) {
            T pr, pi;
            detail::cpow(a_re[j], a_im[j], len, pr, pi);
            or_[j] = pr * cr[j] - pi * ci[j] + fr[j];
            oi[j] = pr * ci[j] + pi * cr[j] + fi[j];
        }
    }

    // carry[c] is the true adjoint at the first index of chunk c+1, i.e. the
    // value flowing into chunk c from the right; the last chunk needs none.
    const std::size_t last = chunks - 1;
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < last; ++c) {
        const std::size_t s = c * step;
        const std::size_t e = std::min(l, s + step);
        if (s >= e) continue;
        const T* cr = carry_re.data() + c * p;
        const T* ci = carry_im.data() + c * p;
        std::vector<T> pw_re(a_re, a_re + p), pw_im(a_im, a_im + p);
        for (std::size_t t = e; t-- > s;) {
            T* xr = x_re + t * p;
            T* xi = x_im + t * p;
#pragma omp simd
            for (std::size_t j = 0; j < p; ++j) {
                xr[j] += pw_re[j] * cr[j] - pw_im[j] * ci[j];
                xi[j] += pw_re[j] * ci[j] + pw_im[j] * cr[j];
            }
            if (t > s) {
#pragma omp simd
                for (std::size_t j = 0; j < p; ++j) {
                    const T nr = pw_re[j] * a_re[j] - pw_im[j] * a_im[j];
                    pw_im[j] = pw_re[j] * a_im[j] + pw_im[j] * a_re[j];
                    pw_re[j] = nr;
                }
            }
            if (((e - 1 - t) & 31u) == 31u &&
                detail::fold_spent(p, pw_re.data(), pw_im.data()))
                break;
        }
    }
}

// Dispatchers: a single knob keeps training runs bit-reproducible when the
// caller forces the serial path.
template <typename T>
void scan(std::size_t l, std::size_t p,
          const T* a_re, const T* a_im, const T* b_re, const T* b_im,
          T* x_re, T* x_im, bool parallel) {
    if (parallel)
        scan_parallel(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
    else
        scan_serial(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
}

template <typename T>
void rscan(std::size_t l, std::size_t p,
           const T* a_re, const T* a_im, const T* b_re, const T* b_im,
           T* x_re, T* x_im, bool parallel) {
    if (parallel)
        rscan_parallel(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
    else
        rscan_serial(l, p, a_re, a_im, b_re, b_im, x_re, x_im);
}

} // namespace mimic::ssm
