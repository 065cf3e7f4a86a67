#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mimic/codec/vocab.hpp"
#include "mimic/model/config.hpp"
#include "mimic/ssm/init.hpp"
#include "mimic/ssm/layer.hpp"
#include "mimic/util/rng.hpp"

// Dual-branch masked-token network. Tokens are embedded and run through a
// stack of sequence blocks at message-token resolution; book snapshots are
// projected and run through their own stack at message resolution, then each
// book feature row is repeated across its message's token positions. The two
// streams are concatenated feature-wise and processed by the post-fusion
// stack; a linear head reads the LAST position into vocabulary logits.

namespace mimic::model {

template <typename T>
struct Net {
    ModelConfig cfg;
    ssm::Param<T> embed;            // [V][H]
    ssm::Param<T> book_w, book_b;   // [F][H], [H]
    std::vector<ssm::S5Block<T>> tok_blocks, book_blocks, post_blocks;
    ssm::Param<T> head_w, head_b;   // [2H][V], [V]

    void init(const ModelConfig& c, uint64_t seed) {
        cfg = c;
        const std::size_t V = c.vocab, H = c.width, F = c.book_features;
        embed.init(V * H);
        book_w.init(F * H);
        book_b.init(H);
        head_w.init(2 * H * V); // zero: uniform logits before training
        head_b.init(V);

        util::Rng rng(util::derive_seed(seed, 101));
        for (auto& x : embed.w) x = T(rng.normal() * 0.02);
        const double bw_std = 1.0 / std::sqrt(static_cast<double>(F));
        for (auto& x : book_w.w) x = T(rng.normal() * bw_std);

        tok_blocks.assign(c.branch_blocks, {});
        book_blocks.assign(c.branch_blocks, {});
        post_blocks.assign(c.post_blocks, {});
        uint64_t k = 0;
        for (auto& b : tok_blocks) {
            b.init(H, c.state_dim);
            ssm::init_block(b, util::derive_seed(seed, 201, k++));
        }
        for (auto& b : book_blocks) {
            b.init(H, c.state_dim);
            ssm::init_block(b, util::derive_seed(seed, 201, k++));
        }
        for (auto& b : post_blocks) {
            b.init(2 * H, c.state_dim);
            ssm::init_block(b, util::derive_seed(seed, 201, k++));
        }
    }

    std::vector<ssm::ParamRef<T>> params() {
        std::vector<ssm::ParamRef<T>> out;
        out.push_back({"embed", &embed});
        out.push_back({"book_w", &book_w});
        out.push_back({"book_b", &book_b});
        for (std::size_t i = 0; i < tok_blocks.size(); ++i)
            tok_blocks[i].collect("tok." + std::to_string(i), out);
        for (std::size_t i = 0; i < book_blocks.size(); ++i)
            book_blocks[i].collect("book." + std::to_string(i), out);
        for (std::size_t i = 0; i < post_blocks.size(); ++i)
            post_blocks[i].collect("post." + std::to_string(i), out);
        out.push_back({"head_w", &head_w});
        out.push_back({"head_b", &head_b});
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& pr : params()) n += pr.p->size();
        return n;
    }

    void zero_grads() {
        for (auto& pr : params()) std::fill(pr.p->g.begin(), pr.p->g.end(), T(0));
    }
};

// Activation storage for one sample; reuse across calls to avoid churn.
template <typename T>
struct NetWork {
    std::vector<T> tok_in;                // [Lt][H]
    std::vector<std::vector<T>> tok_out;  // per block, [Lt][H]
    std::vector<T> book_scaled;           // [Lm][F]
    std::vector<T> book_in;               // [Lm][H]
    std::vector<std::vector<T>> book_out; // per block, [Lm][H]
    std::vector<T> fused;                 // [Lt][2H]
    std::vector<std::vector<T>> post_out; // per block, [Lt][2H]
    std::vector<T> logits;                // [V]

    std::vector<ssm::BlockWork<T>> tok_bw, book_bw, post_bw;
    std::vector<std::vector<T>> tok_dm, book_dm, post_dm; // dropout masks

    std::vector<T> g_cur, g_prev;   // [Lt][2H] post-stack backward
    std::vector<T> gt_cur, gt_prev; // [Lt][H] token-branch backward
    std::vector<T> gb_cur, gb_prev; // [Lm][H] book-branch backward

    void resize(const ModelConfig& c, std::size_t lm) {
        const std::size_t lt = lm * codec::pos::TOKENS_PER_MESSAGE;
        const std::size_t H = c.width;
        tok_in.resize(lt * H);
        tok_out.assign(c.branch_blocks, std::vector<T>(lt * H));
        book_scaled.resize(lm * c.book_features);
        book_in.resize(lm * H);
        book_out.assign(c.branch_blocks, std::vector<T>(lm * H));
        fused.resize(lt * 2 * H);
        post_out.assign(c.post_blocks, std::vector<T>(lt * 2 * H));
        logits.resize(c.vocab);
        tok_bw.resize(c.branch_blocks);
        book_bw.resize(c.branch_blocks);
        post_bw.resize(c.post_blocks);
        g_cur.resize(lt * 2 * H);
        g_prev.resize(lt * 2 * H);
        gt_cur.resize(lt * H);
        gt_prev.resize(lt * H);
        gb_cur.resize(lm * H);
        gb_prev.resize(lm * H);
    }
};

namespace detail {

// Inverted dropout: 0 with probability `rate`, else 1/(1-rate).
template <typename T>
void fill_dropout(std::vector<T>& m, std::size_t n, double rate, util::Rng& rng) {
    m.resize(n);
    const T keep = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < rate ? T(0) : keep;
}

} // namespace detail

// `tokens`: Lm*23 ids; `books`: Lm rows of cfg.book_features raw tick values
// (scaled by 1/999 inside). When `drop_rng` is non-null and cfg.dropout > 0,
// fresh inverted-dropout masks are drawn and kept in `w` for the backward.
template <typename T>
void net_forward(Net<T>& net, const uint16_t* tokens, const int16_t* books,
                 std::size_t lm, NetWork<T>& w, bool parallel_scan,
                 util::Rng* drop_rng = nullptr) {
    const ModelConfig& c = net.cfg;
    const std::size_t lt = lm * codec::pos::TOKENS_PER_MESSAGE;
    const std::size_t H = c.width, F = c.book_features, V = c.vocab;
    w.resize(c, lm);
    const bool drop = drop_rng != nullptr && c.dropout > 0.0;
    if (drop) {
        w.tok_dm.resize(c.branch_blocks);
        w.book_dm.resize(c.branch_blocks);
        w.post_dm.resize(c.post_blocks);
        for (auto& m : w.tok_dm) detail::fill_dropout(m, lt * H, c.dropout, *drop_rng);
        for (auto& m : w.book_dm) detail::fill_dropout(m, lm * H, c.dropout, *drop_rng);
        for (auto& m : w.post_dm) detail::fill_dropout(m, lt * 2 * H, c.dropout, *drop_rng);
    }

    // token branch
    for (std::size_t t = 0; t < lt; ++t) {
        const uint16_t id = tokens[t];
        if (id >= V) throw std::runtime_error("token id out of vocabulary");
        const T* row = net.embed.w.data() + static_cast<std::size_t>(id) * H;
        std::copy(row, row + H, w.tok_in.data() + t * H);
    }
    {
        const T* in = w.tok_in.data();
        for (std::size_t b = 0; b < c.branch_blocks; ++b) {
            ssm::block_forward(net.tok_blocks[b], lt, in, w.tok_out[b].data(),
                               w.tok_bw[b], parallel_scan,
                               drop ? w.tok_dm[b].data() : nullptr);
            in = w.tok_out[b].data();
        }
    }

    // book branch
    const T scale = T(1) / T(999);
    for (std::size_t i = 0; i < lm * F; ++i) w.book_scaled[i] = T(books[i]) * scale;
    for (std::size_t m = 0; m < lm; ++m)
        std::copy(net.book_b.w.begin(), net.book_b.w.end(), w.book_in.begin() + m * H);
    ssm::gemm_nn(lm, H, F, w.book_scaled.data(), net.book_w.w.data(), w.book_in.data());
    {
        const T* in = w.book_in.data();
        for (std::size_t b = 0; b < c.branch_blocks; ++b) {
            ssm::block_forward(net.book_blocks[b], lm, in, w.book_out[b].data(),
                               w.book_bw[b], parallel_scan,
                               drop ? w.book_dm[b].data() : nullptr);
            in = w.book_out[b].data();
        }
    }

    // fuse: concat(token features, message's book features) per token position
    const T* tok_top = w.tok_out.back().data();
    const T* book_top = w.book_out.back().data();
    for (std::size_t t = 0; t < lt; ++t) {
        T* ft = w.fused.data() + t * 2 * H;
        std::copy(tok_top + t * H, tok_top + (t + 1) * H, ft);
        const std::size_t m = t / codec::pos::TOKENS_PER_MESSAGE;
        std::copy(book_top + m * H, book_top + (m + 1) * H, ft + H);
    }
    {
        const T* in = w.fused.data();
        for (std::size_t b = 0; b < c.post_blocks; ++b) {
            ssm::block_forward(net.post_blocks[b], lt, in, w.post_out[b].data(),
                               w.post_bw[b], parallel_scan,
                               drop ? w.post_dm[b].data() : nullptr);
            in = w.post_out[b].data();
        }
    }

    // head at the last position
    const T* last = w.post_out.back().data() + (lt - 1) * 2 * H;
    std::copy(net.head_b.w.begin(), net.head_b.w.end(), w.logits.begin());
    ssm::gemm_nn(1, V, 2 * H, last, net.head_w.w.data(), w.logits.data());
    for (const T x : w.logits)
        if (!std::isfinite(static_cast<double>(x)))
            throw std::runtime_error("non-finite logits");
}

// Accumulates parameter gradients for one sample given d loss / d logits.
// Must follow a net_forward on the same inputs with the same masks.
template <typename T>
void net_backward(Net<T>& net, const uint16_t* tokens, const int16_t* books,
                  std::size_t lm, const T* g_logits, NetWork<T>& w,
                  bool parallel_scan) {
    const ModelConfig& c = net.cfg;
    const std::size_t lt = lm * codec::pos::TOKENS_PER_MESSAGE;
    const std::size_t H = c.width, F = c.book_features, V = c.vocab;
    const bool drop = !w.post_dm.empty() && c.dropout > 0.0;

    // head
    const T* last = w.post_out.back().data() + (lt - 1) * 2 * H;
    ssm::gemm_tn(1, V, 2 * H, last, g_logits, net.head_w.g.data());
#pragma omp simd
    for (std::size_t v = 0; v < V; ++v) net.head_b.g[v] += g_logits[v];
    std::fill(w.g_cur.begin(), w.g_cur.end(), T(0));
    ssm::gemm_nt(1, 2 * H, V, g_logits, net.head_w.w.data(),
                 w.g_cur.data() + (lt - 1) * 2 * H);

    // post stack, last block to first
    for (std::size_t b = c.post_blocks; b-- > 0;) {
        const T* in = b == 0 ? w.fused.data() : w.post_out[b - 1].data();
        ssm::block_backward(net.post_blocks[b], lt, in, w.g_cur.data(),
                            w.g_prev.data(), w.post_bw[b], parallel_scan,
                            drop ? w.post_dm[b].data() : nullptr);
        std::swap(w.g_cur, w.g_prev);
    }

    // split the fused gradient back into the two branches
    std::fill(w.gb_cur.begin(), w.gb_cur.end(), T(0));
    for (std::size_t t = 0; t < lt; ++t) {
        const T* gf = w.g_cur.data() + t * 2 * H;
        std::copy(gf, gf + H, w.gt_cur.data() + t * H);
        T* gb = w.gb_cur.data() + (t / codec::pos::TOKENS_PER_MESSAGE) * H;
#pragma omp simd
        for (std::size_t i = 0; i < H; ++i) gb[i] += gf[H + i];
    }

    // token branch
    for (std::size_t b = c.branch_blocks; b-- > 0;) {
        const T* in = b == 0 ? w.tok_in.data() : w.tok_out[b - 1].data();
        ssm::block_backward(net.tok_blocks[b], lt, in, w.gt_cur.data(),
                            w.gt_prev.data(), w.tok_bw[b], parallel_scan,
                            drop ? w.tok_dm[b].data() : nullptr);
        std::swap(w.gt_cur, w.gt_prev);
    }
    for (std::size_t t = 0; t < lt; ++t) {
        T* gr = net.embed.g.data() + static_cast<std::size_t>(tokens[t]) * H;
        const T* gt = w.gt_cur.data() + t * H;
#pragma omp simd
        for (std::size_t i = 0; i < H; ++i) gr[i] += gt[i];
    }

    // book branch
    for (std::size_t b = c.branch_blocks; b-- > 0;) {
        const T* in = b == 0 ? w.book_in.data() : w.book_out[b - 1].data();
        ssm::block_backward(net.book_blocks[b], lm, in, w.gb_cur.data(),
                            w.gb_prev.data(), w.book_bw[b], parallel_scan,
                            drop ? w.book_dm[b].data() : nullptr);
        std::swap(w.gb_cur, w.gb_prev);
    }
    ssm::gemm_tn(lm, H, F, w.book_scaled.data(), w.gb_cur.data(), net.book_w.g.data());
    for (std::size_t m = 0; m < lm; ++m) {
        const T* g = w.gb_cur.data() + m * H;
#pragma omp simd
        for (std::size_t i = 0; i < H; ++i) net.book_b.g[i] += g[i];
    }
    (void)books;
}

// Softmax + cross-entropy at the readout. Accumulates in double regardless
// of T; writes probabilities and, when g_logits != nullptr, the gradient
// (probs - onehot(label)).
template <typename T>
double softmax_ce(const std::vector<T>& logits, uint16_t label,
                  std::vector<double>& probs, T* g_logits = nullptr) {
    const std::size_t n = logits.size();
    probs.resize(n);
    double mx = -1e300;
    for (const T x : logits) mx = std::max(mx, static_cast<double>(x));
    for (std::size_t i = 0; i < n; ++i)
        probs[i] = std::exp(static_cast<double>(logits[i]) - mx);
    double z = 0.0;
// pinned summation split: the rounding of z must not depend on the
// allocator's placement of probs, or same-seed runs drift apart
#pragma omp simd reduction(+ : z)
    for (std::size_t i = 0; i < n; ++i) z += probs[i];
    for (std::size_t i = 0; i < n; ++i) probs[i] /= z;
    if (g_logits)
        for (std::size_t i = 0; i < n; ++i)
            g_logits[i] = T(probs[i] - (i == label ? 1.0 : 0.0));
    return -std::log(std::max(probs[label], 1e-300));
}

} // namespace mimic::model
