#pragma once

#include <cstddef>

#include <json.hpp>

namespace mimic::model {

// Dual-branch architecture: tokens and book snapshots are embedded to
// `width` each, run through `branch_blocks` sequence blocks per branch,
// concatenated to 2*width, run through `post_blocks` more blocks, and read
// out at the last position into `vocab` logits.
struct ModelConfig {
    std::size_t vocab = 3012;
    std::size_t book_features = 21;     // 2M+1 book vector length
    std::size_t width = 128;            // per-branch feature width
    std::size_t state_dim = 256;        // recurrent states per block
    std::size_t branch_blocks = 2;      // blocks in each input branch
    std::size_t post_blocks = 10;       // blocks after fusion
    std::size_t context_messages = 500; // messages per sample
    double dropout = 0.0;               // on each block's gated branch

    static ModelConfig paper_scale() { return ModelConfig{}; }

    static ModelConfig desk_scale() {
        ModelConfig c;
        c.width = 64;
        c.state_dim = 64;
        c.post_blocks = 4;
        c.context_messages = 100;
        return c;
    }

    std::size_t fused_width() const { return 2 * width; }

    // Closed-form trainable-parameter count; one block at width H with P
    // states holds 4PH + H^2 + 4H + 3P parameters.
    std::size_t param_count() const {
        const auto blk = [](std::size_t h, std::size_t p) {
            return 4 * p * h + h * h + 4 * h + 3 * p;
        };
        const std::size_t embed = vocab * width;
        const std::size_t book = book_features * width + width;
        const std::size_t branches = 2 * branch_blocks * blk(width, state_dim);
        const std::size_t post = post_blocks * blk(fused_width(), state_dim);
        const std::size_t head = fused_width() * vocab + vocab;
        return embed + book + branches + post + head;
    }

    nlohmann::json to_json() const {
        return {{"vocab", vocab},
                {"book_features", book_features},
                {"width", width},
                {"state_dim", state_dim},
                {"branch_blocks", branch_blocks},
                {"post_blocks", post_blocks},
                {"context_messages", context_messages},
                {"dropout", dropout}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.vocab = j.value("vocab", c.vocab);
        c.book_features = j.value("book_features", c.book_features);
        c.width = j.value("width", c.width);
        c.state_dim = j.value("state_dim", c.state_dim);
        c.branch_blocks = j.value("branch_blocks", c.branch_blocks);
        c.post_blocks = j.value("post_blocks", c.post_blocks);
        c.context_messages = j.value("context_messages", c.context_messages);
        c.dropout = j.value("dropout", c.dropout);
        return c;
    }
};

} // namespace mimic::model
