#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimic/model/config.hpp"
#include "mimic/model/sample.hpp"

namespace mimic::model {

struct TrainConfig {
    ModelConfig model;
    std::string data_dir;
    TargetSpec target{TargetSpec::Group, 14};
    uint32_t day_begin = 0, day_end = 20; // training days, [begin, end)
    std::size_t epochs = 10;
    std::size_t batch = 16;
    double lr = 1e-3;
    double lr_decay = 1.0;       // per-epoch multiplier
    std::size_t max_samples = 1000;
    std::size_t max_steps = 0;   // optimizer-step cap, 0 = none
    uint64_t seed = 1;
    bool parallel_scan = true;   // chunked scans (single-chunk on one thread)
    bool fixed_masks = false;    // same mask every epoch (overfit harness)
    bool verbose = true;
    std::string out_dir;         // checkpoints, loss.csv, manifest
};

struct TrainResult {
    double initial_loss = 0.0;        // mean loss of the first batch, pre-update
    std::vector<double> epoch_loss;   // per-epoch mean cross-entropy
    std::size_t samples = 0;
    std::size_t steps = 0;
    int64_t skipped_steps = 0;
    std::string final_checkpoint;
};

// Full training run: target selection, per-epoch shuffling and fresh masks,
// Adam updates, per-epoch checkpoints + loss curve, final checkpoint and a
// manifest describing the run. Throws on divergence (batch loss > 10x the
// initial loss) and on unusable inputs.
TrainResult train_model(const TrainConfig& tc);

template <typename T>
struct Net;

// Rebuilds a trained model from a checkpoint written by train_model: the
// architecture comes from the embedded config, weights from the payload.
// Returns the checkpoint's config json (model, target, seed).
nlohmann::json load_net(const std::string& ckpt_path, Net<float>& net);

} // namespace mimic::model
