#include "mimic/model/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mimic/codec/vocab.hpp"
#include "mimic/model/net.hpp"
#include "mimic/ssm/adam.hpp"
#include "mimic/ssm/checkpoint.hpp"
#include "mimic/util/hash.hpp"

namespace mimic::model {

namespace {

std::string epoch_ckpt_name(std::size_t e) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%02zu.ckpt", e);
    return buf;
}

} // namespace

TrainResult train_model(const TrainConfig& tc) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    const codec::Dataset ds = codec::Dataset::load(tc.data_dir);
    if (static_cast<std::size_t>(ds.book_width()) != tc.model.book_features)
        throw std::runtime_error("dataset book width " + std::to_string(ds.book_width()) +
                                 " != configured " + std::to_string(tc.model.book_features));
    if (ds.vocab_hash() != codec::vocab::table_hash())
        throw std::runtime_error("dataset vocabulary differs from this build");

    const std::size_t lm = tc.model.context_messages;
    std::vector<uint32_t> targets =
        list_targets(ds, tc.target, lm, tc.day_begin, tc.day_end);
    targets = subsample_evenly(targets, tc.max_samples);
    if (targets.empty()) throw std::runtime_error("no qualifying target actions");

    // materialize once; masking works on a per-use copy
    std::vector<Sample> pristine(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        materialize_sample(ds, targets[i], lm, tc.target, pristine[i]);

    Net<float> net;
    net.init(tc.model, tc.seed);
    auto params = net.params();
    ssm::Adam<float> opt;
    opt.lr = tc.lr;
    opt.attach(params);

    if (!tc.out_dir.empty()) std::filesystem::create_directories(tc.out_dir);
    std::ofstream loss_csv;
    if (!tc.out_dir.empty()) {
        loss_csv.open(tc.out_dir + "/loss.csv", std::ios::binary);
        loss_csv << "epoch,mean_loss\n";
    }

    ssm::CheckpointMeta meta;
    meta.config = {{"model", tc.model.to_json()},
                   {"target_kind", tc.target.kind == TargetSpec::Group ? "group" : "agent"},
                   {"target_id", tc.target.id},
                   {"seed", tc.seed}};
    meta.vocab_hash = util::hex64(codec::vocab::table_hash());

    NetWork<float> work;
    std::vector<double> probs;
    std::vector<float> g_logits(tc.model.vocab);
    Sample s;

    TrainResult res;
    res.samples = targets.size();

    const std::size_t nb = tc.batch;
    bool have_initial = false;
    std::size_t steps = 0;
    bool step_cap_hit = false;

    for (std::size_t epoch = 0; epoch < tc.epochs && !step_cap_hit; ++epoch) {
        opt.lr = tc.lr * std::pow(tc.lr_decay, static_cast<double>(epoch));
        std::vector<std::size_t> order(targets.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        util::Rng shuffle_rng(util::derive_seed(tc.seed, 3, epoch));
        shuffle_rng.shuffle(order);

        double epoch_sum = 0.0;
        std::size_t epoch_n = 0;
        for (std::size_t off = 0; off < order.size() && !step_cap_hit; off += nb) {
            const std::size_t bsz = std::min(nb, order.size() - off);
            net.zero_grads();
            double batch_sum = 0.0;
            for (std::size_t b = 0; b < bsz; ++b) {
                const std::size_t si = order[off + b];
                s = pristine[si]; // copy; mask mutates tokens
                // fresh mask per sample per epoch, independent of batch order
                util::Rng mask_rng(util::derive_seed(
                    tc.seed, tc.fixed_masks ? 0 : epoch + 1, pristine[si].target_index));
                mask_sample(s, lm, mask_rng);

                util::Rng drop_rng(util::derive_seed(tc.seed, 7919 + epoch, s.target_index));
                net_forward(net, s.tokens.data(), s.books, lm, work, tc.parallel_scan,
                            tc.model.dropout > 0.0 ? &drop_rng : nullptr);
                const double loss = softmax_ce(work.logits, s.label, probs, g_logits.data());
                batch_sum += loss;
                const float inv = 1.0f / static_cast<float>(bsz);
                for (auto& g : g_logits) g *= inv;
                net_backward(net, s.tokens.data(), s.books, lm, g_logits.data(), work,
                             tc.parallel_scan);
            }
            const double batch_loss = batch_sum / static_cast<double>(bsz);
            if (!have_initial) {
                res.initial_loss = batch_loss;
                have_initial = true;
            }
            if (!(batch_loss <= 10.0 * std::max(res.initial_loss, 1e-3)))
                throw std::runtime_error(
                    "training diverged: epoch " + std::to_string(epoch) + ", step " +
                    std::to_string(steps) + ", batch loss " + std::to_string(batch_loss) +
                    " vs initial " + std::to_string(res.initial_loss));
            opt.step(params);
            ++steps;
            epoch_sum += batch_sum;
            epoch_n += bsz;
            if (tc.max_steps > 0 && steps >= tc.max_steps) step_cap_hit = true;
        }

        const double mean = epoch_sum / static_cast<double>(epoch_n);
        res.epoch_loss.push_back(mean);
        if (loss_csv.is_open()) {
            loss_csv << epoch << "," << mean << "\n";
            loss_csv.flush();
        }
        if (tc.verbose) {
            const double dt = std::chrono::duration<double>(clock::now() - t0).count();
            std::printf("epoch %zu  mean_loss %.4f  lr %.2e  %zu steps  %.1fs\n", epoch,
                        mean, opt.lr, steps, dt);
            std::fflush(stdout);
        }
        if (!tc.out_dir.empty()) {
            meta.trained_epochs = static_cast<int>(epoch + 1);
            ssm::save_checkpoint(tc.out_dir + "/" + epoch_ckpt_name(epoch), params, meta);
        }
    }

    res.steps = steps;
    res.skipped_steps = opt.skipped();
    if (!tc.out_dir.empty()) {
        res.final_checkpoint = tc.out_dir + "/final.ckpt";
        ssm::save_checkpoint(res.final_checkpoint, params, meta);
        nlohmann::json manifest = {
            {"data_dir", tc.data_dir},
            {"model", tc.model.to_json()},
            {"target_kind", tc.target.kind == TargetSpec::Group ? "group" : "agent"},
            {"target_id", tc.target.id},
            {"days", {tc.day_begin, tc.day_end}},
            {"epochs", tc.epochs},
            {"batch", tc.batch},
            {"lr", tc.lr},
            {"lr_decay", tc.lr_decay},
            {"seed", tc.seed},
            {"samples", res.samples},
            {"steps", res.steps},
            {"skipped_steps", res.skipped_steps},
            {"initial_loss", res.initial_loss},
            {"final_loss", res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back()},
            {"vocab_hash", meta.vocab_hash},
            {"param_count", net.param_count()}};
        std::ofstream mf(tc.out_dir + "/train_manifest.json", std::ios::binary);
        mf << manifest.dump(2) << '\n';
    }
    return res;
}

nlohmann::json load_net(const std::string& ckpt_path, Net<float>& net) {
    const auto manifest = ssm::read_checkpoint_manifest(ckpt_path);
    const auto cfgj = manifest.at("config");
    net.init(ModelConfig::from_json(cfgj.at("model")), 0);
    auto params = net.params();
    const auto meta = ssm::load_checkpoint(ckpt_path, params);
    if (meta.vocab_hash != util::hex64(codec::vocab::table_hash()))
        throw std::runtime_error("checkpoint vocabulary differs from this build");
    return cfgj;
}

} // namespace mimic::model
