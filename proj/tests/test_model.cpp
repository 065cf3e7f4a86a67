#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mimic/codec/dataset.hpp"
#include "mimic/codec/vocab.hpp"
#include "mimic/model/net.hpp"
#include "mimic/model/sample.hpp"
#include "mimic/model/trainer.hpp"
#include "mimic/ssm/adam.hpp"
#include "mimic/util/hash.hpp"
#include "mimic/util/rng.hpp"

using namespace mimic;
using codec::pos::TOKENS_PER_MESSAGE;

namespace {

double rel_err(double got, double want, double floor_ = 1e-6) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor_});
}

// Tiny architecture used by the gradient and overfit tests.
model::ModelConfig tiny_config(std::size_t lm = 2) {
    model::ModelConfig c;
    c.width = 4;
    c.state_dim = 6;
    c.branch_blocks = 2;
    c.post_blocks = 2;
    c.context_messages = lm;
    return c;
}

// Random but block-valid tokens for one message.
void random_message_tokens(uint16_t* t, util::Rng& rng) {
    using namespace codec;
    t[pos::TYPE] = vocab::TYPE_BASE + static_cast<uint16_t>(rng.uniform_int(3));
    t[pos::DIRECTION] = vocab::DIR_BASE + static_cast<uint16_t>(rng.uniform_int(2));
    t[pos::PRICE_SIGN] = vocab::SIGN_BASE + static_cast<uint16_t>(rng.uniform_int(2));
    t[pos::PRICE_MAG] = vocab::PRICE_MAG_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    t[pos::SIZE] = vocab::SIZE_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    for (int i = pos::DT_S; i <= pos::T_NS + 2; ++i)
        t[i] = vocab::DIGIT_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    t[pos::REF_PRICE_SIGN] = vocab::SIGN_BASE + static_cast<uint16_t>(rng.uniform_int(2));
    t[pos::REF_PRICE_MAG] = vocab::PRICE_MAG_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    t[pos::REF_SIZE] = vocab::SIZE_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    for (int i = pos::REF_T_S; i <= pos::REF_T_NS + 2; ++i)
        t[i] = vocab::DIGIT_BASE + static_cast<uint16_t>(rng.uniform_int(1000));
    t[pos::TARGET] = vocab::TARGET_OTHER;
}

// Writes a loadable synthetic dataset: `days` days of `per_day` messages,
// group id cycling 0..14, M=2 book depth.
std::string write_synthetic_dataset(const std::string& dir, int days, int per_day,
                                    uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int M = 2;
    util::Rng rng(seed);
    const int64_t n = static_cast<int64_t>(days) * per_day;

    std::vector<uint16_t> tokens(n * TOKENS_PER_MESSAGE);
    std::vector<int16_t> books(n * (2 * M + 1));
    std::vector<codec::DatasetMeta> meta(n);
    nlohmann::json day_list = nlohmann::json::array();
    int64_t idx = 0;
    for (int d = 0; d < days; ++d) {
        day_list.push_back({{"day", d}, {"begin", idx}, {"end", idx + per_day}});
        for (int m = 0; m < per_day; ++m, ++idx) {
            random_message_tokens(tokens.data() + idx * TOKENS_PER_MESSAGE, rng);
            for (int f = 0; f < 2 * M + 1; ++f)
                books[idx * (2 * M + 1) + f] =
                    static_cast<int16_t>(rng.uniform_int(1999)) - 999;
            auto& mm = meta[idx];
            mm.agent_id = static_cast<int32_t>(idx % 15);
            mm.group_id = static_cast<uint16_t>(idx % 15);
            mm.day = static_cast<uint16_t>(d);
            mm.mid2 = 40000 + (idx % 7);
            mm.best_bid = 19999;
            mm.best_ask = 20001;
        }
    }
    nlohmann::json manifest = {{"book_depth", M},
                               {"messages", n},
                               {"tokens_per_message", TOKENS_PER_MESSAGE},
                               {"vocab_hash", util::hex64(codec::vocab::table_hash())},
                               {"days", day_list}};
    std::ofstream(dir + "/manifest.json") << manifest.dump(2);
    std::ofstream(dir + "/tokens.bin", std::ios::binary)
        .write(reinterpret_cast<const char*>(tokens.data()),
               static_cast<std::streamsize>(tokens.size() * sizeof(uint16_t)));
    std::ofstream(dir + "/books.bin", std::ios::binary)
        .write(reinterpret_cast<const char*>(books.data()),
               static_cast<std::streamsize>(books.size() * sizeof(int16_t)));
    std::ofstream(dir + "/meta.bin", std::ios::binary)
        .write(reinterpret_cast<const char*>(meta.data()),
               static_cast<std::streamsize>(meta.size() * sizeof(codec::DatasetMeta)));
    return dir;
}

} // namespace

TEST_CASE("parameter counts follow the closed-form config arithmetic") {
    const auto desk = model::ModelConfig::desk_scale();
    CHECK(desk.param_count() == 865860);
    const auto paper = model::ModelConfig::paper_scale();
    CHECK(paper.param_count() == 5052100);
    // within +-20% of 6e6
    CHECK(paper.param_count() >= 4800000);
    CHECK(paper.param_count() <= 7200000);

    model::Net<float> net;
    net.init(desk, 1);
    CHECK(net.param_count() == desk.param_count());
    model::Net<float> netp;
    netp.init(paper, 1);
    CHECK(netp.param_count() == paper.param_count());
}

TEST_CASE("zero-initialized head gives uniform logits and ln-V loss") {
    const auto cfg = tiny_config();
    model::Net<float> net;
    net.init(cfg, 7);
    util::Rng rng(3);
    std::vector<uint16_t> tokens(cfg.context_messages * TOKENS_PER_MESSAGE);
    for (std::size_t m = 0; m < cfg.context_messages; ++m)
        random_message_tokens(tokens.data() + m * TOKENS_PER_MESSAGE, rng);
    std::vector<int16_t> books(cfg.context_messages * cfg.book_features);
    for (auto& b : books) b = static_cast<int16_t>(rng.uniform_int(1999)) - 999;

    model::NetWork<float> w;
    net_forward(net, tokens.data(), books.data(), cfg.context_messages, w, false);
    for (float l : w.logits) CHECK(l == 0.0f);
    std::vector<double> probs;
    const double loss = model::softmax_ce(w.logits, 17, probs);
    CHECK(loss == doctest::Approx(std::log(3012.0)).epsilon(1e-9));
}

TEST_CASE("hidden positions carry no information into the logits") {
    const auto cfg = tiny_config(3);
    model::Net<float> net;
    net.init(cfg, 11);
    util::Rng rng(5);
    const std::size_t lm = cfg.context_messages;
    model::Sample a;
    a.tokens.resize(lm * TOKENS_PER_MESSAGE);
    for (std::size_t m = 0; m < lm; ++m)
        random_message_tokens(a.tokens.data() + m * TOKENS_PER_MESSAGE, rng);
    std::vector<int16_t> books(lm * cfg.book_features);
    for (auto& b : books) b = static_cast<int16_t>(rng.uniform_int(1999)) - 999;
    a.books = books.data();

    model::Sample b = a;
    b.books = books.data();
    // scribble different pre-hiding contents into everything after TYPE
    for (std::size_t q = (lm - 1) * TOKENS_PER_MESSAGE + 1; q < lm * TOKENS_PER_MESSAGE; ++q)
        b.tokens[q] = static_cast<uint16_t>(rng.uniform_int(3012));

    model::mask_sample_at(a, lm, codec::pos::TYPE);
    model::mask_sample_at(b, lm, codec::pos::TYPE);
    CHECK(a.tokens == b.tokens); // replacement guarantees equality...

    model::NetWork<float> wa, wb;
    net_forward(net, a.tokens.data(), a.books, lm, wa, false);
    net_forward(net, b.tokens.data(), b.books, lm, wb, false);
    for (std::size_t i = 0; i < wa.logits.size(); ++i)
        CHECK(wa.logits[i] == wb.logits[i]); // ...and the logits are bit-identical
}

TEST_CASE("masking is uniform over the 8 maskable positions across 1e6 draws") {
    const std::size_t lm = 2;
    util::Rng rng(1234);
    model::Sample proto;
    proto.tokens.resize(lm * TOKENS_PER_MESSAGE);
    util::Rng trng(8);
    for (std::size_t m = 0; m < lm; ++m)
        random_message_tokens(proto.tokens.data() + m * TOKENS_PER_MESSAGE, trng);

    std::vector<int64_t> hits(TOKENS_PER_MESSAGE, 0);
    const int64_t N = 1000000;
    model::Sample s;
    for (int64_t i = 0; i < N; ++i) {
        s = proto;
        model::mask_sample(s, lm, rng);
        const std::size_t last = (lm - 1) * TOKENS_PER_MESSAGE;
        REQUIRE(s.mask_pos >= last);
        const int mp = static_cast<int>(s.mask_pos - last);
        ++hits[static_cast<std::size_t>(mp)];
        // the label records the pre-mask token and the mask token is placed
        if (i < 1000) {
            CHECK(s.label == proto.tokens[s.mask_pos]);
            CHECK(s.tokens[s.mask_pos] == codec::vocab::MASK);
            for (std::size_t q = s.mask_pos + 1; q < s.tokens.size(); ++q)
                CHECK(s.tokens[q] == codec::vocab::PAD_HIDDEN);
        }
    }
    // never on time, reference-time, or target positions
    for (int p = codec::pos::DT_S; p <= codec::pos::T_NS + 2; ++p) CHECK(hits[p] == 0);
    for (int p = codec::pos::REF_T_S; p <= codec::pos::REF_T_NS + 2; ++p) CHECK(hits[p] == 0);
    CHECK(hits[codec::pos::TARGET] == 0);
    // uniform over the 8 maskable ones: 3 sigma of N/8
    const double mean = N / 8.0;
    const double sigma = std::sqrt(N * (1.0 / 8.0) * (7.0 / 8.0));
    for (int p : codec::pos::MASKABLE) {
        CHECK(std::abs(hits[p] - mean) < 3.0 * sigma);
    }
}

TEST_CASE("sample listing, stamping, and subsampling follow the contract") {
    const std::string dir = "synth_ds_test";
    write_synthetic_dataset(dir, 2, 40, 99);
    const auto ds = codec::Dataset::load(dir);
    const std::size_t lm = 5;
    const model::TargetSpec grp{model::TargetSpec::Group, 14};

    const auto targets = model::list_targets(ds, grp, lm, 0, 2);
    REQUIRE(!targets.empty());
    // group 14 appears at indices 14, 29, 44, 59, 74 (day 0: 0..39) and
    // 94, 109, 124, 139 (day 1: 40..79, needs index >= 44)
    for (const uint32_t t : targets) {
        CHECK(ds.meta(t).group_id == 14);
        const auto& day = ds.meta(t).day;
        const int64_t day_begin = day == 0 ? 0 : 40;
        CHECK(static_cast<int64_t>(t) - static_cast<int64_t>(lm) + 1 >= day_begin);
    }
    // group 14 sits at global indices 14,29 (day 0) and 44,59,74 (day 1);
    // all have at least lm-1=4 same-day predecessors
    CHECK(targets.size() == 5);

    model::Sample s;
    model::materialize_sample(ds, targets[0], lm, grp, s);
    REQUIRE(s.tokens.size() == lm * TOKENS_PER_MESSAGE);
    CHECK(s.target_index == targets[0]);
    CHECK(s.books == ds.book(targets[0] - lm + 1));
    // only messages from the imitated group are stamped SELF
    for (std::size_t m = 0; m < lm; ++m) {
        const uint32_t src = targets[0] - static_cast<uint32_t>(lm) + 1 + static_cast<uint32_t>(m);
        const uint16_t want = ds.meta(src).group_id == 14 ? codec::vocab::TARGET_SELF
                                                          : codec::vocab::TARGET_OTHER;
        CHECK(s.tokens[m * TOKENS_PER_MESSAGE + codec::pos::TARGET] == want);
    }
    CHECK(s.tokens.back() == codec::vocab::TARGET_SELF);
}

TEST_CASE("even subsampling is deterministic and ordered") {
    std::vector<uint32_t> in;
    for (uint32_t i = 0; i < 103; ++i) in.push_back(i * 3);
    const auto all = model::subsample_evenly(in, 200);
    CHECK(all.size() == in.size());
    const auto some = model::subsample_evenly(in, 10);
    REQUIRE(some.size() == 10);
    for (std::size_t i = 1; i < some.size(); ++i) CHECK(some[i] > some[i - 1]);
    CHECK(some.front() == in.front());
    const auto again = model::subsample_evenly(in, 10);
    CHECK(some == again);
}

TEST_CASE("full-model gradients match finite differences on sampled coordinates") {
    const auto cfg = tiny_config(2);
    model::Net<double> net;
    net.init(cfg, 42);
    const std::size_t lm = cfg.context_messages;

    util::Rng rng(13);
    std::vector<uint16_t> tokens(lm * TOKENS_PER_MESSAGE);
    for (std::size_t m = 0; m < lm; ++m)
        random_message_tokens(tokens.data() + m * TOKENS_PER_MESSAGE, rng);
    // mask a position so the sample looks like training input
    tokens[(lm - 1) * TOKENS_PER_MESSAGE + codec::pos::SIZE] = codec::vocab::MASK;
    for (std::size_t q = (lm - 1) * TOKENS_PER_MESSAGE + codec::pos::SIZE + 1;
         q < lm * TOKENS_PER_MESSAGE; ++q)
        tokens[q] = codec::vocab::PAD_HIDDEN;
    std::vector<int16_t> books(lm * cfg.book_features);
    for (auto& b : books) b = static_cast<int16_t>(rng.uniform_int(1999)) - 999;
    const uint16_t label = codec::vocab::SIZE_BASE + 7;

    model::NetWork<double> w;
    std::vector<double> probs;
    std::vector<double> g_logits(cfg.vocab);
    auto loss = [&]() {
        net_forward(net, tokens.data(), books.data(), lm, w, false);
        return model::softmax_ce(w.logits, label, probs);
    };
    net_forward(net, tokens.data(), books.data(), lm, w, false);
    model::softmax_ce(w.logits, label, probs, g_logits.data());
    net.zero_grads();
    net_backward(net, tokens.data(), books.data(), lm, g_logits.data(), w, false);

    const double h = 1e-5;
    double worst = 0.0;
    for (auto& pr : net.params()) {
        const std::size_t n = pr.p->size();
        const std::size_t probes = std::min<std::size_t>(6, n);
        for (std::size_t k = 0; k < probes; ++k) {
            const std::size_t j = k * n / probes;
            const double keep = pr.p->w[j];
            pr.p->w[j] = keep + h;
            const double fp = loss();
            pr.p->w[j] = keep - h;
            const double fm = loss();
            pr.p->w[j] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double e = rel_err(pr.p->g[j], fd, 1e-4);
            if (e > worst) worst = e;
        }
    }
    INFO("worst sampled-coordinate rel err: " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("a tiny model overfits four fixed masked samples") {
    model::ModelConfig cfg = tiny_config(2);
    cfg.width = 8;
    cfg.state_dim = 8;
    model::Net<float> net;
    net.init(cfg, 100);
    const std::size_t lm = cfg.context_messages;

    util::Rng rng(21);
    struct Fixed {
        std::vector<uint16_t> tokens;
        std::vector<int16_t> books;
        uint16_t label;
    };
    std::vector<Fixed> data(4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& f = data[i];
        f.tokens.resize(lm * TOKENS_PER_MESSAGE);
        for (std::size_t m = 0; m < lm; ++m)
            random_message_tokens(f.tokens.data() + m * TOKENS_PER_MESSAGE, rng);
        f.books.resize(lm * cfg.book_features);
        for (auto& b : f.books) b = static_cast<int16_t>(rng.uniform_int(1999)) - 999;
        // distinct size label, masked at the size position
        const uint16_t size_tok = codec::vocab::SIZE_BASE + static_cast<uint16_t>(10 + i);
        f.tokens[(lm - 1) * TOKENS_PER_MESSAGE + codec::pos::SIZE] = size_tok;
        model::Sample s;
        s.tokens = f.tokens;
        model::mask_sample_at(s, lm, codec::pos::SIZE);
        f.tokens = s.tokens;
        f.label = s.label;
        CHECK(f.label == size_tok);
    }

    auto params = net.params();
    ssm::Adam<float> opt;
    opt.lr = 3e-3;
    opt.attach(params);
    model::NetWork<float> w;
    std::vector<double> probs;
    std::vector<float> g_logits(cfg.vocab);

    double mean_loss = 1e9;
    int steps = 0;
    for (; steps < 400 && mean_loss > 0.045; ++steps) {
        net.zero_grads();
        double sum = 0.0;
        for (const auto& f : data) {
            net_forward(net, f.tokens.data(), f.books.data(), lm, w, false);
            sum += model::softmax_ce(w.logits, f.label, probs, g_logits.data());
            for (auto& g : g_logits) g *= 1.0f / data.size();
            net_backward(net, f.tokens.data(), f.books.data(), lm, g_logits.data(), w, false);
        }
        opt.step(params);
        mean_loss = sum / data.size();
    }
    INFO("steps used: " << steps << ", final loss " << mean_loss);
    CHECK(mean_loss < 0.05);

    // a trained model actually reads the book branch
    const auto& f = data[0];
    net_forward(net, f.tokens.data(), f.books.data(), lm, w, false);
    std::vector<float> with_books = w.logits;
    std::vector<int16_t> zeros(f.books.size(), 0);
    net_forward(net, f.tokens.data(), zeros.data(), lm, w, false);
    double diff = 0.0;
    for (std::size_t i = 0; i < with_books.size(); ++i)
        diff = std::max(diff, std::abs(static_cast<double>(with_books[i] - w.logits[i])));
    CHECK(diff > 1e-4);
}

TEST_CASE("trainer end-to-end on a synthetic dataset is deterministic") {
    const std::string dir = "synth_ds_train";
    write_synthetic_dataset(dir, 2, 60, 7);

    model::TrainConfig tc;
    tc.model = tiny_config(3);
    tc.data_dir = dir;
    tc.model.book_features = 5; // M=2 synthetic dataset
    tc.target = {model::TargetSpec::Group, 14};
    tc.day_begin = 0;
    tc.day_end = 2;
    tc.epochs = 2;
    tc.batch = 3;
    tc.lr = 1e-3;
    tc.max_samples = 6;
    tc.seed = 77;
    tc.verbose = false;
    tc.out_dir = "synth_run_a";
    const auto ra = model::train_model(tc);
    CHECK(ra.samples == 6);
    CHECK(ra.epoch_loss.size() == 2);
    CHECK(ra.initial_loss == doctest::Approx(std::log(3012.0)).epsilon(1e-6));
    CHECK(std::filesystem::exists("synth_run_a/loss.csv"));
    CHECK(std::filesystem::exists("synth_run_a/epoch_00.ckpt"));
    CHECK(std::filesystem::exists("synth_run_a/epoch_01.ckpt"));
    CHECK(std::filesystem::exists("synth_run_a/train_manifest.json"));

    tc.out_dir = "synth_run_b";
    const auto rb = model::train_model(tc);
    CHECK(ra.epoch_loss == rb.epoch_loss);
    // byte-identical final checkpoints
    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    CHECK(slurp("synth_run_a/final.ckpt") == slurp("synth_run_b/final.ckpt"));

    // reload reproduces the trained weights
    model::Net<float> loaded;
    const auto cfgj = model::load_net(ra.final_checkpoint, loaded);
    CHECK(cfgj.at("target_id").get<int>() == 14);
    CHECK(loaded.cfg.width == tc.model.width);

    const auto ds = codec::Dataset::load(dir);
    const auto targets = model::list_targets(ds, tc.target, 3, 0, 2);
    REQUIRE(!targets.empty());
    model::Sample s;
    model::materialize_sample(ds, targets[0], 3, tc.target, s);
    model::mask_sample_at(s, 3, codec::pos::TYPE);
    model::NetWork<float> w;
    net_forward(loaded, s.tokens.data(), s.books, 3, w, false);
    std::vector<double> probs;
    const double loss = model::softmax_ce(w.logits, s.label, probs);
    CHECK(std::isfinite(loss));

    std::filesystem::remove_all(dir);
    std::filesystem::remove_all("synth_run_a");
    std::filesystem::remove_all("synth_run_b");
    std::filesystem::remove_all("synth_ds_test");
}
