// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ecctlin/channel.hpp"
#include "ecctlin/codes.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/rng.hpp"
#include "ecctlin/training.hpp"
#include "ecctlin/transformer.hpp"

using namespace ecctlin;

namespace {

struct Setup {
    ParityCheckMatrix H;
    GeneratorMatrix G;
    ModelConfig cfg;
};

Setup hamming_setup(std::uint64_t model_seed = 5) {
    ParityCheckMatrix H = hamming74();
    GeneratorMatrix G = derive_generator(H);
    ModelConfig cfg;
    cfg.n = H.cols();
    cfg.m = H.rows();
    cfg.hidden_dim = 16;
    cfg.heads = 4;
    cfg.blocks = 2;
    cfg.seed = model_seed;
    return {H, G, cfg};
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void dump(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    REQUIRE(os);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::vector<float>> snapshot(const Model<float>& model) {
    std::vector<std::vector<float>> out;
    for (const auto& [name, t] : model.parameters()) out.push_back(t.data());
    return out;
}

}  // namespace

TEST_CASE("cosine schedule endpoints and monotone decay") {
    const double lr0 = 5e-3, f = 0.01;
    CHECK(cosine_lr(0, 1000, lr0, f) == doctest::Approx(lr0).epsilon(1e-15));
    CHECK(cosine_lr(1000, 1000, lr0, f) == doctest::Approx(f * lr0).epsilon(1e-12));
    CHECK(cosine_lr(500, 1000, lr0, f) == doctest::Approx(f * lr0 + (1.0 - f) * lr0 * 0.5).epsilon(1e-12));
    CHECK(cosine_lr(1500, 1000, lr0, f) == f * lr0);  // clamped past the end
    double prev = cosine_lr(0, 200, lr0, f);
    for (int s = 1; s <= 200; ++s) {
        const double cur = cosine_lr(s, 200, lr0, f);
        CHECK(cur <= prev + 1e-18);
        prev = cur;
    }
    CHECK_THROWS_AS(cosine_lr(-1, 100, lr0, f), ParameterError);
    CHECK_THROWS_AS(cosine_lr(5, 0, lr0, f), ParameterError);
}

TEST_CASE("training configuration validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.iterations = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.lr_floor_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.ebno_low_db = 10.0;
    bad.ebno_high_db = 8.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.grad_clip = -1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("sampled batches are deterministic, shaped, and carry valid codewords") {
    Setup s = hamming_setup();
    ChannelConfig channel;

    Rng r1(99), r2(99);
    TrainingBatch a = sample_training_batch(s.G, s.H, channel, 4.0, 8.0, 16, r1);
    TrainingBatch b = sample_training_batch(s.G, s.H, channel, 4.0, 8.0, 16, r2);
    REQUIRE(a.inputs.shape() == Shape{16, 10});
    REQUIRE(a.targets.shape() == Shape{16, 7});
    CHECK(a.inputs.data() == b.inputs.data());
    CHECK(a.targets.data() == b.targets.data());

    for (int w = 0; w < 16; ++w) {
        std::vector<std::uint8_t> word(7);
        for (int j = 0; j < 7; ++j) {
            const float t = a.targets.data()[static_cast<std::size_t>(w) * 7 + j];
            CHECK((t == 0.0f || t == 1.0f));
            word[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(t);
        }
        const std::vector<std::uint8_t> syn = syndrome(s.H, word);
        for (std::uint8_t v : syn) CHECK(v == 0);
        // appended syndrome slots are binary and computed from the LLR hard decisions
        LlrVector llr;
        llr.values.resize(7);
        for (int j = 0; j < 7; ++j) llr.values[static_cast<std::size_t>(j)] = a.inputs.data()[static_cast<std::size_t>(w) * 10 + j];
        const std::vector<std::uint8_t> hard_syn = syndrome(s.H, hard_decision(llr));
        for (int c = 0; c < 3; ++c)
            CHECK(a.inputs.data()[static_cast<std::size_t>(w) * 10 + 7 + c] == static_cast<float>(hard_syn[static_cast<std::size_t>(c)]));
    }

    CHECK_THROWS_AS(sample_training_batch(s.G, s.H, channel, 4.0, 8.0, 0, r1), ParameterError);
    CHECK_THROWS_AS(sample_training_batch(s.G, s.H, channel, 9.0, 4.0, 4, r1), ParameterError);
}

TEST_CASE("at very high SNR the LLR hard decisions reproduce the targets") {
    Setup s = hamming_setup();
    ChannelConfig channel;
    Rng rng(7);
    TrainingBatch batch = sample_training_batch(s.G, s.H, channel, 30.0, 30.0, 512, rng);
    std::size_t agree = 0, total = 0;
    for (int w = 0; w < 512; ++w)
        for (int j = 0; j < 7; ++j) {
            const float llr = batch.inputs.data()[static_cast<std::size_t>(w) * 10 + j];
            const float tgt = batch.targets.data()[static_cast<std::size_t>(w) * 7 + j];
            agree += ((llr > 0.0f ? 0.0f : 1.0f) == tgt) ? 1 : 0;
            ++total;
        }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.999);
}

TEST_CASE("adam update follows the bias-corrected closed form on a single gradient") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    TrainConfig cfg;
    TrainState state;
    init_train_state(state, model);

    model.zero_grads();
    auto before = snapshot(model);
    Tensor<float> target = model.parameters()[0].second;  // embed.weight
    const float g = 0.37f;
    target.grad()[3] = g;
    const double lr = 1e-2;
    adam_update(model, state, cfg, lr);

    // t = 1: bias correction makes m_hat = g and v_hat = g^2 exactly
    const double want = before[0][3] - lr * g / (std::abs(static_cast<double>(g)) + cfg.adam_eps);
    CHECK(model.parameters()[0].second.data()[3] == doctest::Approx(want).epsilon(1e-6));
    // every other coordinate is untouched (zero gradient, zero moments)
    auto after = snapshot(model);
    for (std::size_t p = 0; p < before.size(); ++p)
        for (std::size_t i = 0; i < before[p].size(); ++i)
            if (p != 0 || i != 3) CHECK(after[p][i] == before[p][i]);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    TrainConfig cfg;
    TrainState state;
    init_train_state(state, model);
    model.zero_grads();
    for (auto& [name, t] : model.parameters())
        for (float& gv : t.grad()) gv = 0.25f;
    auto before = snapshot(model);
    adam_update(model, state, cfg, 0.0);
    CHECK(snapshot(model) == before);
}

TEST_CASE("gradient clipping rescales only above the threshold") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    model.zero_grads();
    std::size_t total = 0;
    for (auto& [name, t] : model.parameters()) total += t.numel();
    const float fill = 0.01f;
    for (auto& [name, t] : model.parameters())
        for (float& gv : t.grad()) gv = fill;
    const double norm = std::sqrt(static_cast<double>(total)) * fill;

    clip_gradients(model, norm * 2.0);  // below threshold: untouched
    CHECK(model.parameters()[0].second.grad()[0] == fill);
    CHECK(global_grad_norm(model) == doctest::Approx(norm).epsilon(1e-6));

    clip_gradients(model, norm / 4.0);
    CHECK(global_grad_norm(model) == doctest::Approx(norm / 4.0).epsilon(1e-5));
}

TEST_CASE("training loss decreases and the model fits noiseless data exactly") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    TrainConfig cfg;
    cfg.iterations = 200;
    cfg.batch_size = 32;
    cfg.ebno_low_db = 30.0;  // effectively noiseless: the map to learn is copy-through
    cfg.ebno_high_db = 30.0;
    cfg.seed = 11;
    Rng rng(cfg.seed);
    ChannelConfig channel;

    TrainState state;
    init_train_state(state, model);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < cfg.iterations; ++i) {
        TrainingBatch batch =
            sample_training_batch(s.G, s.H, channel, cfg.ebno_low_db, cfg.ebno_high_db, cfg.batch_size, rng);
        const double loss = train_step(model, batch, state, cfg);
        if (i < 10) first += loss;
        if (i >= cfg.iterations - 10) last += loss;
    }
    CHECK(last < first / 10.0);
    CHECK(state.last_ber == 0.0);
    CHECK(state.step == cfg.iterations);
}

TEST_CASE("train_model writes a csv log with one row per step") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.batch_size = 8;
    Rng rng(3);
    const std::string log_path = "train_log_test.csv";
    TrainState state = train_model(model, s.G, s.H, cfg, rng, log_path);
    CHECK(state.step == 5);

    std::ifstream is(log_path);
    REQUIRE(is);
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "step,lr,loss,train_ber");
    int rows = 0;
    int first_step = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (rows == 0) first_step = std::stoi(line.substr(0, line.find(',')));
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(first_step == 1);

    // continuing from a resume state appends instead of rewriting
    cfg.iterations = 8;
    train_model(model, s.G, s.H, cfg, rng, log_path, &state);
    std::ifstream is2(log_path);
    int headers = 0, data_rows = 0;
    while (std::getline(is2, line)) {
        if (line == "step,lr,loss,train_ber") ++headers;
        else if (!line.empty()) ++data_rows;
    }
    CHECK(headers == 1);
    CHECK(data_rows == 8);
    std::remove(log_path.c_str());
}

TEST_CASE("a non-finite parameter turns into a diagnosed training failure") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    model.parameters()[0].second.data()[0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    TrainState state;
    ChannelConfig channel;
    Rng rng(1);
    TrainingBatch batch = sample_training_batch(s.G, s.H, channel, 8.0, 15.0, 4, rng);
    CHECK_THROWS_AS(train_step(model, batch, state, cfg), NumericalError);
}

TEST_CASE("checkpoint round trip preserves the model bit for bit") {
    Setup s = hamming_setup(21);
    Model<float> model(s.cfg, s.H);
    // perturb away from the seeded init so the blocks are non-trivial
    TrainConfig cfg;
    cfg.iterations = 3;
    cfg.batch_size = 8;
    Rng rng(2);
    train_model(model, s.G, s.H, cfg, rng);

    const std::string path = "ckpt_roundtrip_test.bin";
    save_checkpoint(path, model, s.H);
    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.config.hidden_dim == s.cfg.hidden_dim);
    CHECK(loaded.config.n == 7);
    CHECK(loaded.H.bits() == s.H.bits());
    CHECK_FALSE(loaded.state.has_value());
    CHECK_FALSE(loaded.rng.has_value());

    REQUIRE(loaded.model.parameters().size() == model.parameters().size());
    for (std::size_t p = 0; p < model.parameters().size(); ++p)
        CHECK(loaded.model.parameters()[p].second.data() == model.parameters()[p].second.data());

    Rng ir(9);
    std::vector<float> xin(10);
    for (float& v : xin) v = static_cast<float>(ir.uniform(-5.0, 5.0));
    Tensor<float> x = Tensor<float>::from_data({1, 10}, std::move(xin));
    CHECK(loaded.model.forward(x).data() == model.forward(x).data());
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    Setup s = hamming_setup();
    Model<float> model(s.cfg, s.H);
    const std::string path = "ckpt_corrupt_test.bin";
    save_checkpoint(path, model, s.H);
    const std::string good = slurp(path);

    SUBCASE("unknown version tag") {
        std::string bad = good;
        bad.replace(bad.find("ecctlin-v1"), 10, "ecctlin-v9");
        dump(path, bad);
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SUBCASE("truncated file") {
        dump(path, good.substr(0, good.size() / 2));
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), IoError); }
    std::remove(path.c_str());
}

TEST_CASE("interrupted training resumed from a checkpoint matches an uninterrupted run") {
    Setup s = hamming_setup(33);
    TrainConfig cfg;
    cfg.iterations = 10;
    cfg.batch_size = 16;
    cfg.seed = 77;
    ChannelConfig channel;

    // uninterrupted reference
    Model<float> ref(s.cfg, s.H);
    Rng ref_rng(cfg.seed);
    train_model(ref, s.G, s.H, cfg, ref_rng);

    // first half by hand (same schedule), checkpoint, reload, finish
    Model<float> half(s.cfg, s.H);
    Rng rng(cfg.seed);
    TrainState state;
    init_train_state(state, half);
    for (int i = 0; i < 5; ++i) {
        TrainingBatch batch =
            sample_training_batch(s.G, s.H, channel, cfg.ebno_low_db, cfg.ebno_high_db, cfg.batch_size, rng);
        train_step(half, batch, state, cfg);
    }
    const std::string path = "ckpt_resume_test.bin";
    save_checkpoint(path, half, s.H, &state, &rng);

    LoadedCheckpoint loaded = load_checkpoint(path);
    REQUIRE(loaded.state.has_value());
    REQUIRE(loaded.rng.has_value());
    CHECK(loaded.state->step == 5);
    Rng resumed_rng = *loaded.rng;
    train_model(loaded.model, s.G, s.H, cfg, resumed_rng, "", &*loaded.state);
    CHECK(loaded.state->step == 10);

    for (std::size_t p = 0; p < ref.parameters().size(); ++p)
        CHECK(loaded.model.parameters()[p].second.data() == ref.parameters()[p].second.data());
    std::remove(path.c_str());
}
