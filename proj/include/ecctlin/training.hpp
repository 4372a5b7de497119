// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training loop: channel-synthesized batches, BCE objective, Adam with
// cosine learning-rate decay, gradient clipping, and checkpointing.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecctlin/channel.hpp"
#include "ecctlin/codes.hpp"
#include "ecctlin/rng.hpp"
#include "ecctlin/transformer.hpp"

namespace ecctlin {

struct TrainConfig {
    int iterations = 1000;
    // Large batches matter at high Eb/N0: bit errors are rare there, and the
    // per-step error exposure is what drives learning.
    int batch_size = 512;
    double learning_rate = 5e-3;
    double lr_floor_fraction = 0.01;  // cosine decays to this fraction of lr
    double ebno_low_db = 8.0;
    double ebno_high_db = 15.0;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;  // global-norm threshold; 0 disables

    void validate() const;
};

struct TrainState {
    int step = 0;
    std::vector<std::vector<float>> first_moment;   // per parameter
    std::vector<std::vector<float>> second_moment;  // per parameter
    double current_lr = 0.0;
    double last_loss = 0.0;
    double last_ber = 0.0;
};

// lr = f*lr0 + (1-f)*lr0*(1+cos(pi*step/total))/2, clamped to the floor past
// the final step.
double cosine_lr(int step, int total, double lr0, double floor_fraction);

struct TrainingBatch {
    Tensor<float> inputs;   // (B, n+m)
    Tensor<float> targets;  // (B, n) codeword bits as 0/1
};

// Random information words through encode -> modulate -> AWGN at a per-sample
// Eb/N0 drawn uniformly from [low, high] -> demap -> decoder input.
TrainingBatch sample_training_batch(const GeneratorMatrix& G, const ParityCheckMatrix& H,
                                    const ChannelConfig& channel, double ebno_low_db, double ebno_high_db,
                                    int batch, Rng& rng);

void init_train_state(TrainState& state, const Model<float>& model);
double global_grad_norm(Model<float>& model);
// Scales all gradients by max_norm/norm when the global norm exceeds it.
void clip_gradients(Model<float>& model, double max_norm);
// One bias-corrected Adam step at the given learning rate (moments advance).
void adam_update(Model<float>& model, TrainState& state, const TrainConfig& cfg, double lr);

// forward -> BCE -> backward -> clip -> Adam; returns the loss and updates
// step/lr/loss/BER bookkeeping. Throws on a non-finite loss.
double train_step(Model<float>& model, const TrainingBatch& batch, TrainState& state, const TrainConfig& cfg);

// Full loop from state.step to cfg.iterations, drawing batches from `rng`.
// Appends "step,lr,loss,train_ber" CSV rows to log_path when nonempty.
TrainState train_model(Model<float>& model, const GeneratorMatrix& G, const ParityCheckMatrix& H,
                       const TrainConfig& cfg, Rng& rng, const std::string& log_path = "",
                       TrainState* resume = nullptr);

// ---- checkpointing -----------------------------------------------------------

// Self-describing container: "ecctlin-v1" tag, config header, the
// parity-check matrix (alist text), named float32 little-endian parameter
// blocks, and optionally the optimizer moments plus RNG state for resuming.
void save_checkpoint(const std::string& path, const Model<float>& model, const ParityCheckMatrix& H,
                     const TrainState* state = nullptr, const Rng* rng = nullptr);

struct LoadedCheckpoint {
    ModelConfig config;
    ParityCheckMatrix H;
    Model<float> model;
    std::optional<TrainState> state;
    std::optional<Rng> rng;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ecctlin
