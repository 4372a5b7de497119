// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ecctlin/errors.hpp"

namespace ecctlin {

void TrainConfig::validate() const {
    if (iterations < 1) throw ParameterError("train config: iterations must be >= 1");
    if (batch_size < 1) throw ParameterError("train config: batch size must be >= 1");
    if (learning_rate <= 0.0) throw ParameterError("train config: learning rate must be positive");
    if (lr_floor_fraction < 0.0 || lr_floor_fraction > 1.0)
        throw ParameterError("train config: floor fraction must lie in [0,1]");
    if (ebno_low_db > ebno_high_db) throw ParameterError("train config: Eb/N0 range low > high");
    if (grad_clip < 0.0) throw ParameterError("train config: gradient clip must be >= 0");
}

double cosine_lr(int step, int total, double lr0, double floor_fraction) {
    if (total <= 0) throw ParameterError("cosine_lr: total must be positive");
    if (step < 0) throw ParameterError("cosine_lr: step must be >= 0");
    if (step > total) return floor_fraction * lr0;
    const double c = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total));
    return floor_fraction * lr0 + (1.0 - floor_fraction) * lr0 * c;
}

TrainingBatch sample_training_batch(const GeneratorMatrix& G, const ParityCheckMatrix& H,
                                    const ChannelConfig& channel, double ebno_low_db, double ebno_high_db,
                                    int batch, Rng& rng) {
    if (batch < 1) throw ParameterError("sample_training_batch: batch must be >= 1");
    if (ebno_low_db > ebno_high_db) throw ParameterError("sample_training_batch: Eb/N0 range low > high");
    if (G.n != H.cols()) throw ShapeError("sample_training_batch: generator and parity-check disagree on n");
    const int n = G.n;
    const int m = H.rows();
    const int k = G.k;
    ChannelConfig cfg = channel;
    cfg.coderate = static_cast<double>(k) / n;
    const int mod_bits = bits_per_symbol(cfg.modulation);

    std::vector<float> xs;
    xs.reserve(static_cast<std::size_t>(batch) * (n + m));
    std::vector<float> ts;
    ts.reserve(static_cast<std::size_t>(batch) * n);
    std::vector<std::uint8_t> info(static_cast<std::size_t>(k));
    for (int b = 0; b < batch; ++b) {
        for (auto& bit : info) bit = static_cast<std::uint8_t>(rng.bit());
        const std::vector<std::uint8_t> word = encode(G, info);
        const SymbolVector sym = map_bits(word, cfg);
        const double ebno = rng.uniform(ebno_low_db, ebno_high_db);
        const double n0 = ebno_to_n0(ebno, cfg.coderate, mod_bits, cfg.symbol_energy);
        const SymbolVector y = apply_awgn(sym, n0, rng);
        const LlrVector llr = demap_llr(y, n0, cfg);
        const DecoderInput din = build_decoder_input(llr, H);
        for (double v : din.values) xs.push_back(static_cast<float>(v));
        for (std::uint8_t bit : word) ts.push_back(static_cast<float>(bit));
    }
    return {Tensor<float>::from_data({batch, n + m}, std::move(xs)),
            Tensor<float>::from_data({batch, n}, std::move(ts))};
}

void init_train_state(TrainState& state, const Model<float>& model) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& [name, t] : model.parameters()) {
        state.first_moment.emplace_back(t.numel(), 0.0f);
        state.second_moment.emplace_back(t.numel(), 0.0f);
    }
}

double global_grad_norm(Model<float>& model) {
    double sq = 0.0;
    for (auto& [name, t] : model.parameters())
        for (float g : t.grad()) sq += static_cast<double>(g) * g;
    return std::sqrt(sq);
}

void clip_gradients(Model<float>& model, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = global_grad_norm(model);
    if (norm <= max_norm) return;
    const float s = static_cast<float>(max_norm / norm);
    for (auto& [name, t] : model.parameters())
        for (float& g : t.grad()) g *= s;
}

void adam_update(Model<float>& model, TrainState& state, const TrainConfig& cfg, double lr) {
    auto& params = model.parameters();
    if (state.first_moment.size() != params.size()) init_train_state(state, model);
    const int t = state.step + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p].second.data();
        auto& g = params[p].second.grad();
        auto& m1 = state.first_moment[p];
        auto& m2 = state.second_moment[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m1[i] = static_cast<float>(cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i]);
            m2[i] = static_cast<float>(cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * static_cast<double>(g[i]) * g[i]);
            const double mhat = m1[i] / bc1;
            const double vhat = m2[i] / bc2;
            w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

double train_step(Model<float>& model, const TrainingBatch& batch, TrainState& state, const TrainConfig& cfg) {
    if (state.first_moment.empty()) init_train_state(state, model);
    model.zero_grads();
    Tensor<float> logits = model.forward(batch.inputs);
    Tensor<float> loss = bce_with_logits(logits, batch.targets);
    const double loss_value = static_cast<double>(loss.item());
    if (!std::isfinite(loss_value))
        throw NumericalError("train step " + std::to_string(state.step) + ": loss is not finite");
    loss.backward();
    if (cfg.grad_clip > 0.0) clip_gradients(model, cfg.grad_clip);
    const double lr = cosine_lr(state.step, cfg.iterations, cfg.learning_rate, cfg.lr_floor_fraction);
    adam_update(model, state, cfg, lr);

    const std::vector<std::uint8_t> decided = threshold(logits);
    const auto& tgt = batch.targets.data();
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < decided.size(); ++i)
        if (decided[i] != static_cast<std::uint8_t>(tgt[i])) ++wrong;

    state.current_lr = lr;
    state.last_loss = loss_value;
    state.last_ber = static_cast<double>(wrong) / static_cast<double>(decided.size());
    state.step += 1;
    return loss_value;
}

TrainState train_model(Model<float>& model, const GeneratorMatrix& G, const ParityCheckMatrix& H,
                       const TrainConfig& cfg, Rng& rng, const std::string& log_path, TrainState* resume) {
    cfg.validate();
    TrainState local;
    TrainState& state = resume ? *resume : local;
    if (state.first_moment.empty()) init_train_state(state, model);

    std::ofstream log;
    if (!log_path.empty()) {
        const bool fresh = state.step == 0;
        log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("train_model: cannot open log '" + log_path + "'");
        if (fresh) log << "step,lr,loss,train_ber\n";
    }

    ChannelConfig channel;  // BPSK training channel
    while (state.step < cfg.iterations) {
        TrainingBatch batch =
            sample_training_batch(G, H, channel, cfg.ebno_low_db, cfg.ebno_high_db, cfg.batch_size, rng);
        train_step(model, batch, state, cfg);
        if (log) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", state.step, state.current_lr,
                          state.last_loss, state.last_ber);
            log << line;
        }
    }
    return state;
}

// ---- checkpoint io --------------------------------------------------------------

namespace {

void write_exact(std::ostream& os, const void* p, std::size_t bytes) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}

void read_exact(std::istream& is, void* p, std::size_t bytes) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(is.gcount()) != bytes) throw CheckpointError("checkpoint: truncated file");
}

std::string expect_line(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw CheckpointError("checkpoint: truncated file");
    return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model<float>& model, const ParityCheckMatrix& H,
                     const TrainState* state, const Rng* rng) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    const ModelConfig& cfg = model.config();
    os << "ecctlin-v1\n";
    os << "config\n";
    os << "n " << cfg.n << "\n";
    os << "m " << cfg.m << "\n";
    os << "hidden_dim " << cfg.hidden_dim << "\n";
    os << "heads " << cfg.heads << "\n";
    os << "blocks " << cfg.blocks << "\n";
    os << "attn " << attention_kind_name(cfg.kind) << "\n";
    os << "mask_division " << cfg.mask_division << "\n";
    os << "ffn_expansion " << cfg.ffn_expansion << "\n";
    os << "model_seed " << cfg.seed << "\n";
    os << "end\n";

    const std::string alist = save_alist(H);
    os << "code " << alist.size() << "\n";
    os.write(alist.data(), static_cast<std::streamsize>(alist.size()));
    os << "end\n";

    const auto& params = model.parameters();
    os << "params " << params.size() << "\n";
    for (const auto& [name, t] : params) {
        os << name << " " << t.rank();
        for (int d : t.shape()) os << " " << d;
        os << "\n";
        write_exact(os, t.data().data(), t.numel() * sizeof(float));
        os << "\n";
    }

    const bool with_state = state != nullptr && rng != nullptr;
    os << "trainstate " << (with_state ? 1 : 0) << "\n";
    if (with_state) {
        os << "step " << state->step << "\n";
        os << "moments " << state->first_moment.size() << "\n";
        for (std::size_t p = 0; p < state->first_moment.size(); ++p) {
            write_exact(os, state->first_moment[p].data(), state->first_moment[p].size() * sizeof(float));
            write_exact(os, state->second_moment[p].data(), state->second_moment[p].size() * sizeof(float));
            os << "\n";
        }
        os << "rng\n";
        rng->save_state(os);
        os << "endrng\n";
    }
    os << "end\n";
    if (!os) throw IoError("checkpoint: write to '" + path + "' failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
    if (expect_line(is) != "ecctlin-v1") throw CheckpointError("checkpoint: unsupported version tag");
    if (expect_line(is) != "config") throw CheckpointError("checkpoint: missing config section");

    ModelConfig cfg;
    for (std::string line = expect_line(is); line != "end"; line = expect_line(is)) {
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key >> value)) throw CheckpointError("checkpoint: malformed config line '" + line + "'");
        if (key == "n") cfg.n = std::stoi(value);
        else if (key == "m") cfg.m = std::stoi(value);
        else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(value);
        else if (key == "heads") cfg.heads = std::stoi(value);
        else if (key == "blocks") cfg.blocks = std::stoi(value);
        else if (key == "attn") cfg.kind = attention_kind_from_name(value);
        else if (key == "mask_division") cfg.mask_division = std::stoi(value);
        else if (key == "ffn_expansion") cfg.ffn_expansion = std::stoi(value);
        else if (key == "model_seed") cfg.seed = std::stoull(value);
        else throw CheckpointError("checkpoint: unknown config key '" + key + "'");
    }

    std::string line = expect_line(is);
    if (line.rfind("code ", 0) != 0) throw CheckpointError("checkpoint: missing code section");
    const std::size_t code_bytes = std::stoull(line.substr(5));
    std::string alist(code_bytes, '\0');
    read_exact(is, alist.data(), code_bytes);
    if (expect_line(is) != "end") throw CheckpointError("checkpoint: unterminated code section");
    ParityCheckMatrix H = load_alist_text(alist);
    if (H.cols() != cfg.n || H.rows() != cfg.m)
        throw CheckpointError("checkpoint: parity-check matrix disagrees with declared config");

    LoadedCheckpoint out{cfg, H, Model<float>(cfg, H), std::nullopt, std::nullopt};

    line = expect_line(is);
    if (line.rfind("params ", 0) != 0) throw CheckpointError("checkpoint: missing params section");
    const std::size_t count = std::stoull(line.substr(7));
    if (count != out.model.parameters().size())
        throw CheckpointError("checkpoint: parameter count disagrees with declared config");
    for (std::size_t p = 0; p < count; ++p) {
        std::istringstream ls(expect_line(is));
        std::string name;
        int rank = 0;
        if (!(ls >> name >> rank)) throw CheckpointError("checkpoint: malformed parameter header");
        Shape shape(static_cast<std::size_t>(rank));
        for (int d = 0; d < rank; ++d)
            if (!(ls >> shape[static_cast<std::size_t>(d)]))
                throw CheckpointError("checkpoint: malformed parameter shape for '" + name + "'");
        Tensor<float> t = out.model.param(name);
        if (t.shape() != shape)
            throw CheckpointError("checkpoint: parameter '" + name + "' has shape " + shape_str(shape) +
                                  " but the model expects " + shape_str(t.shape()));
        read_exact(is, t.data().data(), t.numel() * sizeof(float));
        if (expect_line(is) != "") throw CheckpointError("checkpoint: malformed parameter block for '" + name + "'");
    }

    line = expect_line(is);
    if (line.rfind("trainstate ", 0) != 0) throw CheckpointError("checkpoint: missing trainstate section");
    if (line.substr(11) == "1") {
        TrainState state;
        line = expect_line(is);
        if (line.rfind("step ", 0) != 0) throw CheckpointError("checkpoint: missing step");
        state.step = std::stoi(line.substr(5));
        line = expect_line(is);
        if (line.rfind("moments ", 0) != 0) throw CheckpointError("checkpoint: missing moments");
        const std::size_t nmom = std::stoull(line.substr(8));
        if (nmom != count) throw CheckpointError("checkpoint: moment count disagrees with parameters");
        init_train_state(state, out.model);
        for (std::size_t p = 0; p < nmom; ++p) {
            read_exact(is, state.first_moment[p].data(), state.first_moment[p].size() * sizeof(float));
            read_exact(is, state.second_moment[p].data(), state.second_moment[p].size() * sizeof(float));
            if (expect_line(is) != "") throw CheckpointError("checkpoint: malformed moment block");
        }
        if (expect_line(is) != "rng") throw CheckpointError("checkpoint: missing rng state");
        Rng rng(0);
        rng.load_state(is);
        expect_line(is);  // consume the remainder of the rng line
        if (expect_line(is) != "endrng") throw CheckpointError("checkpoint: unterminated rng state");
        out.state = std::move(state);
        out.rng = rng;
    }
    if (expect_line(is) != "end") throw CheckpointError("checkpoint: unterminated file");
    return out;
}

}  // namespace ecctlin
