// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecctlin/bench.hpp"
#include "ecctlin/bp.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/gradcheck.hpp"
#include "ecctlin/training.hpp"
#include "ecctlin/transformer.hpp"

namespace ecctlin {

namespace {

// ---- shared flag groups ------------------------------------------------------------

struct CodeFlags {
    std::string code = "regular";  // regular | lifted | alist
    int n = 26;
    int v = 3;
    int c = 6;
    std::uint64_t seed = 1;
    std::string alist_path;
    std::string proto_path;
    int lift = 0;  // 0: take Z from the protograph file
};

void add_code_flags(CLI::App* cmd, CodeFlags& f) {
    cmd->add_option("--code", f.code, "code family: regular | lifted | alist")
        ->check(CLI::IsMember({"regular", "lifted", "alist"}));
    cmd->add_option("--n", f.n, "block length (regular)");
    cmd->add_option("--v", f.v, "variable-node degree (regular)");
    cmd->add_option("--c", f.c, "check-node degree (regular)");
    cmd->add_option("--code-seed", f.seed, "construction seed (regular)");
    cmd->add_option("--alist", f.alist_path, "parity-check matrix in alist format");
    cmd->add_option("--proto", f.proto_path, "protograph file (base_m base_n Z + shift rows)");
    cmd->add_option("--lift", f.lift, "override the lifting factor from the protograph file");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

BenchCode build_code(const CodeFlags& f) {
    if (f.code == "regular") return make_regular_code(f.n, f.v, f.c, f.seed);
    if (f.code == "lifted") {
        if (f.proto_path.empty()) throw ParameterError("--code lifted requires --proto");
        ProtographFile pf = load_protograph_text(read_file(f.proto_path));
        return make_lifted_code(pf.base, f.lift > 0 ? f.lift : pf.lifting);
    }
    if (f.alist_path.empty()) throw ParameterError("--code alist requires --alist");
    return make_imported_code(load_alist_text(read_file(f.alist_path)));
}

// "4:1:8" -> {4,5,6,7,8}; a single value is also accepted.
std::vector<double> parse_ebno_range(const std::string& text) {
    std::vector<double> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find(':', pos);
        const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            parts.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ParameterError("--ebno: malformed value '" + tok + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (parts.size() == 1) return parts;
    if (parts.size() != 3) throw ParameterError("--ebno expects START:STEP:STOP or a single value");
    const double start = parts[0], step = parts[1], stop = parts[2];
    if (step <= 0) throw ParameterError("--ebno: step must be positive");
    std::vector<double> out;
    for (double v = start; v <= stop + 1e-9; v += step) out.push_back(v);
    if (out.empty()) throw ParameterError("--ebno: empty range");
    return out;
}

Modulation parse_modulation(const std::string& text) {
    if (text == "bpsk") return Modulation::bpsk;
    if (text == "qpsk") return Modulation::qpsk;
    if (text == "qam16") return Modulation::qam16;
    throw ParameterError("--mod: unknown modulation '" + text + "'");
}

// ---- subcommands ------------------------------------------------------------------

int run_train(const CodeFlags& code_flags, const ModelConfig& model_flags, const TrainConfig& train_flags,
              const std::string& out, const std::string& log_path, const std::string& resume_path) {
    if (out.empty()) throw ParameterError("train: --out CHECKPOINT is required");
    if (!resume_path.empty()) {
        LoadedCheckpoint ck = load_checkpoint(resume_path);
        if (!ck.state || !ck.rng)
            throw CheckpointError("train: '" + resume_path + "' has no optimizer state to resume from");
        BenchCode code = make_imported_code(ck.H);
        TrainConfig cfg = train_flags;
        cfg.validate();
        Rng rng = *ck.rng;
        TrainState state = *ck.state;
        state = train_model(ck.model, code.G, code.H, cfg, rng, log_path, &state);
        save_checkpoint(out, ck.model, code.H, &state, &rng);
        std::fprintf(stderr, "resumed to step %d, loss %.6g, checkpoint %s\n", state.step,
                     state.last_loss, out.c_str());
        return 0;
    }

    BenchCode code = build_code(code_flags);
    ModelConfig mc = model_flags;
    mc.n = code.spec.n;
    mc.m = code.H.rows();
    mc.validate();
    TrainConfig cfg = train_flags;
    cfg.validate();

    Model<float> model(mc, code.H);
    Rng rng(cfg.seed);
    TrainState state = train_model(model, code.G, code.H, cfg, rng, log_path);
    save_checkpoint(out, model, code.H, &state, &rng);
    std::fprintf(stderr, "trained %d steps, final loss %.6g, train BER %.6g, checkpoint %s\n",
                 state.step, state.last_loss, state.last_ber, out.c_str());
    return 0;
}

int run_ber_cmd(const CodeFlags& code_flags, BerRunConfig cfg, bool uses_code, const std::string& mod,
                const std::string& out, const std::string& format) {
    cfg.channel.modulation = parse_modulation(mod);
    BerReport report;
    if (uses_code) {
        BenchCode code = build_code(code_flags);
        report = run_ber(cfg, &code);
    } else {
        report = run_ber(cfg, nullptr);
    }
    emit(report, format, out);
    if (!report.calibration_ok) {
        std::fprintf(stderr, "warning: uncoded calibration probe failed; results flagged invalid\n");
    }
    return 0;
}

int run_timing_cmd(const TimingConfig& cfg, const std::string& out, const std::string& format) {
    TimingReport report = run_timing(cfg);
    emit(report, format, out);
    return 0;
}

int run_makecode(const CodeFlags& code_flags, const std::string& out) {
    BenchCode code = build_code(code_flags);
    const std::string text = save_alist(code.H);
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream os(out, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("makecode: cannot open '" + out + "'");
        os << text;
    }
    std::fprintf(stderr, "n=%d k=%d m=%d rate=%lld/%lld\n", code.spec.n, code.spec.k, code.H.rows(),
                 code.spec.rate().num, code.spec.rate().den);
    return 0;
}

int run_gradcheck_cmd(std::uint64_t seed, double tolerance) {
    const std::vector<GradCheckResult> results = run_gradcheck_suite(seed, tolerance);
    bool all_ok = true;
    for (const GradCheckResult& r : results) {
        std::printf("%-24s max_rel_err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                    r.ok ? "ok" : "FAIL");
        all_ok = all_ok && r.ok;
    }
    if (!all_ok) throw NumericalError("gradient check failed");
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"transformer and belief-propagation decoding of linear block codes"};
    app.require_subcommand(1);

    // train
    CodeFlags train_code;
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    std::string attn = "standard";
    std::string train_out, train_log, resume_path;
    CLI::App* train = app.add_subcommand("train", "train a decoder and write a checkpoint");
    add_code_flags(train, train_code);
    train->add_option("--attn", attn, "attention flavor: standard | linear")
        ->check(CLI::IsMember({"standard", "linear"}));
    train->add_option("--mask-div", model_cfg.mask_division, "low-rank mask division value d");
    train->add_option("--hidden", model_cfg.hidden_dim, "embedding dimension");
    train->add_option("--heads", model_cfg.heads, "attention heads");
    train->add_option("--blocks", model_cfg.blocks, "decoder blocks");
    train->add_option("--ffn", model_cfg.ffn_expansion, "feed-forward expansion factor");
    train->add_option("--iters", train_cfg.iterations, "training iterations");
    train->add_option("--batch", train_cfg.batch_size, "training batch size");
    train->add_option("--lr", train_cfg.learning_rate, "peak learning rate");
    train->add_option("--ebno-low", train_cfg.ebno_low_db, "training Eb/N0 range low (dB)");
    train->add_option("--ebno-high", train_cfg.ebno_high_db, "training Eb/N0 range high (dB)");
    train->add_option("--clip", train_cfg.grad_clip, "global gradient-norm clip (0 disables)");
    train->add_option("--seed", train_cfg.seed, "training seed (init + channel)");
    train->add_option("--out", train_out, "checkpoint output path")->required();
    train->add_option("--log", train_log, "training log CSV path");
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    // ber
    CodeFlags ber_code;
    BerRunConfig ber_cfg;
    std::string decoder_text = "bp:1";
    std::string mod = "bpsk";
    std::string ber_out, ber_format = "csv", ebno_text;
    bool no_early_term = false;
    CLI::App* ber = app.add_subcommand("ber", "Monte-Carlo BER/BLER sweep");
    add_code_flags(ber, ber_code);
    ber->add_option("--decoder", decoder_text, "uncoded | bp:ITERS | checkpoint path");
    ber->add_option("--ebno", ebno_text, "Eb/N0 sweep START:STEP:STOP in dB")->required();
    ber->add_option("--mod", mod, "modulation: bpsk | qpsk | qam16")
        ->check(CLI::IsMember({"bpsk", "qpsk", "qam16"}));
    ber->add_option("--min-errors", ber_cfg.stop.min_errors, "stop a point after this many bit errors");
    ber->add_option("--max-bits", ber_cfg.stop.max_bits, "per-point simulated-bit budget");
    ber->add_option("--max-seconds", ber_cfg.stop.max_seconds, "per-point wall-clock cap");
    ber->add_flag("--no-early-term", no_early_term, "disable BP early termination");
    ber->add_option("--seed", ber_cfg.seed, "simulation seed");
    ber->add_option("--batch", ber_cfg.batch, "words per decode call");
    ber->add_option("--block", ber_cfg.uncoded_block_bits, "word size for the uncoded decoder");
    ber->add_option("--out", ber_out, "output path (default: stdout)");
    ber->add_option("--format", ber_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // timing
    TimingConfig timing_cfg;
    std::string timing_out, timing_format = "csv";
    CLI::App* timing = app.add_subcommand("timing", "decoder wall-clock scaling comparison");
    timing->add_option("--sizes", timing_cfg.sizes, "code lengths (regular v=3, c=6)");
    timing->add_option("--decoders", timing_cfg.decoders, "decoders: standard | linear | bp:ITERS");
    timing->add_option("--batch", timing_cfg.batch, "words per timed decode");
    timing->add_option("--reps", timing_cfg.repetitions, "timed repetitions (median reported)");
    timing->add_option("--hidden", timing_cfg.hidden_dim, "model embedding dimension");
    timing->add_option("--heads", timing_cfg.heads, "model attention heads");
    timing->add_option("--blocks", timing_cfg.blocks, "model decoder blocks");
    timing->add_option("--proj", timing_cfg.proj_cols, "low-rank width K for linear attention");
    timing->add_option("--seed", timing_cfg.seed, "construction/input seed");
    timing->add_option("--out", timing_out, "output path (default: stdout)");
    timing->add_option("--format", timing_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // makecode
    CodeFlags make_flags;
    std::string make_out;
    CLI::App* makecode = app.add_subcommand("makecode", "construct a code and emit its alist");
    add_code_flags(makecode, make_flags);
    makecode->add_option("--out", make_out, "alist output path (default: stdout)");

    // gradcheck
    std::uint64_t gc_seed = 20240901;
    double gc_tol = 1e-4;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--seed", gc_seed, "suite seed");
    gradcheck->add_option("--tol", gc_tol, "max relative error tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, returns 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(train)) {
            model_cfg.kind = attention_kind_from_name(attn);
            model_cfg.seed = train_cfg.seed;
            return run_train(train_code, model_cfg, train_cfg, train_out, train_log, resume_path);
        }
        if (app.got_subcommand(ber)) {
            ber_cfg.decoder = DecoderSpec::parse(decoder_text);
            ber_cfg.decoder.bp_early_termination = !no_early_term;
            ber_cfg.ebno_db = parse_ebno_range(ebno_text);
            const bool uses_code = ber_cfg.decoder.kind != DecoderSpec::Kind::uncoded;
            return run_ber_cmd(ber_code, ber_cfg, uses_code, mod, ber_out, ber_format);
        }
        if (app.got_subcommand(timing)) return run_timing_cmd(timing_cfg, timing_out, timing_format);
        if (app.got_subcommand(makecode)) return run_makecode(make_flags, make_out);
        if (app.got_subcommand(gradcheck)) return run_gradcheck_cmd(gc_seed, gc_tol);
        std::fprintf(stderr, "no subcommand given\n");
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace ecctlin
