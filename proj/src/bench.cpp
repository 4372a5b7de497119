// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ecctlin/bp.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/training.hpp"
#include "ecctlin/transformer.hpp"

namespace ecctlin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

std::string fmt_g9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string sanitize_name(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '"') c = '_';
    return s;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(c);
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double BerPoint::ber_stderr() const {
    if (bits == 0) return 0.0;
    const double p = ber();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(bits));
}

// ---- code bundles -----------------------------------------------------------------

BenchCode make_regular_code(int n, int v, int c, std::uint64_t seed) {
    ParityCheckMatrix H = build_regular_ldpc(n, v, c, seed);
    GeneratorMatrix G = derive_generator(H);
    CodeSpec spec;
    spec.kind = CodeKind::regular;
    spec.n = n;
    spec.k = G.k;
    spec.m = H.rows();
    spec.var_degree = v;
    spec.check_degree = c;
    spec.seed = seed;
    return {spec, std::move(H), std::move(G)};
}

BenchCode make_lifted_code(const Protograph& base, int lifting) {
    ParityCheckMatrix H = lift_base_graph(base, lifting);
    GeneratorMatrix G = derive_generator(H);
    CodeSpec spec;
    spec.kind = CodeKind::lifted;
    spec.n = H.cols();
    spec.k = G.k;
    spec.m = H.rows();
    spec.base = base;
    spec.lifting = lifting;
    return {spec, std::move(H), std::move(G)};
}

BenchCode make_imported_code(ParityCheckMatrix H) {
    GeneratorMatrix G = derive_generator(H);
    CodeSpec spec;
    spec.kind = CodeKind::imported;
    spec.n = H.cols();
    spec.k = G.k;
    spec.m = H.rows();
    return {spec, std::move(H), std::move(G)};
}

// ---- decoders -----------------------------------------------------------------------

DecoderSpec DecoderSpec::parse(const std::string& text) {
    DecoderSpec spec;
    if (text == "uncoded") {
        spec.kind = Kind::uncoded;
    } else if (text.rfind("bp:", 0) == 0) {
        spec.kind = Kind::bp;
        try {
            spec.bp_iterations = std::stoi(text.substr(3));
        } catch (const std::exception&) {
            throw ParameterError("decoder spec '" + text + "': bad iteration count");
        }
        if (spec.bp_iterations < 0) throw ParameterError("decoder spec '" + text + "': negative iterations");
    } else if (text == "bp") {
        spec.kind = Kind::bp;
    } else {
        spec.kind = Kind::model;
        spec.checkpoint_path = text;
    }
    return spec;
}

std::string DecoderSpec::name() const {
    switch (kind) {
        case Kind::uncoded: return "uncoded";
        case Kind::bp: return "bp:" + std::to_string(bp_iterations);
        case Kind::model: return "model";
    }
    return "unknown";
}

namespace {

class UncodedDecoder final : public Decoder {
  public:
    std::string name() const override { return "uncoded"; }
    int block_length() const override { return 0; }
    std::vector<std::uint8_t> decode(const std::vector<LlrVector>& llrs) override {
        std::vector<std::uint8_t> out;
        for (const LlrVector& llr : llrs) {
            const std::vector<std::uint8_t> hard = hard_decision(llr);
            out.insert(out.end(), hard.begin(), hard.end());
        }
        return out;
    }
};

class BpBatchDecoder final : public Decoder {
  public:
    BpBatchDecoder(const ParityCheckMatrix& H, int iterations, bool early)
        : ws_(H), iterations_(iterations) {
        opts_.early_termination = early;
        n_ = H.cols();
    }
    std::string name() const override { return "bp:" + std::to_string(iterations_); }
    int block_length() const override { return n_; }
    std::vector<std::uint8_t> decode(const std::vector<LlrVector>& llrs) override {
        std::vector<std::uint8_t> out;
        out.reserve(llrs.size() * static_cast<std::size_t>(n_));
        for (const LlrVector& llr : llrs) {
            BpResult r = bp_decode(ws_, llr, iterations_, opts_);
            out.insert(out.end(), r.hard.begin(), r.hard.end());
        }
        return out;
    }

  private:
    BpWorkspace ws_;
    BpOptions opts_;
    int iterations_;
    int n_;
};

class ModelDecoder final : public Decoder {
  public:
    ModelDecoder(const std::string& path, const ParityCheckMatrix& H)
        : loaded_(load_checkpoint(path)) {
        if (loaded_.H.bits() != H.bits() || loaded_.H.rows() != H.rows())
            throw ShapeError("model decoder: checkpoint code does not match the configured code");
    }
    std::string name() const override {
        return "model-" + attention_kind_name(loaded_.config.kind);
    }
    int block_length() const override { return loaded_.config.n; }
    std::vector<std::uint8_t> decode(const std::vector<LlrVector>& llrs) override {
        NoGradGuard eval_only;
        const int n = loaded_.config.n;
        const int seq = loaded_.config.seq_len();
        std::vector<float> xs;
        xs.reserve(llrs.size() * static_cast<std::size_t>(seq));
        for (const LlrVector& llr : llrs) {
            const DecoderInput din = build_decoder_input(llr, loaded_.H);
            for (double v : din.values) xs.push_back(static_cast<float>(v));
        }
        Tensor<float> x =
            Tensor<float>::from_data({static_cast<int>(llrs.size()), seq}, std::move(xs));
        Tensor<float> logits = loaded_.model.forward(x);
        (void)n;
        return threshold(logits);
    }

  private:
    LoadedCheckpoint loaded_;
};

}  // namespace

std::unique_ptr<Decoder> make_decoder(const DecoderSpec& spec, const ParityCheckMatrix& H) {
    switch (spec.kind) {
        case DecoderSpec::Kind::uncoded: return std::make_unique<UncodedDecoder>();
        case DecoderSpec::Kind::bp:
            return std::make_unique<BpBatchDecoder>(H, spec.bp_iterations, spec.bp_early_termination);
        case DecoderSpec::Kind::model: return std::make_unique<ModelDecoder>(spec.checkpoint_path, H);
    }
    throw ParameterError("make_decoder: unknown decoder kind");
}

// ---- BER harness ---------------------------------------------------------------------

namespace {

std::string canonical_config(const BerRunConfig& cfg, const BenchCode* code, const std::string& decoder_name) {
    std::ostringstream os;
    os << "decoder=" << decoder_name << ";";
    if (code) {
        os << "code=";
        switch (code->spec.kind) {
            case CodeKind::regular:
                os << "regular," << code->spec.n << "," << code->spec.var_degree << ","
                   << code->spec.check_degree << "," << code->spec.seed;
                break;
            case CodeKind::lifted:
                os << "lifted," << code->spec.base.rows << "x" << code->spec.base.cols << ","
                   << code->spec.lifting;
                for (int s : code->spec.base.shifts) os << "," << s;
                break;
            case CodeKind::imported:
                os << "imported," << hash_hex(fnv1a(save_alist(code->H)));
                break;
        }
        os << ";";
    } else {
        os << "code=none," << cfg.uncoded_block_bits << ";";
    }
    os << "mod=" << bits_per_symbol(cfg.channel.modulation) << ";es=" << fmt_g9(cfg.channel.symbol_energy)
       << ";clip=" << fmt_g9(cfg.channel.llr_clip) << ";ebno=";
    for (double e : cfg.ebno_db) os << fmt_g9(e) << ",";
    os << ";stop=" << cfg.stop.min_errors << "," << cfg.stop.max_bits << "," << fmt_g9(cfg.stop.max_seconds)
       << ";seed=" << cfg.seed << ";batch=" << cfg.batch;
    if (cfg.decoder.kind == DecoderSpec::Kind::bp)
        os << ";bp=" << cfg.decoder.bp_iterations << "," << (cfg.decoder.bp_early_termination ? 1 : 0);
    return os.str();
}

}  // namespace

bool calibrate_uncoded(std::uint64_t seed) {
    const double ebno_db = 4.0;
    const double expected = q_function(std::sqrt(2.0 * std::pow(10.0, ebno_db / 10.0)));
    ChannelConfig cfg;  // BPSK, rate 1
    const double n0 = ebno_to_n0(ebno_db, 1.0, 1, cfg.symbol_energy);
    Rng rng = Rng(seed).fork(0xCA11B8A7EULL);
    const int word = 1024;
    std::vector<std::uint8_t> bits(word);
    std::uint64_t total = 0, errors = 0;
    while (errors < 200 && total < 200000) {
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
        SymbolVector y = apply_awgn(map_bits(bits, cfg), n0, rng);
        LlrVector llr = demap_llr(y, n0, cfg);
        const std::vector<std::uint8_t> hard = hard_decision(llr);
        for (int i = 0; i < word; ++i) errors += hard[static_cast<std::size_t>(i)] != bits[static_cast<std::size_t>(i)];
        total += word;
    }
    const double ber = static_cast<double>(errors) / static_cast<double>(total);
    return std::abs(ber - expected) / expected < 0.30;
}

BerReport run_ber(const BerRunConfig& cfg, const BenchCode* code) {
    if (cfg.ebno_db.empty()) throw ParameterError("run_ber: empty Eb/N0 list");
    if (cfg.batch < 1) throw ParameterError("run_ber: batch must be >= 1");
    const bool uncoded = cfg.decoder.kind == DecoderSpec::Kind::uncoded;
    if (!uncoded && code == nullptr) throw ParameterError("run_ber: this decoder requires a code");
    if (uncoded && cfg.uncoded_block_bits < 1)
        throw ParameterError("run_ber: uncoded block size must be >= 1");

    static const ParityCheckMatrix kNoCode;
    const ParityCheckMatrix& H = code ? code->H : kNoCode;
    std::unique_ptr<Decoder> decoder = make_decoder(cfg.decoder, H);
    const int n = uncoded ? cfg.uncoded_block_bits : code->spec.n;
    const int k = uncoded ? cfg.uncoded_block_bits : code->spec.k;
    if (decoder->block_length() != 0 && decoder->block_length() != n)
        throw ShapeError("run_ber: decoder block length " + std::to_string(decoder->block_length()) +
                         " does not match code length " + std::to_string(n));
    const double rate = static_cast<double>(k) / n;

    BerReport rep;
    rep.decoder = sanitize_name(decoder->name());
    rep.n = n;
    rep.k = k;
    rep.seed = cfg.seed;
    rep.config_hash = hash_hex(fnv1a(canonical_config(cfg, code, decoder->name())));
    rep.calibration_ok = calibrate_uncoded(cfg.seed);
    if (!rep.calibration_ok) rep.notes.push_back("INVALID: uncoded calibration probe failed");
    if (cfg.decoder.kind == DecoderSpec::Kind::bp)
        rep.notes.push_back("bp-update-rule=sum-product (assumed; baseline variant not pinned)");
    if (cfg.decoder.kind == DecoderSpec::Kind::model)
        rep.notes.push_back("training-substitutions=bce-loss,adam,batch-128-default (chosen defaults)");
    rep.notes.push_back("timing=decode-call-only");

    ChannelConfig channel = cfg.channel;
    channel.coderate = rate;
    const int mod_bits = bits_per_symbol(channel.modulation);

    std::vector<std::uint8_t> info(static_cast<std::size_t>(k));
    std::vector<std::vector<std::uint8_t>> words(static_cast<std::size_t>(cfg.batch));
    std::vector<LlrVector> llrs(static_cast<std::size_t>(cfg.batch));

    for (std::size_t pi = 0; pi < cfg.ebno_db.size(); ++pi) {
        const double ebno = cfg.ebno_db[pi];
        const double n0 = ebno_to_n0(ebno, rate, mod_bits, channel.symbol_energy);
        Rng rng = Rng(cfg.seed).fork(pi);
        BerPoint pt;
        pt.ebno_db = ebno;
        const auto point_start = Clock::now();
        while (true) {
            for (int b = 0; b < cfg.batch; ++b) {
                auto& word = words[static_cast<std::size_t>(b)];
                if (uncoded) {
                    word.resize(static_cast<std::size_t>(n));
                    for (auto& bit : word) bit = static_cast<std::uint8_t>(rng.bit());
                } else {
                    for (auto& bit : info) bit = static_cast<std::uint8_t>(rng.bit());
                    word = encode(code->G, info);
                }
                SymbolVector y = apply_awgn(map_bits(word, channel), n0, rng);
                llrs[static_cast<std::size_t>(b)] = demap_llr(y, n0, channel);
            }
            const auto t0 = Clock::now();
            const std::vector<std::uint8_t> hard = decoder->decode(llrs);
            pt.seconds += seconds_between(t0, Clock::now());

            for (int b = 0; b < cfg.batch; ++b) {
                const auto& word = words[static_cast<std::size_t>(b)];
                std::uint64_t wrong = 0;
                for (int i = 0; i < n; ++i)
                    wrong += hard[static_cast<std::size_t>(b) * n + i] != word[static_cast<std::size_t>(i)];
                pt.bits += static_cast<std::uint64_t>(n);
                pt.bit_errors += wrong;
                pt.blocks += 1;
                pt.block_errors += wrong > 0;
            }
            if (pt.bit_errors >= cfg.stop.min_errors) break;
            if (pt.bits >= cfg.stop.max_bits) break;
            if (seconds_between(point_start, Clock::now()) >= cfg.stop.max_seconds) break;
        }
        rep.points.push_back(pt);
    }

    // flag BER inversions beyond 3 standard errors (statistical noise guard)
    for (std::size_t i = 1; i < rep.points.size(); ++i) {
        const BerPoint& prev = rep.points[i - 1];
        const BerPoint& cur = rep.points[i];
        if (cur.ebno_db > prev.ebno_db) {
            const double se = std::sqrt(prev.ber_stderr() * prev.ber_stderr() +
                                        cur.ber_stderr() * cur.ber_stderr());
            if (cur.ber() > prev.ber() + 3.0 * se)
                rep.notes.push_back("nonmonotone-ber beyond 3 stderr at " + fmt_g9(cur.ebno_db) + " dB");
        }
    }
    return rep;
}

// ---- timing harness ---------------------------------------------------------------------

double TimingReport::slope(const std::string& decoder) const {
    for (const auto& [name, s] : slopes)
        if (name == decoder) return s;
    throw ParameterError("timing report: no slope for decoder '" + decoder + "'");
}

TimingReport run_timing(const TimingConfig& cfg) {
    if (cfg.sizes.empty()) throw ParameterError("run_timing: empty size list");
    if (cfg.repetitions < 5) throw ParameterError("run_timing: need at least 5 repetitions");
    if (cfg.batch < 1) throw ParameterError("run_timing: batch must be >= 1");

    TimingReport rep;
    for (const std::string& dn : cfg.decoders) {
        std::vector<double> log_n, log_t;
        for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
            const int n = cfg.sizes[si];
            BenchCode code = make_regular_code(n, 3, 6, Rng(cfg.seed).fork(si).seed());
            const int m = code.H.rows();
            const int seq = n + m;

            // one fixed batch of noisy words at a moderate operating point
            Rng rng = Rng(cfg.seed).fork(1000 + si);
            ChannelConfig channel;
            channel.coderate = static_cast<double>(code.spec.k) / n;
            const double n0 = ebno_to_n0(6.0, channel.coderate, 1, channel.symbol_energy);
            std::vector<LlrVector> llrs(static_cast<std::size_t>(cfg.batch));
            std::vector<std::uint8_t> info(static_cast<std::size_t>(code.spec.k));
            for (int b = 0; b < cfg.batch; ++b) {
                for (auto& bit : info) bit = static_cast<std::uint8_t>(rng.bit());
                const std::vector<std::uint8_t> word = encode(code.G, info);
                SymbolVector y = apply_awgn(map_bits(word, channel), n0, rng);
                llrs[static_cast<std::size_t>(b)] = demap_llr(y, n0, channel);
            }

            TimingCell cell;
            cell.decoder = dn;
            cell.n = n;
            cell.batch = cfg.batch;
            cell.repetitions = cfg.repetitions;

            std::vector<double> times;
            if (dn == "standard" || dn == "linear") {
                ModelConfig mc;
                mc.n = n;
                mc.m = m;
                mc.hidden_dim = cfg.hidden_dim;
                mc.heads = cfg.heads;
                mc.blocks = cfg.blocks;
                mc.kind = dn == "standard" ? AttentionKind::standard : AttentionKind::linear;
                mc.mask_division =
                    mc.kind == AttentionKind::linear ? (seq + cfg.proj_cols - 1) / cfg.proj_cols : 1;
                mc.ffn_expansion = 4;
                mc.seed = Rng(cfg.seed).fork(2000 + si).seed();
                Model<float> model(mc, code.H);
                cell.flops = model.forward_matmul_flops(cfg.batch);

                std::vector<float> xs;
                xs.reserve(static_cast<std::size_t>(cfg.batch) * seq);
                for (const LlrVector& llr : llrs) {
                    const DecoderInput din = build_decoder_input(llr, code.H);
                    for (double v : din.values) xs.push_back(static_cast<float>(v));
                }
                Tensor<float> x = Tensor<float>::from_data({cfg.batch, seq}, std::move(xs));

                NoGradGuard eval_only;
                (void)model.forward(x);  // warm-up, discarded
                for (int r = 0; r < cfg.repetitions; ++r) {
                    const auto t0 = Clock::now();
                    (void)model.forward(x);
                    times.push_back(seconds_between(t0, Clock::now()));
                }
            } else if (dn.rfind("bp", 0) == 0) {
                DecoderSpec spec = DecoderSpec::parse(dn);
                spec.bp_early_termination = false;  // timing fairness
                BpWorkspace ws(code.H);
                BpOptions opts;
                opts.early_termination = false;
                auto decode_all = [&]() {
                    for (const LlrVector& llr : llrs) (void)bp_decode(ws, llr, spec.bp_iterations, opts);
                };
                decode_all();  // warm-up, discarded
                for (int r = 0; r < cfg.repetitions; ++r) {
                    const auto t0 = Clock::now();
                    decode_all();
                    times.push_back(seconds_between(t0, Clock::now()));
                }
            } else {
                throw ParameterError("run_timing: unknown decoder '" + dn + "'");
            }

            std::sort(times.begin(), times.end());
            cell.median_seconds = times[times.size() / 2];
            cell.iqr_seconds = times[(3 * times.size()) / 4] - times[times.size() / 4];
            rep.cells.push_back(cell);
            log_n.push_back(std::log(static_cast<double>(n)));
            log_t.push_back(std::log(std::max(cell.median_seconds, 1e-12)));
        }
        // least-squares slope of log(time) against log(n)
        const double cnt = static_cast<double>(log_n.size());
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            mx += log_n[i];
            my += log_t[i];
        }
        mx /= cnt;
        my /= cnt;
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            sxy += (log_n[i] - mx) * (log_t[i] - my);
            sxx += (log_n[i] - mx) * (log_n[i] - mx);
        }
        rep.slopes.emplace_back(dn, sxx > 0 ? sxy / sxx : 0.0);
    }
    return rep;
}

// ---- emission ------------------------------------------------------------------------------

std::string to_csv(const BerReport& report) {
    std::ostringstream os;
    os << "decoder,n,k,ebno_db,bits,bit_errors,block_errors,ber,bler,seconds,config_hash\n";
    for (const BerPoint& p : report.points) {
        os << report.decoder << "," << report.n << "," << report.k << "," << fmt_g9(p.ebno_db) << ","
           << p.bits << "," << p.bit_errors << "," << p.block_errors << "," << fmt_g9(p.ber()) << ","
           << fmt_g9(p.bler()) << "," << fmt_g9(p.seconds) << "," << report.config_hash << "\n";
    }
    return os.str();
}

std::string to_json(const BerReport& report) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"decoder\": \"" << json_escape(report.decoder) << "\",\n";
    os << "  \"n\": " << report.n << ",\n";
    os << "  \"k\": " << report.k << ",\n";
    os << "  \"seed\": " << report.seed << ",\n";
    os << "  \"config_hash\": \"" << report.config_hash << "\",\n";
    os << "  \"calibration_ok\": " << (report.calibration_ok ? "true" : "false") << ",\n";
    os << "  \"notes\": [";
    for (std::size_t i = 0; i < report.notes.size(); ++i)
        os << (i ? ", " : "") << "\"" << json_escape(report.notes[i]) << "\"";
    os << "],\n";
    os << "  \"points\": [\n";
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        const BerPoint& p = report.points[i];
        os << "    {\"ebno_db\": " << fmt_g9(p.ebno_db) << ", \"bits\": " << p.bits
           << ", \"bit_errors\": " << p.bit_errors << ", \"blocks\": " << p.blocks
           << ", \"block_errors\": " << p.block_errors << ", \"ber\": " << fmt_g9(p.ber())
           << ", \"bler\": " << fmt_g9(p.bler()) << ", \"ber_stderr\": " << fmt_g9(p.ber_stderr())
           << ", \"seconds\": " << fmt_g9(p.seconds) << "}" << (i + 1 < report.points.size() ? "," : "")
           << "\n";
    }
    os << "  ]\n}\n";
    return os.str();
}

std::string to_csv(const TimingReport& report) {
    std::ostringstream os;
    os << "decoder,n,batch,repetitions,median_seconds,iqr_seconds,flops,slope\n";
    for (const TimingCell& c : report.cells)
        os << c.decoder << "," << c.n << "," << c.batch << "," << c.repetitions << ","
           << fmt_g9(c.median_seconds) << "," << fmt_g9(c.iqr_seconds) << "," << c.flops << ","
           << fmt_g9(report.slope(c.decoder)) << "\n";
    return os.str();
}

std::string to_json(const TimingReport& report) {
    std::ostringstream os;
    os << "{\n  \"cells\": [\n";
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const TimingCell& c = report.cells[i];
        os << "    {\"decoder\": \"" << json_escape(c.decoder) << "\", \"n\": " << c.n
           << ", \"batch\": " << c.batch << ", \"repetitions\": " << c.repetitions
           << ", \"median_seconds\": " << fmt_g9(c.median_seconds)
           << ", \"iqr_seconds\": " << fmt_g9(c.iqr_seconds) << ", \"flops\": " << c.flops << "}"
           << (i + 1 < report.cells.size() ? "," : "") << "\n";
    }
    os << "  ],\n  \"slopes\": {";
    for (std::size_t i = 0; i < report.slopes.size(); ++i)
        os << (i ? ", " : "") << "\"" << json_escape(report.slopes[i].first)
           << "\": " << fmt_g9(report.slopes[i].second);
    os << "}\n}\n";
    return os.str();
}

BerReport parse_ber_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("ber csv: empty input", 1);
    if (line != "decoder,n,k,ebno_db,bits,bit_errors,block_errors,ber,bler,seconds,config_hash")
        throw ParseError("ber csv: unexpected header", 1);
    BerReport rep;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t next = line.find(',', pos);
            fields.push_back(line.substr(pos, next == std::string::npos ? next : next - pos));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (fields.size() != 11) throw ParseError("ber csv: expected 11 fields", line_no);
        try {
            rep.decoder = fields[0];
            rep.n = std::stoi(fields[1]);
            rep.k = std::stoi(fields[2]);
            BerPoint p;
            p.ebno_db = std::stod(fields[3]);
            p.bits = std::stoull(fields[4]);
            p.bit_errors = std::stoull(fields[5]);
            p.block_errors = std::stoull(fields[6]);
            // ber and bler are re-derived from the counters; block count is
            // recovered from bler when present
            const double bler = std::stod(fields[8]);
            p.blocks = bler > 0.0 ? static_cast<std::uint64_t>(std::llround(p.block_errors / bler)) : 0;
            p.seconds = std::stod(fields[9]);
            rep.config_hash = fields[10];
            rep.points.push_back(p);
        } catch (const std::invalid_argument&) {
            throw ParseError("ber csv: malformed numeric field", line_no);
        }
    }
    return rep;
}

namespace {

void write_text(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("emit: cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw IoError("emit: write to '" + path + "' failed");
}

void check_format(const std::string& format) {
    if (format != "csv" && format != "json")
        throw ParameterError("emit: unknown format '" + format + "' (expected csv or json)");
}

}  // namespace

void emit(const BerReport& report, const std::string& format, const std::string& path) {
    check_format(format);
    write_text(format == "csv" ? to_csv(report) : to_json(report), path);
}

void emit(const TimingReport& report, const std::string& format, const std::string& path) {
    check_format(format);
    write_text(format == "csv" ? to_csv(report) : to_json(report), path);
}

}  // namespace ecctlin
