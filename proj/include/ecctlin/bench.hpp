// SPDX-License-Identifier: Apache-2.0
#pragma once

// Monte-Carlo BER/BLER harness, decoder timing comparison, and report
// emission (CSV/JSON) with config hashing for provenance.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ecctlin/channel.hpp"
#include "ecctlin/codes.hpp"
#include "ecctlin/rng.hpp"

namespace ecctlin {

// A constructed code bundled with its provenance.
struct BenchCode {
    CodeSpec spec;
    ParityCheckMatrix H;
    GeneratorMatrix G;
};

BenchCode make_regular_code(int n, int v, int c, std::uint64_t seed);
BenchCode make_lifted_code(const Protograph& base, int lifting);
BenchCode make_imported_code(ParityCheckMatrix H);

// What decodes: raw hard decisions, belief propagation, or a trained model
// loaded from a checkpoint.
struct DecoderSpec {
    enum class Kind { uncoded, bp, model };
    Kind kind = Kind::uncoded;
    int bp_iterations = 1;
    bool bp_early_termination = true;
    std::string checkpoint_path;

    // "uncoded", "bp:ITERS", or a checkpoint path
    static DecoderSpec parse(const std::string& text);
    std::string name() const;
};

// Batch decoder abstraction for the harness: LLR words in, hard bits out.
class Decoder {
  public:
    virtual ~Decoder() = default;
    virtual std::string name() const = 0;
    virtual int block_length() const = 0;
    virtual std::vector<std::uint8_t> decode(const std::vector<LlrVector>& llrs) = 0;
};

// For model decoders the code in the checkpoint must match H.
std::unique_ptr<Decoder> make_decoder(const DecoderSpec& spec, const ParityCheckMatrix& H);

struct StopRule {
    std::uint64_t min_errors = 100;
    std::uint64_t max_bits = 10'000'000;
    double max_seconds = 60.0;  // wall cap per Eb/N0 point
};

struct BerPoint {
    double ebno_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t blocks = 0;
    std::uint64_t block_errors = 0;
    double seconds = 0.0;  // decode-call wall clock only

    double ber() const { return bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0; }
    double bler() const {
        return blocks ? static_cast<double>(block_errors) / static_cast<double>(blocks) : 0.0;
    }
    double ber_stderr() const;
};

struct BerReport {
    std::string decoder;
    int n = 0;
    int k = 0;
    std::uint64_t seed = 0;
    std::string config_hash;  // 16 hex digits (FNV-1a over the full config)
    bool calibration_ok = true;
    std::vector<std::string> notes;
    std::vector<BerPoint> points;
};

struct BerRunConfig {
    DecoderSpec decoder;
    ChannelConfig channel;
    std::vector<double> ebno_db;
    StopRule stop;
    std::uint64_t seed = 1;
    int batch = 32;
    int uncoded_block_bits = 1024;  // word size when no code is involved
};

// Streams encode -> channel -> decode -> compare batches per point until the
// stop rule fires. Deterministic in (seed, config); channel randomness is
// forked per point, so different decoders at the same seed see identical
// transmissions. `code` may be null only for the uncoded decoder.
BerReport run_ber(const BerRunConfig& cfg, const BenchCode* code);

// Quick uncoded-BPSK probe against the closed-form Q(sqrt(2 Eb/N0)); gates
// the validity flag on every report.
bool calibrate_uncoded(std::uint64_t seed);

// ---- timing ---------------------------------------------------------------------

struct TimingConfig {
    std::vector<int> sizes{128, 256, 512, 1024};  // code lengths, (v=3,c=6) regular
    std::vector<std::string> decoders{"standard", "linear", "bp:1"};
    int batch = 2;
    int repetitions = 9;  // timed repetitions after one discarded warm-up
    int hidden_dim = 16;
    int heads = 2;
    int blocks = 2;
    int proj_cols = 64;  // fixed low-rank width K for linear attention
    std::uint64_t seed = 7;
};

struct TimingCell {
    std::string decoder;
    int n = 0;
    int batch = 0;
    int repetitions = 0;
    double median_seconds = 0.0;
    double iqr_seconds = 0.0;
    std::uint64_t flops = 0;  // analytic matmul work per forward batch (0 for bp)
};

struct TimingReport {
    std::vector<TimingCell> cells;
    std::vector<std::pair<std::string, double>> slopes;  // log-log time vs n per decoder
    double slope(const std::string& decoder) const;
};

TimingReport run_timing(const TimingConfig& cfg);

// ---- emission ---------------------------------------------------------------------

// Exact column layout:
// decoder,n,k,ebno_db,bits,bit_errors,block_errors,ber,bler,seconds,config_hash
// Floats carry 9 significant digits.
std::string to_csv(const BerReport& report);
std::string to_json(const BerReport& report);  // adds ber_stderr and metadata
std::string to_csv(const TimingReport& report);
std::string to_json(const TimingReport& report);
BerReport parse_ber_csv(const std::string& text);

// format "csv" or "json"; empty path writes to stdout.
void emit(const BerReport& report, const std::string& format, const std::string& path);
void emit(const TimingReport& report, const std::string& format, const std::string& path);

std::uint64_t fnv1a(const std::string& text);
std::string hash_hex(std::uint64_t h);

// ---- command line -----------------------------------------------------------------

// Subcommands: train, ber, timing, makecode, gradcheck.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int cli_main(int argc, const char* const* argv);

}  // namespace ecctlin
