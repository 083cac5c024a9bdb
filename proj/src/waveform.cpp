#include "uwbsync/waveform.hpp"

#include "uwbsync/errors.hpp"
#include "uwbsync/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace uwbsync {

namespace {

long grid_count(double t, double fs) { return std::lround(t * fs); }

bool on_grid(double t, double fs) {
    const double x = t * fs;
    return std::abs(x - std::round(x)) <= 1e-6 * std::max(1.0, std::abs(x));
}

void require_grid(const char* key, double t, double fs, bool allow_zero) {
    if (!std::isfinite(t) || t < 0.0 || (!allow_zero && t <= 0.0))
        throw ConfigError(key, "must be " + std::string(allow_zero ? "non-negative" : "positive"));
    if (!on_grid(t, fs))
        throw ConfigError(key, "grid alignment violated: value * sample_rate must be an integer");
    if (!allow_zero && grid_count(t, fs) < 1)
        throw ConfigError(key, "grid alignment violated: value * sample_rate must be a positive integer");
}

} // namespace

long FrameConfig::frame_samples() const { return grid_count(frame_duration, sample_rate); }
long FrameConfig::chip_samples() const { return grid_count(chip_duration, sample_rate); }
long FrameConfig::shift_samples() const { return grid_count(ppm_shift, sample_rate); }
long FrameConfig::pulse_samples() const { return grid_count(pulse_duration, sample_rate); }
long FrameConfig::to_samples(double t) const { return grid_count(t, sample_rate); }

bool operator==(const FrameConfig& a, const FrameConfig& b) {
    return a.n_frames_per_symbol == b.n_frames_per_symbol && a.frame_duration == b.frame_duration &&
           a.chip_duration == b.chip_duration && a.n_chips == b.n_chips && a.ppm_shift == b.ppm_shift &&
           a.pulse_duration == b.pulse_duration && a.pulse_energy == b.pulse_energy &&
           a.th_code == b.th_code && a.sample_rate == b.sample_rate;
}

void validate(const FrameConfig& cfg, bool require_code) {
    if (cfg.n_frames_per_symbol < 1) throw ConfigError("frame.n_frames_per_symbol", "must be >= 1");
    if (cfg.n_chips < 1) throw ConfigError("frame.n_chips", "must be >= 1");
    if (!(cfg.sample_rate > 0.0) || !std::isfinite(cfg.sample_rate))
        throw ConfigError("frame.sample_rate", "must be positive");
    if (!(cfg.pulse_energy > 0.0) || !std::isfinite(cfg.pulse_energy))
        throw ConfigError("frame.pulse_energy", "must be positive");
    require_grid("frame.chip_duration", cfg.chip_duration, cfg.sample_rate, false);
    require_grid("frame.frame_duration", cfg.frame_duration, cfg.sample_rate, false);
    require_grid("frame.pulse_duration", cfg.pulse_duration, cfg.sample_rate, false);
    require_grid("frame.ppm_shift", cfg.ppm_shift, cfg.sample_rate, true);

    if (cfg.th_code.empty() && !require_code) return;
    if (cfg.th_code.size() != static_cast<std::size_t>(cfg.n_frames_per_symbol))
        throw ConfigError("frame.th_code", "length must equal n_frames_per_symbol");
    for (int c : cfg.th_code)
        if (c < 0 || c >= cfg.n_chips) throw ConfigError("frame.th_code", "chip index outside [0, n_chips-1]");
    if (!th_code_valid(cfg.th_code, cfg))
        throw ConfigError("frame.th_code", "pulse leaks out of its frame (c*T_c + ppm_shift + T_p > T_f)");
}

double SampledWaveform::energy() const {
    long double acc = 0.0L;
    for (double v : samples) acc += static_cast<long double>(v) * v;
    return static_cast<double>(acc / sample_rate);
}

SymbolSequence SymbolSequence::random(std::uint64_t seed, std::size_t count) {
    SymbolSequence s;
    s.source = BitSource::random;
    s.seed = seed;
    Rng rng(seed);
    s.bits.resize(count);
    for (auto& b : s.bits) b = static_cast<int>(rng.next() >> 63);
    return s;
}

SymbolSequence SymbolSequence::training(std::size_t count) {
    SymbolSequence s;
    s.source = BitSource::training_pattern;
    s.bits.resize(count);
    for (std::size_t k = 0; k < count; ++k) s.bits[k] = static_cast<int>((k + 1) % 2);
    return s;
}

SymbolSequence SymbolSequence::fixed(std::vector<int> bits) {
    SymbolSequence s;
    s.source = BitSource::fixed;
    s.bits = std::move(bits);
    return s;
}

Monocycle::Monocycle(double pulse_duration, double sample_rate)
    : tp_(pulse_duration), fs_(sample_rate), tau_m_(pulse_duration / 2.5) {
    if (!(pulse_duration > 0.0)) throw ConfigError("frame.pulse_duration", "must be positive");
    if (!(sample_rate > 0.0)) throw ConfigError("frame.sample_rate", "must be positive");
    long double e = 0.0L;
    const long n = grid_count(tp_, fs_);
    for (long i = 0; i < n; ++i) {
        const double v = shape(i / fs_);
        e += static_cast<long double>(v) * v;
    }
    amp_ = 1.0 / std::sqrt(static_cast<double>(e / fs_));
}

double Monocycle::shape(double t) const {
    const double u = t - 0.5 * tp_;
    const double a = u * u / (tau_m_ * tau_m_);
    return (1.0 - 4.0 * std::numbers::pi * a) * std::exp(-2.0 * std::numbers::pi * a);
}

double Monocycle::operator()(double t) const {
    if (t < 0.0 || t >= tp_) return 0.0;
    return amp_ * shape(t);
}

std::vector<double> Monocycle::sampled() const {
    const long n = grid_count(tp_, fs_);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) p[i] = amp_ * shape(i / fs_);
    return p;
}

double monocycle(double t, double pulse_duration, double sample_rate) {
    return Monocycle(pulse_duration, sample_rate)(t);
}

std::vector<int> make_th_code(std::uint64_t seed, const FrameConfig& cfg) {
    if (cfg.n_chips < 1) throw ConfigError("frame.n_chips", "must be >= 1");
    if (cfg.n_frames_per_symbol < 1) throw ConfigError("frame.n_frames_per_symbol", "must be >= 1");
    Rng rng(seed);
    std::vector<int> code(static_cast<std::size_t>(cfg.n_frames_per_symbol));
    for (auto& c : code) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_chips)));
    return code;
}

bool th_code_valid(const std::vector<int>& code, const FrameConfig& cfg) {
    const long nf = cfg.frame_samples(), nc = cfg.chip_samples();
    const long nd = cfg.shift_samples(), np = cfg.pulse_samples();
    for (int c : code) {
        if (c < 0 || c >= cfg.n_chips) return false;
        if (c * nc + nd + np > nf) return false;
    }
    return true;
}

std::vector<long> pulse_offsets(const FrameConfig& cfg) {
    std::vector<long> off(cfg.th_code.size());
    for (std::size_t i = 0; i < off.size(); ++i)
        off[i] = static_cast<long>(i) * cfg.frame_samples() + cfg.th_code[i] * cfg.chip_samples();
    return off;
}

SampledWaveform generate_tx(const SymbolSequence& symbols, const FrameConfig& cfg) {
    validate(cfg);
    if (symbols.bits.empty()) throw InputError("generate_tx: empty symbol sequence");
    for (int b : symbols.bits)
        if (b != 0 && b != 1) throw InputError("generate_tx: symbol bit outside {0,1}");

    const auto pulse = Monocycle(cfg.pulse_duration, cfg.sample_rate).sampled();
    const double gain = std::sqrt(cfg.pulse_energy);
    const long ns = cfg.symbol_samples();
    const long nd = cfg.shift_samples();
    const auto offsets = pulse_offsets(cfg);

    SampledWaveform w;
    w.sample_rate = cfg.sample_rate;
    w.samples.assign(static_cast<std::size_t>(ns) * symbols.bits.size(), 0.0);
    for (std::size_t k = 0; k < symbols.bits.size(); ++k) {
        const long base = static_cast<long>(k) * ns + symbols.bits[k] * nd;
        for (long off : offsets) {
            double* dst = w.samples.data() + base + off;
            for (std::size_t j = 0; j < pulse.size(); ++j) dst[j] += gain * pulse[j];
        }
    }
    return w;
}

} // namespace uwbsync
