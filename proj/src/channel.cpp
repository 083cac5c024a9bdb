#include "uwbsync/channel.hpp"

#include "uwbsync/errors.hpp"
#include "uwbsync/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace uwbsync {

const char* to_string(ChannelModel m) {
    switch (m) {
    case ChannelModel::cm1: return "cm1";
    case ChannelModel::single_path: return "single_path";
    case ChannelModel::fixed: return "fixed";
    }
    return "?";
}

ChannelModel channel_model_from_string(const std::string& s) {
    if (s == "cm1") return ChannelModel::cm1;
    if (s == "single_path") return ChannelModel::single_path;
    if (s == "fixed") return ChannelModel::fixed;
    throw ConfigError("channel.model", "unknown model '" + s + "' (cm1, single_path, fixed)");
}

ChannelRealization single_path() {
    ChannelRealization ch;
    ch.model = ChannelModel::single_path;
    ch.taps = {Tap{1.0, 0.0}};
    return ch;
}

namespace {

void normalize(std::vector<Tap>& taps) {
    std::stable_sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.delay < b.delay; });
    const double t0 = taps.front().delay;
    long double e = 0.0L;
    for (auto& t : taps) {
        t.delay -= t0;
        e += static_cast<long double>(t.gain) * t.gain;
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(e));
    for (auto& t : taps) t.gain *= s;
}

} // namespace

ChannelRealization fixed_channel(std::vector<Tap> taps) {
    if (taps.empty()) throw InputError("fixed_channel: empty tap list");
    double e = 0.0;
    for (const auto& t : taps) {
        if (!std::isfinite(t.gain) || !std::isfinite(t.delay)) throw InputError("fixed_channel: non-finite tap");
        e += t.gain * t.gain;
    }
    if (!(e > 0.0)) throw InputError("fixed_channel: zero-energy tap list");
    ChannelRealization ch;
    ch.model = ChannelModel::fixed;
    ch.taps = std::move(taps);
    normalize(ch.taps);
    return ch;
}

ChannelRealization generate_cm1(std::uint64_t seed, double max_delay, const Cm1Params& p) {
    if (!(max_delay > 0.0)) throw ConfigError("channel.max_delay", "must be positive");
    const double ln10 = std::log(10.0);
    const double s1 = p.cluster_fading_db, s2 = p.ray_fading_db;
    const double mu_bias = (s1 * s1 + s2 * s2) * ln10 / 20.0;

    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(mix_seed(seed, {attempt}));
        std::vector<Tap> taps;
        for (double tc = 0.0; tc < max_delay; tc += rng.exponential(p.cluster_rate)) {
            const double xi = s1 * rng.normal();
            for (double tr = 0.0; tc + tr < max_delay; tr += rng.exponential(p.ray_rate)) {
                const double mu = -10.0 * tc / p.cluster_decay / ln10 - 10.0 * tr / p.ray_decay / ln10 - mu_bias;
                const double mag = std::pow(10.0, (mu + xi + s2 * rng.normal()) / 20.0);
                const double sign = (rng.next() >> 63) ? -1.0 : 1.0;
                taps.push_back(Tap{sign * mag, tc + tr});
            }
        }
        double e = 0.0;
        for (const auto& t : taps) e += t.gain * t.gain;
        if (taps.empty() || !(e > 0.0) || !std::isfinite(e)) {
            std::fprintf(stderr, "generate_cm1: degenerate draw (seed %llu, attempt %llu), redrawing\n",
                         static_cast<unsigned long long>(seed), static_cast<unsigned long long>(attempt));
            continue;
        }
        ChannelRealization ch;
        ch.model = ChannelModel::cm1;
        ch.seed = seed;
        ch.taps = std::move(taps);
        normalize(ch.taps);
        return ch;
    }
}

double rms_delay_spread(const ChannelRealization& ch) {
    long double e = 0, m1 = 0, m2 = 0;
    for (const auto& t : ch.taps) {
        const long double w = static_cast<long double>(t.gain) * t.gain;
        e += w;
        m1 += w * t.delay;
        m2 += w * t.delay * t.delay;
    }
    const long double mean = m1 / e;
    return static_cast<double>(std::sqrt(std::max(0.0L, m2 / e - mean * mean)));
}

double noise_variance(double snr_db, const FrameConfig& cfg) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return cfg.pulse_energy * cfg.sample_rate / (2.0 * std::pow(10.0, snr_db / 10.0));
}

namespace {

// Sum of alpha_l * x[n - D_l] over nonzero runs of x.
void add_multipath(const std::vector<double>& x, const ChannelRealization& ch, long shift, double scale,
                   const FrameConfig& cfg, std::vector<double>& out) {
    std::vector<std::pair<long, long>> runs;
    const long n = static_cast<long>(x.size());
    for (long i = 0; i < n;) {
        if (x[i] == 0.0) {
            ++i;
            continue;
        }
        long j = i;
        while (j < n && x[j] != 0.0) ++j;
        runs.emplace_back(i, j);
        i = j;
    }
    const long len = static_cast<long>(out.size());
    std::vector<std::pair<long, double>> taps;
    for (const auto& tap : ch.taps) taps.emplace_back(shift + cfg.to_samples(tap.delay), scale * tap.gain);
    // Runs outer, taps inner: the writes for one run stay in cache.
    for (const auto& [a, b] : runs) {
        for (const auto& [d, g] : taps) {
            const long lo = std::max(a, -d), hi = std::min(b, len - d);
            double* dst = out.data() + d;
            for (long i = lo; i < hi; ++i) dst[i] += g * x[i];
        }
    }
}

} // namespace

SampledWaveform propagate(const SampledWaveform& tx, const ChannelRealization& ch, const LinkParams& link,
                          const FrameConfig& cfg) {
    const double ts = cfg.symbol_duration();
    if (!(link.timing_offset >= 0.0 && link.timing_offset < ts))
        throw InputError("propagate: timing_offset outside [0, T_s)");
    if (std::isnan(link.snr_db)) throw InputError("propagate: snr_db is NaN");
    if (ch.taps.empty()) throw InputError("propagate: channel has no taps");
    const long ns = cfg.symbol_samples();
    if (tx.size() % static_cast<std::size_t>(ns) != 0)
        throw InputError("propagate: tx length is not a whole number of symbols");
    const std::size_t k = tx.size() / static_cast<std::size_t>(ns);

    SampledWaveform r;
    r.sample_rate = cfg.sample_rate;
    r.t_start = 0.0;
    r.samples.resize((k + 1) * static_cast<std::size_t>(ns));
    const double var = noise_variance(link.snr_db, cfg);
    if (var > 0.0) {
        const double sd = std::sqrt(var);
        Rng rng(link.noise_seed);
        for (auto& v : r.samples) v = sd * rng.normal();
    } else {
        std::fill(r.samples.begin(), r.samples.end(), 0.0);
    }
    if (link.signal_gain != 0.0)
        add_multipath(tx.samples, ch, cfg.to_samples(link.timing_offset), link.signal_gain, cfg, r.samples);
    return r;
}

SampledWaveform aggregate_template(const ChannelRealization& ch, const FrameConfig& cfg) {
    validate(cfg);
    FrameConfig unit = cfg;
    unit.pulse_energy = 1.0;
    const auto pt = generate_tx(SymbolSequence::fixed({0}), unit);
    double excess = 0.0;
    for (const auto& t : ch.taps) excess = std::max(excess, t.delay);
    SampledWaveform pr;
    pr.sample_rate = cfg.sample_rate;
    pr.samples.assign(pt.size() + static_cast<std::size_t>(cfg.to_samples(excess)), 0.0);
    add_multipath(pt.samples, ch, 0, 1.0, cfg, pr.samples);
    return pr;
}

PartialEnergies partial_energies(const SampledWaveform& p_R, double tau, const FrameConfig& cfg) {
    const double ts = cfg.symbol_duration();
    if (!(tau >= 0.0 && tau < ts)) throw InputError("partial_energies: tau outside [0, T_s)");
    const long ns = cfg.symbol_samples();
    const long split = ns - cfg.to_samples(tau);
    const long avail = static_cast<long>(p_R.size());
    long double a = 0.0L, b = 0.0L;
    for (long i = 0; i < std::min(ns, avail); ++i) {
        const long double v = static_cast<long double>(p_R.samples[i]) * p_R.samples[i];
        (i < split ? b : a) += v;
    }
    const long double scale = cfg.pulse_energy / static_cast<long double>(p_R.sample_rate);
    PartialEnergies e;
    e.eps_A = static_cast<double>(a * scale);
    e.eps_B = static_cast<double>(b * scale);
    e.eps_R = static_cast<double>((a + b) * scale);
    return e;
}

namespace {

// Nanosecond text for a delay in seconds: the round-trip mantissa with its
// decimal exponent moved by 9, so no binary rounding happens on the way.
std::string delay_to_ns_text(double delay) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17e", delay);
    std::string s = buf;
    const auto e = s.find('e');
    const int exp = std::stoi(s.substr(e + 1)) + 9;
    std::snprintf(buf, sizeof buf, "e%+03d", exp);
    return s.substr(0, e) + buf;
}

// Inverse of delay_to_ns_text; also takes plain decimals.
bool ns_text_to_delay(const std::string& tok, double& delay) {
    std::string s = tok;
    const auto e = s.find_first_of("eE");
    long exp = 0;
    if (e != std::string::npos) {
        char* end = nullptr;
        exp = std::strtol(s.c_str() + e + 1, &end, 10);
        if (end == s.c_str() + e + 1 || *end != '\0') return false;
        s.resize(e);
    }
    s += "e" + std::to_string(exp - 9);
    char* end = nullptr;
    delay = std::strtod(s.c_str(), &end);
    return end != s.c_str() && *end == '\0' && std::isfinite(delay);
}

} // namespace

void write_taps(std::ostream& os, const ChannelRealization& ch) {
    char buf[96];
    os << "# uwbsync tap list\n";
    os << "# model " << to_string(ch.model) << " seed " << ch.seed << "\n";
    os << "# delay_ns gain\n";
    for (const auto& t : ch.taps) {
        std::snprintf(buf, sizeof buf, " %.17g\n", t.gain);
        os << delay_to_ns_text(t.delay) << buf;
    }
}

ChannelRealization read_taps(std::istream& is) {
    ChannelRealization ch;
    ch.model = ChannelModel::fixed;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word, model;
            hs >> word;
            if (word == "model") {
                std::uint64_t seed = 0;
                std::string seed_word;
                hs >> model >> seed_word >> seed;
                if (hs) {
                    ch.model = channel_model_from_string(model);
                    ch.seed = seed;
                }
            }
            continue;
        }
        std::istringstream ls(line);
        std::string dt, gt, extra;
        double d = 0.0, g = 0.0;
        char* end = nullptr;
        const bool ok = static_cast<bool>(ls >> dt >> gt) && !(ls >> extra) && ns_text_to_delay(dt, d) &&
                        (g = std::strtod(gt.c_str(), &end), *end == '\0');
        if (!ok) throw InputError("tap list line " + std::to_string(lineno) + ": expected 'delay_ns gain'");
        ch.taps.push_back(Tap{g, d});
    }
    if (ch.taps.empty()) throw InputError("tap list has no taps");
    return ch;
}

void save_taps(const std::string& path, const ChannelRealization& ch) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    write_taps(os, ch);
}

ChannelRealization load_taps(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path);
    return read_taps(is);
}

} // namespace uwbsync
