#include "uwbsync/sync.hpp"

#include "uwbsync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace uwbsync {

const char* to_string(SyncMode m) { return m == SyncMode::nda ? "nda" : "da"; }

const char* to_string(FineMethod m) {
    switch (m) {
    case FineMethod::pulse_edge: return "pulse_edge";
    case FineMethod::pulse_window: return "pulse_window";
    case FineMethod::symbol_lag: return "symbol_lag";
    case FineMethod::frame_lag: return "frame_lag";
    }
    return "?";
}

SyncMode sync_mode_from_string(const std::string& s) {
    if (s == "nda") return SyncMode::nda;
    if (s == "da") return SyncMode::da;
    throw ConfigError("mode", "unknown mode '" + s + "' (nda, da)");
}

FineMethod fine_method_from_string(const std::string& s) {
    if (s == "pulse_edge") return FineMethod::pulse_edge;
    if (s == "pulse_window") return FineMethod::pulse_window;
    if (s == "symbol_lag") return FineMethod::symbol_lag;
    if (s == "frame_lag") return FineMethod::frame_lag;
    throw ConfigError("fine.method", "unknown method '" + s + "' (pulse_edge, pulse_window, symbol_lag, frame_lag)");
}

int FineConfig::half_width() const {
    const double q = t_corr / fine_step;
    return std::max(1, static_cast<int>(std::ceil(q - 1e-9)));
}

bool operator==(const CoarseConfig& a, const CoarseConfig& b) {
    return a.n_symbols == b.n_symbols && a.mode == b.mode && a.search_step == b.search_step &&
           a.segment_origin == b.segment_origin && a.edge_tolerance == b.edge_tolerance &&
           a.noise_margin == b.noise_margin;
}

bool operator==(const FineConfig& a, const FineConfig& b) {
    return a.t_corr == b.t_corr && a.fine_step == b.fine_step && a.n_frames_avg == b.n_frames_avg &&
           a.method == b.method && a.segment_origin == b.segment_origin && a.edge_tolerance == b.edge_tolerance;
}

void validate(const CoarseConfig& cc, const FrameConfig& cfg) {
    if (cc.n_symbols < 1) throw ConfigError("coarse.n_symbols", "must be >= 1");
    const double ts = cfg.symbol_duration();
    if (!(cc.search_step > 0.0) || cc.search_step > ts)
        throw ConfigError("coarse.search_step", "must satisfy 0 < search_step <= T_s");
    const double q = cc.search_step * cfg.sample_rate;
    if (std::abs(q - std::round(q)) > 1e-6 * q)
        throw ConfigError("coarse.search_step", "grid alignment violated: search_step * sample_rate must be an integer");
    if (cfg.symbol_samples() % cfg.to_samples(cc.search_step) != 0)
        throw ConfigError("coarse.search_step", "T_s / search_step must be an integer");
    if (!(cc.edge_tolerance >= 0.0 && cc.edge_tolerance < 1.0))
        throw ConfigError("coarse.edge_tolerance", "must lie in [0, 1)");
    if (!(cc.noise_margin >= 0.0 && std::isfinite(cc.noise_margin)))
        throw ConfigError("coarse.noise_margin", "must be finite and >= 0");
    if (!std::isfinite(cc.segment_origin)) throw ConfigError("coarse.segment_origin", "must be finite");
}

void validate(const FineConfig& fc, const FrameConfig& /*cfg*/) {
    if (!(fc.fine_step > 0.0) || !std::isfinite(fc.fine_step)) throw ConfigError("fine.fine_step", "must be positive");
    if (!(fc.t_corr >= 0.0) || !std::isfinite(fc.t_corr)) throw ConfigError("fine.t_corr", "must be non-negative");
    if (fc.n_frames_avg < 0) throw ConfigError("fine.n_frames_avg", "must be >= 1 (0 selects all observed frames)");
    if (!(fc.edge_tolerance >= 0.0 && fc.edge_tolerance < 1.0))
        throw ConfigError("fine.edge_tolerance", "must lie in [0, 1)");
    if (!std::isfinite(fc.segment_origin)) throw ConfigError("fine.segment_origin", "must be finite");
}

namespace {

long start_index(const SampledWaveform& r, double t) { return std::lround((t - r.t_start) * r.sample_rate); }

void require_span(const SampledWaveform& r, long lo, long hi, const char* who) {
    if (lo < 0 || hi > static_cast<long>(r.size()))
        throw InputError(std::string(who) + ": record too short for the requested window");
}

double wrap(double t, double period) {
    double v = std::fmod(t, period);
    if (v < 0.0) v += period;
    if (v >= period) v = 0.0;
    return v;
}

// Running sums of q(u) = r[u + ns] * (r[u + d] - r[u - d]) for u in [lo, lo + len).
void dirty_prefix(const double* r, long lo, long len, long ns, long d, std::vector<double>& p) {
    p.resize(static_cast<std::size_t>(len) + 1);
    double acc = 0.0;
    p[0] = 0.0;
    const double* a = r + lo;
    for (long i = 0; i < len; ++i) {
        acc += a[i + ns] * (a[i + d] - a[i - d]);
        p[i + 1] = acc;
    }
}

// Running sums of y(u) = r[u + lag] * r[u].
void lag_prefix(const double* r, long lo, long len, long lag, std::vector<double>& p) {
    p.resize(static_cast<std::size_t>(len) + 1);
    double acc = 0.0;
    p[0] = 0.0;
    const double* a = r + lo;
    for (long i = 0; i < len; ++i) {
        acc += a[i + lag] * a[i];
        p[i + 1] = acc;
    }
}

} // namespace

SampledWaveform difference_template(const SampledWaveform& r, long k, double tau, double symbol_duration,
                                    double ppm_shift) {
    const long ns = std::lround(symbol_duration * r.sample_rate);
    const long d = std::lround(ppm_shift * r.sample_rate);
    const long a = start_index(r, k * symbol_duration + tau);
    require_span(r, a - d, a + ns + d, "difference_template");
    SampledWaveform out;
    out.sample_rate = r.sample_rate;
    out.t_start = k * symbol_duration + tau;
    out.samples.resize(static_cast<std::size_t>(ns));
    for (long t = 0; t < ns; ++t) out.samples[t] = r.samples[a + t + d] - r.samples[a + t - d];
    return out;
}

SampledWaveform difference_template(const SampledWaveform& r, long k, double tau, const FrameConfig& cfg) {
    return difference_template(r, k, tau, cfg.symbol_duration(), cfg.ppm_shift);
}

double dirty_correlation(const SampledWaveform& r, long k, double tau, const FrameConfig& cfg) {
    const long ns = cfg.symbol_samples();
    const long d = cfg.shift_samples();
    const long a = start_index(r, k * cfg.symbol_duration() + tau);
    require_span(r, a - d, a + 2 * ns + d, "dirty_correlation");
    const double* x = r.samples.data();
    long double acc = 0.0L;
    for (long t = 0; t < ns; ++t)
        acc += static_cast<long double>(x[a + ns + t]) * (x[a + t + d] - x[a + t - d]);
    return static_cast<double>(acc / r.sample_rate);
}

int training_pattern(long k) { return static_cast<int>((k + 1) % 2); }

std::size_t leading_edge(const std::vector<double>& v, double tol, bool circular, std::size_t fallback) {
    if (v.empty()) return fallback;
    const auto it = std::max_element(v.begin(), v.end());
    const double vmax = *it;
    if (!(vmax > 0.0)) return fallback;
    const double floor = (1.0 - tol) * vmax;
    const std::size_t n = v.size();
    std::size_t i = static_cast<std::size_t>(it - v.begin());
    for (std::size_t steps = 1; steps < n; ++steps) {
        std::size_t next = i + 1;
        if (next == n) {
            if (!circular) break;
            next = 0;
        }
        if (v[next] < floor) break;
        i = next;
    }
    return i;
}

std::size_t rightmost_near_max(const std::vector<double>& v, double tol, std::size_t fallback) {
    if (v.empty()) return fallback;
    const double vmax = *std::max_element(v.begin(), v.end());
    if (!(vmax > 0.0)) return fallback;
    const double floor = (1.0 - tol) * vmax;
    std::size_t i = v.size() - 1;
    while (v[i] < floor) --i;
    return i;
}

CoarseResult coarse_sync(const SampledWaveform& r, const FrameConfig& cfg, const CoarseConfig& cc) {
    validate(cfg);
    validate(cc, cfg);
    const long ns = cfg.symbol_samples();
    const long d = cfg.shift_samples();
    const long step = cfg.to_samples(cc.search_step);
    const long grid = ns / step;
    const long m_pairs = cc.n_symbols;
    const long o = start_index(r, cc.segment_origin);
    if (o - d < 0 || o + 2 * (m_pairs - 1) * ns + 3 * ns + d > static_cast<long>(r.size()))
        throw InputError("coarse_sync: record holds fewer than 2M+2 symbols past the segment origin");

    std::vector<long double> acc(static_cast<std::size_t>(grid), 0.0L);
    std::vector<double> p;
    const long double inv_fs = 1.0L / r.sample_rate;
    for (long m = 0; m < m_pairs; ++m) {
        dirty_prefix(r.samples.data(), o + 2 * m * ns, 2 * ns, ns, d, p);
        for (long j = 0; j < grid; ++j) {
            const long a = j * step;
            const long double x = (p[a + ns] - p[a]) * inv_fs;
            acc[j] += cc.mode == SyncMode::nda ? x * x : x;
        }
    }

    CoarseResult res;
    res.objective.resize(static_cast<std::size_t>(grid));
    for (long j = 0; j < grid; ++j) {
        const long double mean = acc[j] / m_pairs;
        res.objective[j] = static_cast<double>(cc.mode == SyncMode::nda ? mean : mean * mean);
    }

    // Noise variance from a fourth difference; the pulse has almost no energy near
    // Nyquist, so the filtered record is noise. Gain of (1 - z^-1)^4 is 70.
    const long lo = o - d, hi = o + 2 * m_pairs * ns + d;
    long double e4 = 0.0L;
    for (long n = lo; n + 4 < hi; ++n) {
        const double* q = r.samples.data() + n;
        const long double y = q[0] - 4.0L * q[1] + 6.0L * q[2] - 4.0L * q[3] + q[4];
        e4 += y * y;
    }
    res.noise_var = static_cast<double>(e4 / (70.0L * (hi - lo - 4)));

    // Noise s.d. of the objective between candidates one frame apart, relative to the peak.
    // Capped at one frame's share: a larger drop means a whole frame has left the window.
    const double peak = *std::max_element(res.objective.begin(), res.objective.end());
    res.tolerance = cc.edge_tolerance;
    if (cc.noise_margin > 0.0 && peak > 0.0) {
        const double fs = r.sample_rate, s2 = res.noise_var;
        const double energy = std::sqrt(peak);
        const double var_x = 4.0 * s2 * energy / fs + 2.0 * ns * s2 * s2 / (fs * fs);
        const double sd_diff = std::sqrt(var_x * 2.0 * cfg.frame_samples() / ns);
        const double rel = 2.0 * sd_diff / std::sqrt(m_pairs * peak);
        res.tolerance = std::max(cc.edge_tolerance, std::min(cc.noise_margin * rel, 1.0 / cfg.n_frames_per_symbol));
    }
    const std::size_t j = leading_edge(res.objective, res.tolerance, true, 0);
    res.tau_edge = static_cast<double>(j * step) / cfg.sample_rate;

    const double first_chip = cfg.th_code.empty() ? 0.0 : cfg.th_code[0] * cfg.chip_duration;
    const double t = cc.segment_origin + res.tau_edge - first_chip;
    res.tau1 = wrap(t, cfg.symbol_duration());
    return res;
}

FineResult fine_sync(const SampledWaveform& r, double tau1, const FrameConfig& cfg, const FineConfig& fc) {
    validate(cfg);
    validate(fc, cfg);
    const double ts = cfg.symbol_duration();
    if (!(tau1 >= 0.0 && tau1 < ts)) throw InputError("fine_sync: tau1 outside [0, T_s)");
    if (fc.n_frames_avg < 1) throw ConfigError("fine.n_frames_avg", "must be >= 1");

    const long ns = cfg.symbol_samples();
    const long nf = cfg.frame_samples();
    const long d = cfg.shift_samples();
    const long w = cfg.to_samples(fc.t_corr);
    const int nh = fc.half_width();
    const long n_cand = 2L * nh - 1;
    const long frames = fc.n_frames_avg;
    const long per_symbol = cfg.n_frames_per_symbol;

    std::vector<long> off(static_cast<std::size_t>(n_cand));
    for (long i = 0; i < n_cand; ++i) off[i] = std::lround((i - (nh - 1)) * fc.fine_step * cfg.sample_rate);
    const long reach_lo = -off.front(), reach_hi = off.back();

    // First symbol start at or after the observation origin.
    const long o = start_index(r, fc.segment_origin);
    const long t1 = cfg.to_samples(tau1);
    const long b0 = o + ((t1 - o) % ns + ns) % ns;

    FineResult res;
    res.objective.assign(static_cast<std::size_t>(n_cand), 0.0);
    std::vector<double> p;
    const long double inv_fs = 1.0L / r.sample_rate;

    if (fc.method == FineMethod::pulse_window || fc.method == FineMethod::pulse_edge) {
        const bool edge = fc.method == FineMethod::pulse_edge;
        const auto phase = pulse_offsets(cfg);
        // A frame's window stops where the next frame's window starts, so no
        // sample is counted twice at one candidate.
        std::vector<long> window_cap(phase.size(), w), back_cap(phase.size(), w);
        for (std::size_t j = 0; j + 1 < phase.size(); ++j) window_cap[j] = phase[j + 1] - phase[j];
        // The window before a pulse stops short of the previous frame's pulse.
        const long np = cfg.pulse_samples();
        back_cap[0] = std::clamp(ns + phase[0] - phase.back() - np, 0L, w);
        for (std::size_t j = 1; j < phase.size(); ++j) back_cap[j] = std::clamp(phase[j] - phase[j - 1] - np, 0L, w);
        const long back = edge ? w : 0;
        const long pairs = (frames + per_symbol - 1) / per_symbol;
        const long lo_rel = -reach_lo - back;
        const long len = ns + reach_lo + back + reach_hi + w + d;
        std::vector<long double> zsum(static_cast<std::size_t>(n_cand), 0.0L);
        for (long pp = 0; pp < pairs; ++pp) {
            const long base = b0 + 2 * pp * ns;
            const long lo = base + lo_rel;
            require_span(r, lo - d, lo + len + ns + d, "fine_sync");
            dirty_prefix(r.samples.data(), lo, len, ns, d, p);
            const long nfr = std::min(per_symbol, frames - pp * per_symbol);
            // Pair polarity: (1,0) pairs put positive energy at the pulse,
            // (0,1) pairs put negative energy one PPM shift later.
            const bool positive = p[len] - p[0] >= 0.0;
            const long sh = positive ? 0 : d;
            const long double sign = positive ? 1.0L : -1.0L;
            for (long i = 0; i < n_cand; ++i) {
                long double z = 0.0L;
                for (long jf = 0; jf < nfr; ++jf) {
                    const long a = off[i] + phase[jf] - lo_rel + sh;
                    z += sign * (p[a + std::min(w, window_cap[jf])] - p[a]);
                    // Before the edge only same-polarity energy counts against
                    // it; the opposite sign comes from the neighbouring pair.
                    if (edge) z -= std::max(0.0L, sign * (p[a] - p[a - back_cap[jf]]));
                }
                zsum[i] += z * inv_fs;
            }
        }
        for (long i = 0; i < n_cand; ++i) res.objective[i] = static_cast<double>(zsum[i]);
    } else if (fc.method == FineMethod::symbol_lag) {
        const long terms = (frames + per_symbol - 1) / per_symbol;
        std::vector<long double> zsum(static_cast<std::size_t>(n_cand), 0.0L);
        for (long k = 0; k < terms; ++k) {
            const long lo = b0 + k * ns - reach_lo;
            const long len = ns + reach_lo + reach_hi;
            require_span(r, lo, lo + len + ns, "fine_sync");
            lag_prefix(r.samples.data(), lo, len, ns, p);
            for (long i = 0; i < n_cand; ++i) {
                const long a = off[i] + reach_lo;
                zsum[i] += std::fabs((p[a + ns] - p[a]) * inv_fs);
            }
        }
        for (long i = 0; i < n_cand; ++i) res.objective[i] = static_cast<double>(zsum[i]);
    } else {
        const long lo = b0 + nf - reach_lo;
        const long len = frames * nf + reach_lo + reach_hi + w;
        require_span(r, lo - nf, lo + len, "fine_sync");
        lag_prefix(r.samples.data(), lo - nf, len, nf, p);
        for (long i = 0; i < n_cand; ++i) {
            long double z = 0.0L;
            for (long j = 0; j < frames; ++j) {
                const long a = off[i] + reach_lo + j * nf;
                z += std::fabs((p[a + w] - p[a]) * inv_fs);
            }
            res.objective[i] = static_cast<double>(z);
        }
    }

    const std::size_t i = rightmost_near_max(res.objective, fc.edge_tolerance, static_cast<std::size_t>(nh - 1));
    res.n_opt = static_cast<int>(i) - (nh - 1);
    res.tau2 = wrap(tau1 + res.n_opt * fc.fine_step, ts);
    return res;
}

SyncEstimate two_floor_sync(const SampledWaveform& r, const FrameConfig& cfg, const CoarseConfig& cc,
                            const FineConfig& fc) {
    const auto c = coarse_sync(r, cfg, cc);
    FineConfig f = fc;
    f.segment_origin = cc.segment_origin;
    if (f.n_frames_avg == 0) f.n_frames_avg = cc.n_symbols * cfg.n_frames_per_symbol;
    const auto fr = fine_sync(r, c.tau1, cfg, f);

    SyncEstimate est;
    est.tau1 = c.tau1;
    est.tau_edge = c.tau_edge;
    est.coarse_tolerance = c.tolerance;
    est.tau2 = fr.tau2;
    est.n_opt = fr.n_opt;
    est.coarse_objective = c.objective;
    est.fine_objective = fr.objective;
    return est;
}

void write_coarse_objective(std::ostream& os, const SyncEstimate& est, const CoarseConfig& cc) {
    char buf[96];
    os << "# tau_ns objective\n";
    for (std::size_t j = 0; j < est.coarse_objective.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.6f %.17g\n", j * cc.search_step * 1e9, est.coarse_objective[j]);
        os << buf;
    }
}

void write_fine_objective(std::ostream& os, const SyncEstimate& est, const FineConfig& fc) {
    char buf[96];
    const int nh = static_cast<int>((est.fine_objective.size() + 1) / 2);
    os << "# n objective (offset = n * " << fc.fine_step * 1e9 << " ns)\n";
    for (std::size_t i = 0; i < est.fine_objective.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d %.17g\n", static_cast<int>(i) - (nh - 1), est.fine_objective[i]);
        os << buf;
    }
}

} // namespace uwbsync
