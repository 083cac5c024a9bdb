#pragma once

#include "uwbsync/waveform.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace uwbsync {

enum class SyncMode { nda, da };

// Fine-floor statistic.
//   pulse_edge:   per frame, dirty-template product energy in the T_corr
//                 window after the candidate minus the T_corr window
//                 before it, summed over frames, |.| per symbol pair.
//   pulse_window: as pulse_edge without the preceding window.
//   symbol_lag:   T_s window, product of r with its T_s-lagged copy.
//   frame_lag:    T_corr window, product of r with its T_f-lagged copy.
enum class FineMethod { pulse_edge, pulse_window, symbol_lag, frame_lag };

const char* to_string(SyncMode m);
const char* to_string(FineMethod m);
SyncMode sync_mode_from_string(const std::string& s);     // throws ConfigError
FineMethod fine_method_from_string(const std::string& s); // throws ConfigError

struct CoarseConfig {
    int n_symbols = 16;          // M, segment pairs averaged
    SyncMode mode = SyncMode::nda;
    double search_step = 0.5e-9; // grid over [0, T_s)
    double segment_origin = 0.0; // absolute time of segment 0 at tau = 0
    double edge_tolerance = 1e-3; // relative; floor of the walk tolerance
    double noise_margin = 3.0;    // z; tolerance grows with the estimated noise, 0 disables
};

struct FineConfig {
    double t_corr = 4e-9;        // scan half-width and window width
    double fine_step = 0.25e-9;
    int n_frames_avg = 0;        // K frames; 0 = all frames of the coarse observation
    FineMethod method = FineMethod::pulse_edge;
    double segment_origin = 0.0; // observation start; two_floor_sync copies the coarse one
    double edge_tolerance = 1e-3;

    int half_width() const; // N = max(1, ceil(t_corr / fine_step))
};

bool operator==(const CoarseConfig& a, const CoarseConfig& b);
bool operator==(const FineConfig& a, const FineConfig& b);

void validate(const CoarseConfig& cc, const FrameConfig& cfg);
void validate(const FineConfig& fc, const FrameConfig& cfg);

struct CoarseResult {
    double tau1 = 0.0;     // symbol-start estimate in [0, T_s)
    double tau_edge = 0.0; // selected segment offset on the search grid
    double noise_var = 0.0; // per-sample noise variance estimate
    double tolerance = 0.0; // relative tolerance used by the walk
    std::vector<double> objective;
};

struct FineResult {
    double tau2 = 0.0;
    int n_opt = 0;
    std::vector<double> objective; // index i <-> n = i - (N - 1)
};

struct SyncEstimate {
    double tau1 = 0.0;
    double tau2 = 0.0;
    double tau_edge = 0.0;
    double coarse_tolerance = 0.0;
    int n_opt = 0;
    std::vector<double> coarse_objective;
    std::vector<double> fine_objective;
};

// r_k(t + delta) - r_k(t - delta) on t in [0, T_s), where r_k(t) = r(t + k T_s + tau).
SampledWaveform difference_template(const SampledWaveform& r, long k, double tau, double symbol_duration,
                                    double ppm_shift);
SampledWaveform difference_template(const SampledWaveform& r, long k, double tau, const FrameConfig& cfg);

// x(k; tau): Riemann sum of r_{k+1}(t; tau) * rtilde_k(t; tau) over one symbol.
double dirty_correlation(const SampledWaveform& r, long k, double tau, const FrameConfig& cfg);

int training_pattern(long k);

CoarseResult coarse_sync(const SampledWaveform& r, const FrameConfig& cfg, const CoarseConfig& cc);
FineResult fine_sync(const SampledWaveform& r, double tau1, const FrameConfig& cfg, const FineConfig& fc);
SyncEstimate two_floor_sync(const SampledWaveform& r, const FrameConfig& cfg, const CoarseConfig& cc,
                            const FineConfig& fc);

// Index of the leading edge of the near-maximal run that contains the
// first maximum: walk forward while values stay >= (1 - tol) * max.
// Returns `fallback` when the maximum is not positive.
std::size_t leading_edge(const std::vector<double>& v, double tol, bool circular, std::size_t fallback);

// Largest index whose value is >= (1 - tol) * max; `fallback` when the
// maximum is not positive.
std::size_t rightmost_near_max(const std::vector<double>& v, double tol, std::size_t fallback);

// Two-column text: "candidate value".
void write_coarse_objective(std::ostream& os, const SyncEstimate& est, const CoarseConfig& cc);
void write_fine_objective(std::ostream& os, const SyncEstimate& est, const FineConfig& fc);

} // namespace uwbsync
