#pragma once

#include "uwbsync/waveform.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace uwbsync {

struct Tap {
    double gain = 1.0;  // alpha_l
    double delay = 0.0; // tau_l, seconds
};

enum class ChannelModel { cm1, single_path, fixed };

const char* to_string(ChannelModel m);
ChannelModel channel_model_from_string(const std::string& s); // throws ConfigError

struct ChannelRealization {
    std::vector<Tap> taps;
    std::uint64_t seed = 0;
    ChannelModel model = ChannelModel::single_path;
};

// Saleh-Valenzuela parameters of the 802.15.3a CM1 (LOS, 0-4 m) profile.
struct Cm1Params {
    double cluster_rate = 0.0233e9; // Lambda, 1/s
    double ray_rate = 2.5e9;        // lambda, 1/s
    double cluster_decay = 7.1e-9;  // Gamma, s
    double ray_decay = 4.3e-9;      // gamma, s
    double cluster_fading_db = 3.3941;
    double ray_fading_db = 3.3941;
};

struct LinkParams {
    double timing_offset = 0.0; // Delta tau in [0, T_s)
    double snr_db = std::numeric_limits<double>::infinity(); // E_p/N_0; +inf disables noise
    std::uint64_t noise_seed = 0;
    double channel_max_delay = 25e-9;
    double signal_gain = 1.0; // 0 gives a noise-only record
};

ChannelRealization single_path();
ChannelRealization fixed_channel(std::vector<Tap> taps); // sorts, normalizes, shifts to 0
ChannelRealization generate_cm1(std::uint64_t seed, double max_delay, const Cm1Params& p = {});

double rms_delay_spread(const ChannelRealization& ch);

// Per-sample noise variance for a given E_p/N_0 in dB.
double noise_variance(double snr_db, const FrameConfig& cfg);

// r = sum_l alpha_l tx(t - tau_l - dtau) + noise on [0, (K+1) T_s).
SampledWaveform propagate(const SampledWaveform& tx, const ChannelRealization& ch, const LinkParams& link,
                          const FrameConfig& cfg);

// p_R: bit-0 symbol waveform with unit-energy pulses passed through ch.
SampledWaveform aggregate_template(const ChannelRealization& ch, const FrameConfig& cfg);

struct PartialEnergies {
    double eps_A = 0.0;
    double eps_B = 0.0;
    double eps_R = 0.0;
};

PartialEnergies partial_energies(const SampledWaveform& p_R, double tau, const FrameConfig& cfg);

// Plain-text tap list: comment header, then "delay_ns gain" rows.
void write_taps(std::ostream& os, const ChannelRealization& ch);
ChannelRealization read_taps(std::istream& is);
void save_taps(const std::string& path, const ChannelRealization& ch);
ChannelRealization load_taps(const std::string& path);

} // namespace uwbsync
