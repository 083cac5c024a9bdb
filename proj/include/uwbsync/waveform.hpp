#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace uwbsync {

// TH-PPM format. Times in seconds, rates in hertz.
struct FrameConfig {
    int n_frames_per_symbol = 32;   // N_f
    double frame_duration = 35e-9;  // T_f
    double chip_duration = 1e-9;    // T_c
    int n_chips = 35;               // N_c
    double ppm_shift = 1e-9;        // delta
    double pulse_duration = 0.8e-9; // T_p
    double pulse_energy = 1.0;      // epsilon
    std::vector<int> th_code;       // c_th(i), length N_f
    double sample_rate = 50e9;      // f_c

    double symbol_duration() const { return n_frames_per_symbol * frame_duration; }

    // Grid helpers; valid only on a validated config.
    long frame_samples() const;
    long chip_samples() const;
    long shift_samples() const;
    long pulse_samples() const;
    long symbol_samples() const { return n_frames_per_symbol * frame_samples(); }
    long to_samples(double t) const; // nearest sample
};

bool operator==(const FrameConfig& a, const FrameConfig& b);

// Checks every FrameConfig invariant; throws ConfigError naming the key.
// With require_code = false an empty th_code is accepted (drawn later).
void validate(const FrameConfig& cfg, bool require_code = true);

struct SampledWaveform {
    std::vector<double> samples;
    double sample_rate = 50e9;
    double t_start = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration() const { return samples.size() / sample_rate; }
    double energy() const; // sum of squares / f_c
};

enum class BitSource { random, training_pattern, fixed };

struct SymbolSequence {
    std::vector<int> bits;
    BitSource source = BitSource::fixed;
    std::uint64_t seed = 0; // meaningful for BitSource::random

    static SymbolSequence random(std::uint64_t seed, std::size_t count);
    static SymbolSequence training(std::size_t count);
    static SymbolSequence fixed(std::vector<int> bits);
};

// Second-derivative Gaussian centered at T_p/2, tau_m = T_p/2.5, scaled so
// the pulse sampled at sample_rate has unit energy.
class Monocycle {
public:
    Monocycle(double pulse_duration, double sample_rate);

    double operator()(double t) const; // 0 outside [0, T_p)
    double amplitude() const { return amp_; }
    // Samples at t = i/f_c, i = 0..round(T_p f_c) - 1.
    std::vector<double> sampled() const;

private:
    double shape(double t) const;
    double tp_;
    double fs_;
    double tau_m_;
    double amp_ = 1.0;
};

// Convenience form of Monocycle at the default 50 GHz grid.
double monocycle(double t, double pulse_duration, double sample_rate = 50e9);

// i.i.d. uniform chips on {0..N_c-1}. May violate the no-leak invariant;
// callers check with th_code_valid.
std::vector<int> make_th_code(std::uint64_t seed, const FrameConfig& cfg);
bool th_code_valid(const std::vector<int>& code, const FrameConfig& cfg);

// v(t) of the TH-PPM model, K * T_s * f_c samples starting at t = 0.
SampledWaveform generate_tx(const SymbolSequence& symbols, const FrameConfig& cfg);

// Positions (sample offsets within a symbol) of the N_f pulse starts for bit 0.
std::vector<long> pulse_offsets(const FrameConfig& cfg);

} // namespace uwbsync
