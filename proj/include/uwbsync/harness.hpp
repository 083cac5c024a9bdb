#pragma once

#include "uwbsync/channel.hpp"
#include "uwbsync/sync.hpp"
#include "uwbsync/waveform.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace uwbsync {

enum class Floor { coarse_only, coarse_plus_fine };

const char* to_string(Floor f);
Floor floor_from_string(const std::string& s); // throws ConfigError

struct ExperimentPlan {
    std::vector<double> snr_grid_db = {0, 4, 8, 12, 16};
    std::vector<int> m_grid = {8, 32};
    std::vector<SyncMode> modes = {SyncMode::nda, SyncMode::da};
    std::vector<Floor> floors = {Floor::coarse_only, Floor::coarse_plus_fine};
    int trials_per_cell = 200;
    std::uint64_t base_seed = 20240601;
    FrameConfig frame_cfg;   // empty th_code: a fresh code is drawn per trial
    CoarseConfig coarse_cfg; // n_symbols, mode and segment_origin are set per cell
    FineConfig fine_cfg;
    ChannelModel channel_model = ChannelModel::cm1;
    double channel_max_delay = 25e-9;
    std::vector<Tap> fixed_taps; // used when channel_model == fixed
    double signal_gain = 1.0;    // 0 runs noise-only trials
};

bool operator==(const ExperimentPlan& a, const ExperimentPlan& b);
void validate(const ExperimentPlan& plan); // throws ConfigError

// One (snr, M, mode) combination; both floors come from the same trials.
struct PlanCell {
    double snr_db = 0.0;
    int m = 1;
    SyncMode mode = SyncMode::nda;
};

std::vector<PlanCell> plan_cells(const ExperimentPlan& plan);

struct TrialResult {
    double tau_coarse = 0.0;
    double tau_fine = 0.0;
    double delta_tau = 0.0;
    int n_opt = 0;
};

struct TrialDetail {
    TrialResult result;
    SyncEstimate estimate;
    ChannelRealization channel;
    FrameConfig frame_cfg; // with the trial's TH code
    CoarseConfig coarse_cfg;
    FineConfig fine_cfg;
};

// Sub-seed for one random stream of a trial.
enum class Stream : std::uint64_t { th_code = 0, channel = 1, noise = 2, bits = 3, offset = 4 };
std::uint64_t trial_seed(std::uint64_t base_seed, const PlanCell& cell, int trial_index, Stream s);

TrialResult run_trial(const ExperimentPlan& plan, const PlanCell& cell, int trial_index);
TrialDetail run_trial_detailed(const ExperimentPlan& plan, const PlanCell& cell, int trial_index,
                               double received_scale = 1.0);

// ((tau_hat - delta_tau + T_s/2) mod T_s) - T_s/2, in (-T_s/2, T_s/2].
// The boundary value T_s/2 is reported as +T_s/2.
double wrapped_error(double tau_hat, double delta_tau, double symbol_duration);

struct MseRecord {
    double snr_db = 0.0;
    int m = 1;
    SyncMode mode = SyncMode::nda;
    Floor floor = Floor::coarse_only;
    double normalized_mse = 0.0;
    int n_trials = 0;
    double std_error = 0.0;
};

// Mean and standard error of squared normalized errors.
MseRecord aggregate(const std::vector<double>& normalized_errors);

// threads = 0 picks std::thread::hardware_concurrency().
std::vector<MseRecord> run_sweep(const ExperimentPlan& plan, unsigned threads = 0);

// Per-trial results for one cell, in trial order.
std::vector<TrialResult> run_cell(const ExperimentPlan& plan, const PlanCell& cell, unsigned threads = 0);

void write_csv(std::ostream& os, const std::vector<MseRecord>& records);

} // namespace uwbsync
