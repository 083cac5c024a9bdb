#include "uwbsync/harness.hpp"

#include "uwbsync/errors.hpp"
#include "uwbsync/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace uwbsync {

const char* to_string(Floor f) { return f == Floor::coarse_only ? "coarse_only" : "coarse_plus_fine"; }

Floor floor_from_string(const std::string& s) {
    if (s == "coarse_only") return Floor::coarse_only;
    if (s == "coarse_plus_fine") return Floor::coarse_plus_fine;
    throw ConfigError("experiment.floors", "unknown floor '" + s + "' (coarse_only, coarse_plus_fine)");
}

bool operator==(const ExperimentPlan& a, const ExperimentPlan& b) {
    auto taps_equal = [](const std::vector<Tap>& x, const std::vector<Tap>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].gain != y[i].gain || x[i].delay != y[i].delay) return false;
        return true;
    };
    return a.snr_grid_db == b.snr_grid_db && a.m_grid == b.m_grid && a.modes == b.modes && a.floors == b.floors &&
           a.trials_per_cell == b.trials_per_cell && a.base_seed == b.base_seed && a.frame_cfg == b.frame_cfg &&
           a.coarse_cfg == b.coarse_cfg && a.fine_cfg == b.fine_cfg && a.channel_model == b.channel_model &&
           a.channel_max_delay == b.channel_max_delay && taps_equal(a.fixed_taps, b.fixed_taps) &&
           a.signal_gain == b.signal_gain;
}

void validate(const ExperimentPlan& plan) {
    validate(plan.frame_cfg, false);
    if (plan.snr_grid_db.empty()) throw ConfigError("experiment.snr_grid_db", "must not be empty");
    for (double s : plan.snr_grid_db)
        if (std::isnan(s) || (std::isinf(s) && s < 0))
            throw ConfigError("experiment.snr_grid_db", "values must be finite or +inf");
    if (plan.m_grid.empty()) throw ConfigError("experiment.m_grid", "must not be empty");
    for (int m : plan.m_grid)
        if (m < 1) throw ConfigError("experiment.m_grid", "values must be >= 1");
    if (plan.modes.empty()) throw ConfigError("experiment.modes", "must not be empty");
    if (plan.floors.empty()) throw ConfigError("experiment.floors", "must not be empty");
    if (plan.trials_per_cell < 1) throw ConfigError("experiment.trials_per_cell", "must be >= 1");
    for (int m : plan.m_grid) {
        CoarseConfig cc = plan.coarse_cfg;
        cc.n_symbols = m;
        validate(cc, plan.frame_cfg);
    }
    validate(plan.fine_cfg, plan.frame_cfg);
    if (!(plan.channel_max_delay > 0.0)) throw ConfigError("channel.max_delay", "must be positive");
    if (plan.channel_model == ChannelModel::fixed && plan.fixed_taps.empty())
        throw ConfigError("channel.taps", "fixed channel needs a non-empty tap list");
    if (!std::isfinite(plan.signal_gain)) throw ConfigError("experiment.signal_gain", "must be finite");
}

std::vector<PlanCell> plan_cells(const ExperimentPlan& plan) {
    std::vector<PlanCell> cells;
    for (double s : plan.snr_grid_db)
        for (int m : plan.m_grid)
            for (SyncMode md : plan.modes) cells.push_back(PlanCell{s, m, md});
    return cells;
}

std::uint64_t trial_seed(std::uint64_t base_seed, const PlanCell& cell, int trial_index, Stream s) {
    return mix_seed(base_seed, {std::bit_cast<std::uint64_t>(cell.snr_db), static_cast<std::uint64_t>(cell.m),
                                static_cast<std::uint64_t>(cell.mode), static_cast<std::uint64_t>(trial_index),
                                static_cast<std::uint64_t>(s)});
}

double wrapped_error(double tau_hat, double delta_tau, double symbol_duration) {
    const double half = 0.5 * symbol_duration;
    double v = std::fmod(tau_hat - delta_tau + half, symbol_duration);
    if (v < 0.0) v += symbol_duration;
    const double e = v - half;
    return e == -half ? half : e;
}

TrialDetail run_trial_detailed(const ExperimentPlan& plan, const PlanCell& cell, int trial_index,
                               double received_scale) {
    TrialDetail out;
    FrameConfig cfg = plan.frame_cfg;
    if (cfg.th_code.empty()) {
        const auto s = trial_seed(plan.base_seed, cell, trial_index, Stream::th_code);
        for (std::uint64_t attempt = 0;; ++attempt) {
            auto code = make_th_code(mix_seed(s, {attempt}), cfg);
            if (th_code_valid(code, cfg)) {
                cfg.th_code = std::move(code);
                break;
            }
        }
    }
    validate(cfg);

    switch (plan.channel_model) {
    case ChannelModel::cm1:
        out.channel = generate_cm1(trial_seed(plan.base_seed, cell, trial_index, Stream::channel),
                                   plan.channel_max_delay);
        break;
    case ChannelModel::single_path: out.channel = single_path(); break;
    case ChannelModel::fixed: out.channel = fixed_channel(plan.fixed_taps); break;
    }

    const long ns = cfg.symbol_samples();
    Rng off_rng(trial_seed(plan.base_seed, cell, trial_index, Stream::offset));
    const double dtau = static_cast<double>(off_rng.below(static_cast<std::uint64_t>(ns))) / cfg.sample_rate;

    CoarseConfig cc = plan.coarse_cfg;
    cc.n_symbols = cell.m;
    cc.mode = cell.mode;
    cc.segment_origin = cfg.symbol_duration();
    FineConfig fc = plan.fine_cfg;
    if (fc.n_frames_avg == 0) fc.n_frames_avg = cell.m * cfg.n_frames_per_symbol;

    // Symbols past the origin: 2M for the coarse pairs, the fine windows,
    // and guard symbols for the lagged reads.
    const long fine_symbols = 2 * ((fc.n_frames_avg + cfg.n_frames_per_symbol - 1) / cfg.n_frames_per_symbol) + 1;
    const std::size_t k_tx = static_cast<std::size_t>(std::max<long>(2L * cell.m, fine_symbols) + 3);

    const auto bits = cell.mode == SyncMode::da
                          ? SymbolSequence::training(k_tx)
                          : SymbolSequence::random(trial_seed(plan.base_seed, cell, trial_index, Stream::bits), k_tx);
    const auto tx = generate_tx(bits, cfg);

    LinkParams link;
    link.timing_offset = dtau;
    link.snr_db = cell.snr_db;
    link.noise_seed = trial_seed(plan.base_seed, cell, trial_index, Stream::noise);
    link.channel_max_delay = plan.channel_max_delay;
    link.signal_gain = plan.signal_gain;
    auto r = propagate(tx, out.channel, link, cfg);
    if (received_scale != 1.0)
        for (auto& v : r.samples) v *= received_scale;

    out.estimate = two_floor_sync(r, cfg, cc, fc);
    const double reach = wrapped_error(out.estimate.tau2, out.estimate.tau1, cfg.symbol_duration());
    if (std::abs(reach) > fc.t_corr * (1.0 + 1e-12) + 1e-18)
        throw std::runtime_error("run_trial: fine estimate left the [tau1 - T_corr, tau1 + T_corr] window");

    out.result.tau_coarse = out.estimate.tau1;
    out.result.tau_fine = out.estimate.tau2;
    out.result.delta_tau = dtau;
    out.result.n_opt = out.estimate.n_opt;
    out.frame_cfg = std::move(cfg);
    out.coarse_cfg = cc;
    out.fine_cfg = fc;
    return out;
}

TrialResult run_trial(const ExperimentPlan& plan, const PlanCell& cell, int trial_index) {
    return run_trial_detailed(plan, cell, trial_index).result;
}

MseRecord aggregate(const std::vector<double>& normalized_errors) {
    MseRecord rec;
    const std::size_t n = normalized_errors.size();
    rec.n_trials = static_cast<int>(n);
    if (n == 0) return rec;
    long double s = 0.0L;
    for (double e : normalized_errors) s += static_cast<long double>(e) * e;
    const long double mean = s / n;
    long double ss = 0.0L;
    for (double e : normalized_errors) {
        const long double dv = static_cast<long double>(e) * e - mean;
        ss += dv * dv;
    }
    rec.normalized_mse = static_cast<double>(mean);
    rec.std_error = n > 1 ? static_cast<double>(std::sqrt(ss / (n - 1) / n)) : 0.0;
    return rec;
}

namespace {

// Runs fn(task) for task in [0, n) on up to `threads` workers. The first
// failure (lowest task index) is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::size_t fail_index = n;
    std::exception_ptr fail;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (i < fail_index) {
                    fail_index = i;
                    fail = std::current_exception();
                }
                failed = true;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fail) std::rethrow_exception(fail);
}

} // namespace

std::vector<TrialResult> run_cell(const ExperimentPlan& plan, const PlanCell& cell, unsigned threads) {
    validate(plan);
    std::vector<TrialResult> out(static_cast<std::size_t>(plan.trials_per_cell));
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = run_trial(plan, cell, static_cast<int>(i)); });
    return out;
}

std::vector<MseRecord> run_sweep(const ExperimentPlan& plan, unsigned threads) {
    validate(plan);
    const auto cells = plan_cells(plan);
    const std::size_t nt = static_cast<std::size_t>(plan.trials_per_cell);
    std::vector<TrialResult> results(cells.size() * nt);
    parallel_for(results.size(), threads, [&](std::size_t i) {
        results[i] = run_trial(plan, cells[i / nt], static_cast<int>(i % nt));
    });

    const double ts = plan.frame_cfg.symbol_duration();
    std::vector<MseRecord> records;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (Floor f : plan.floors) {
            std::vector<double> errs(nt);
            for (std::size_t t = 0; t < nt; ++t) {
                const auto& tr = results[c * nt + t];
                const double est = f == Floor::coarse_only ? tr.tau_coarse : tr.tau_fine;
                errs[t] = wrapped_error(est, tr.delta_tau, ts) / ts;
            }
            MseRecord rec = aggregate(errs);
            rec.snr_db = cells[c].snr_db;
            rec.m = cells[c].m;
            rec.mode = cells[c].mode;
            rec.floor = f;
            records.push_back(rec);
        }
    }
    return records;
}

void write_csv(std::ostream& os, const std::vector<MseRecord>& records) {
    os << "snr_db,m,mode,floor,normalized_mse,std_error,n_trials\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%.6g,%d,%s,%s,%.6g,%.6g,%d\n", r.snr_db, r.m, to_string(r.mode),
                      to_string(r.floor), r.normalized_mse, r.std_error, r.n_trials);
        os << buf;
    }
}

} // namespace uwbsync
