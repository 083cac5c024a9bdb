#include "uwbsync/channel.hpp"
#include "uwbsync/errors.hpp"
#include "uwbsync/rng.hpp"
#include "uwbsync/sync.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace uwbsync;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FrameConfig coded(std::uint64_t seed) {
    FrameConfig cfg;
    for (std::uint64_t a = 0;; ++a) {
        cfg.th_code = make_th_code(mix_seed(seed, {a}), cfg);
        if (th_code_valid(cfg.th_code, cfg)) return cfg;
    }
}

struct Rx {
    FrameConfig cfg;
    SampledWaveform r;
    double dtau = 0.0;
};

// 2M + 3 transmitted symbols, so an observation starting at T_s has room
// for M pairs plus guards on both floors.
Rx make_rx(std::uint64_t seed, int m, SyncMode mode, const ChannelRealization& ch, double dtau, double snr,
           int extra_symbols = 0) {
    Rx rx;
    rx.cfg = coded(seed);
    rx.dtau = dtau;
    const std::size_t k = static_cast<std::size_t>(2 * m + 3 + extra_symbols);
    const auto bits = mode == SyncMode::da ? SymbolSequence::training(k) : SymbolSequence::random(seed ^ 0x55, k);
    LinkParams link;
    link.timing_offset = dtau;
    link.snr_db = snr;
    link.noise_seed = seed * 7 + 1;
    rx.r = propagate(generate_tx(bits, rx.cfg), ch, link, rx.cfg);
    return rx;
}

CoarseConfig coarse_for(int m, SyncMode mode, const FrameConfig& cfg) {
    CoarseConfig cc;
    cc.n_symbols = m;
    cc.mode = mode;
    cc.segment_origin = cfg.symbol_duration();
    return cc;
}

FineConfig fine_for(int m, const FrameConfig& cfg) {
    FineConfig fc;
    fc.segment_origin = cfg.symbol_duration();
    fc.n_frames_avg = m * cfg.n_frames_per_symbol;
    return fc;
}

double circ(double a, double b, double period) {
    double e = std::fmod(a - b, period);
    if (e < 0) e += period;
    return std::min(e, period - e);
}

SampledWaveform scaled(SampledWaveform r, double c) {
    for (auto& v : r.samples) v *= c;
    return r;
}

} // namespace

TEST(DifferenceTemplate, ZeroInput) {
    FrameConfig cfg;
    SampledWaveform r;
    r.samples.assign(3 * 56000, 0.0);
    const auto t = difference_template(r, 0, 10e-9, cfg);
    ASSERT_EQ(t.size(), 56000u);
    for (double v : t.samples) ASSERT_EQ(v, 0.0);
}

TEST(DifferenceTemplate, ZeroShiftCancels) {
    Rng rng(3);
    SampledWaveform r;
    r.samples.resize(3 * 56000);
    for (auto& v : r.samples) v = rng.normal();
    const auto t = difference_template(r, 1, 3e-9, 32 * 35e-9, 0.0);
    for (double v : t.samples) ASSERT_EQ(v, 0.0);
}

TEST(DifferenceTemplate, DelayedCopyGivesAntisymmetricPair) {
    // r = s(t) + s(t - 2 delta): the difference is s(t + delta) - s(t - 3 delta).
    FrameConfig cfg;
    const long d = cfg.shift_samples();
    const auto p = Monocycle(cfg.pulse_duration, cfg.sample_rate).sampled();
    SampledWaveform s, r;
    s.samples.assign(3 * 56000, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) s.samples[60000 + i] = p[i];
    r.samples = s.samples;
    for (std::size_t i = 2 * d; i < r.size(); ++i) r.samples[i] += s.samples[i - 2 * d];
    const double tau = 100e-9;
    const auto t = difference_template(r, 0, tau, cfg);
    const long a = std::lround(tau * cfg.sample_rate);
    for (long i = 0; i < 56000; ++i) {
        const double expect = s.samples[a + i + d] - s.samples[a + i - 3 * d];
        ASSERT_EQ(t.samples[i], expect) << i;
    }
}

TEST(DifferenceTemplate, NeedsGuardSamples) {
    FrameConfig cfg;
    SampledWaveform r;
    r.samples.assign(56000, 0.0);
    EXPECT_THROW(difference_template(r, 0, 0.0, cfg), InputError);
}

TEST(DirtyCorrelation, ZeroAndBilinearity) {
    const auto rx = make_rx(1, 2, SyncMode::nda, generate_cm1(1, 25e-9), 321e-9, 8.0);
    SampledWaveform z;
    z.samples.assign(rx.r.size(), 0.0);
    EXPECT_EQ(dirty_correlation(z, 1, 5e-9, rx.cfg), 0.0);
    const double x = dirty_correlation(rx.r, 1, 200e-9, rx.cfg);
    EXPECT_EQ(dirty_correlation(scaled(rx.r, 2.0), 1, 200e-9, rx.cfg), 4.0 * x);
    EXPECT_EQ(dirty_correlation(scaled(rx.r, -0.5), 1, 200e-9, rx.cfg), 0.25 * x);
    EXPECT_NEAR(dirty_correlation(scaled(rx.r, 3.0), 1, 200e-9, rx.cfg), 9.0 * x, 1e-12 * std::abs(x));
}

TEST(DirtyCorrelation, MatchesTemplateInnerProduct) {
    const auto rx = make_rx(2, 2, SyncMode::nda, generate_cm1(2, 25e-9), 77e-9, 4.0);
    for (long k : {0L, 1L, 2L}) {
        for (double tau : {1e-9, 13e-9, 500.5e-9}) {
            const auto tmpl = difference_template(rx.r, k, tau, rx.cfg);
            const long a = std::lround(((k + 1) * rx.cfg.symbol_duration() + tau) * rx.cfg.sample_rate);
            double acc = 0.0;
            for (std::size_t i = 0; i < tmpl.size(); ++i) acc += rx.r.samples[a + i] * tmpl.samples[i];
            acc /= rx.cfg.sample_rate;
            EXPECT_NEAR(dirty_correlation(rx.r, k, tau, rx.cfg), acc, 1e-6 * std::abs(acc));
        }
    }
}

// At the true offset a (0, 1) pair correlates r_{k+1} = p(t - delta) with
// p(t + delta) - p(t - delta), giving -eps_R; a (1, 0) pair gives +eps_R.
TEST(DirtyCorrelation, AlignedPairsGiveSymbolEnergy) {
    auto cfg = coded(4);
    cfg.pulse_energy = 2.0;
    for (auto bits : {std::vector<int>{0, 1, 0}, std::vector<int>{1, 0, 1}, std::vector<int>{0, 0, 0}}) {
        LinkParams link;
        link.timing_offset = 250e-9;
        const auto r = propagate(generate_tx(SymbolSequence::fixed(bits), cfg), single_path(), link, cfg);
        const double eps_r = 32 * cfg.pulse_energy;
        const double expect = bits[0] == bits[1] ? 0.0 : (bits[0] == 0 ? -eps_r : eps_r);
        EXPECT_NEAR(dirty_correlation(r, 0, 250e-9, cfg), expect, 1e-6 * eps_r);
    }
}

TEST(TrainingPattern, Parity) {
    EXPECT_EQ(training_pattern(0), 1);
    EXPECT_EQ(training_pattern(1), 0);
    for (long j = 0; j < 50; ++j) {
        EXPECT_EQ(training_pattern(2 * j), 1);
        EXPECT_EQ(training_pattern(2 * j + 1), 0);
    }
}

TEST(Selection, LeadingEdge) {
    EXPECT_EQ(leading_edge({0, 1, 5, 5, 5, 2}, 0.0, true, 0), 4u);
    EXPECT_EQ(leading_edge({0, 1, 5, 4.9, 1, 2}, 0.05, true, 0), 3u);
    EXPECT_EQ(leading_edge({5, 1, 0, 5, 5}, 0.0, true, 0), 0u);  // wraps past the end
    EXPECT_EQ(leading_edge({5, 1, 0, 5, 5}, 0.0, false, 0), 0u); // stops at the end
    EXPECT_EQ(leading_edge({3, 3, 3}, 0.0, true, 0), 2u);        // all equal
    EXPECT_EQ(leading_edge({0, 0, 0}, 0.0, true, 1), 1u);
    EXPECT_EQ(leading_edge({-1, -2}, 0.0, true, 0), 0u);
}

TEST(Selection, RightmostNearMax) {
    EXPECT_EQ(rightmost_near_max({1, 5, 2, 4.99, 0}, 0.01, 0), 3u);
    EXPECT_EQ(rightmost_near_max({1, 5, 2, 4.99, 0}, 0.0, 0), 1u);
    EXPECT_EQ(rightmost_near_max({0, 0, 0}, 0.01, 1), 1u);
}

TEST(CoarseSync, NoiselessSinglePathNda) {
    Rng rng(10);
    for (int t = 0; t < 10; ++t) {
        const double dtau = rng.below(56000) / 50e9;
        const auto rx = make_rx(100 + t, 32, SyncMode::nda, single_path(), dtau, kInf);
        const auto cc = coarse_for(32, SyncMode::nda, rx.cfg);
        const auto res = coarse_sync(rx.r, rx.cfg, cc);
        EXPECT_LE(circ(res.tau1, dtau, rx.cfg.symbol_duration()), cc.search_step) << "dtau " << dtau;
        EXPECT_EQ(res.objective.size(), 2240u);
    }
}

TEST(CoarseSync, DaPeakAtSymbolAlignment) {
    Rng rng(11);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        // Delta tau on the search grid so the aligned offset is a candidate.
        const double step = 0.5e-9;
        const double dtau = rng.below(2240) * step;
        const auto rx = make_rx(seed, 4, SyncMode::da, generate_cm1(seed + 500, 25e-9), dtau, kInf);
        const auto cc = coarse_for(4, SyncMode::da, rx.cfg);
        const auto res = coarse_sync(rx.r, rx.cfg, cc);
        const double ts = rx.cfg.symbol_duration();
        // Candidate j starts its segment at T_s + j * step; the segment aligns
        // with a symbol when it starts at the first pulse.
        const long grid = static_cast<long>(res.objective.size());
        const long j0 = std::lround((dtau + rx.cfg.th_code[0] * rx.cfg.chip_duration) / step) % grid;
        const double peak = res.objective[static_cast<std::size_t>(j0)];
        for (long j = 0; j < grid; ++j) {
            if (circ(j * step, j0 * step, ts) > rx.cfg.frame_duration)
                EXPECT_GT(peak, res.objective[j]) << "seed " << seed << " j " << j << " j0 " << j0;
        }
    }
}

TEST(CoarseSync, ObjectiveMatchesDirectSum) {
    for (auto mode : {SyncMode::nda, SyncMode::da}) {
        const int m = 3;
        const auto rx = make_rx(21, m, mode, generate_cm1(21, 25e-9), 600e-9, 10.0);
        const auto cc = coarse_for(m, mode, rx.cfg);
        const auto res = coarse_sync(rx.r, rx.cfg, cc);
        const double vmax = *std::max_element(res.objective.begin(), res.objective.end());
        for (std::size_t j : {0u, 1u, 517u, 1200u, 2239u}) {
            double s = 0.0, s2 = 0.0;
            for (int p = 0; p < m; ++p) {
                const double x = dirty_correlation(rx.r, 2 * p, cc.segment_origin + j * cc.search_step, rx.cfg);
                s += x;
                s2 += x * x;
            }
            const double expect = mode == SyncMode::nda ? s2 / m : (s / m) * (s / m);
            EXPECT_NEAR(res.objective[j], expect, 1e-9 * vmax) << to_string(mode) << " j " << j;
        }
    }
}

// Noise only: every region of the grid has the same mean objective. The argmax
// is not uniform: neighbouring candidates share almost all of their samples, so
// the curve drifts like a random walk and peaks more often near the grid ends.
TEST(CoarseSync, NoiseOnlyIsFlat) {
    const int m = 4, trials = 200, bins = 8;
    FrameConfig cfg = coded(0);
    const double var = noise_variance(0.0, cfg);
    // E[x^2] for x = (1/f_c) sum_u n[u+N_s](n[u+d] - n[u-d]) over N_s terms
    const double ex2 = 2.0 * 56000 * var * var / (cfg.sample_rate * cfg.sample_rate);
    std::vector<double> bin_mean(bins, 0.0);
    for (int t = 0; t < trials; ++t) {
        cfg = coded(t);
        const auto tx = generate_tx(SymbolSequence::random(t, 2 * m + 3), cfg);
        LinkParams link;
        link.snr_db = 0.0;
        link.noise_seed = 9000 + t;
        link.signal_gain = 0.0;
        const auto r = propagate(tx, single_path(), link, cfg);
        const auto res = coarse_sync(r, cfg, coarse_for(m, SyncMode::nda, cfg));
        const std::size_t per_bin = res.objective.size() / bins;
        for (std::size_t j = 0; j < res.objective.size(); ++j)
            bin_mean[j / per_bin] += res.objective[j] / per_bin / trials;
        EXPECT_GT(res.noise_var, 0.97 * var);
        EXPECT_LT(res.noise_var, 1.03 * var);
    }
    // A bin mean over 200 curves spreads by about 2%.
    for (int b = 0; b < bins; ++b) EXPECT_NEAR(bin_mean[b] / ex2, 1.0, 0.08) << "bin " << b;
}

TEST(CoarseSync, WalkToleranceFollowsNoise) {
    const auto quiet = make_rx(5, 8, SyncMode::da, generate_cm1(5, 25e-9), 400e-9, kInf);
    auto cc = coarse_for(8, SyncMode::da, quiet.cfg);
    const auto q = coarse_sync(quiet.r, quiet.cfg, cc);
    EXPECT_EQ(q.tolerance, cc.edge_tolerance);

    double last = 0.0;
    for (double snr : {20.0, 12.0, 8.0}) {
        const auto rx = make_rx(5, 8, SyncMode::da, generate_cm1(5, 25e-9), 400e-9, snr);
        const auto res = coarse_sync(rx.r, rx.cfg, cc);
        const double var = noise_variance(snr, rx.cfg);
        EXPECT_NEAR(res.noise_var / var, 1.0, 0.02) << snr;
        EXPECT_GE(res.tolerance, last) << snr;
        EXPECT_GT(res.tolerance, cc.edge_tolerance) << snr;
        EXPECT_LE(res.tolerance, 1.0 / 32) << snr;
        last = res.tolerance;
    }
    EXPECT_EQ(last, 1.0 / 32); // 8 dB hits the one-frame cap

    const auto rx = make_rx(5, 8, SyncMode::da, generate_cm1(5, 25e-9), 400e-9, 12.0);
    cc.noise_margin = 0.0;
    EXPECT_EQ(coarse_sync(rx.r, rx.cfg, cc).tolerance, cc.edge_tolerance);
}

TEST(CoarseSync, Errors) {
    const auto rx = make_rx(1, 2, SyncMode::nda, single_path(), 0.0, kInf);
    auto cc = coarse_for(3, SyncMode::nda, rx.cfg); // needs 2*3+2 symbols past T_s
    EXPECT_THROW(coarse_sync(rx.r, rx.cfg, cc), InputError);
    cc.n_symbols = 2;
    cc.search_step = 0.3e-9;
    EXPECT_THROW(coarse_sync(rx.r, rx.cfg, cc), ConfigError);
}

TEST(FineSync, ZeroResidual) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double dtau = (137 + 211 * seed) * 1e-9;
        const auto rx = make_rx(seed, 4, SyncMode::da, single_path(), dtau, kInf);
        const auto res = fine_sync(rx.r, dtau, rx.cfg, fine_for(4, rx.cfg));
        EXPECT_EQ(res.n_opt, 0) << seed;
        EXPECT_DOUBLE_EQ(res.tau2, dtau);
        EXPECT_EQ(res.objective.size(), 31u);
    }
}

TEST(FineSync, RecoversTwoStepResidual) {
    for (auto mode : {SyncMode::nda, SyncMode::da}) {
        const double dtau = 512.3e-9;
        const auto rx = make_rx(3, 4, mode, single_path(), dtau, kInf);
        const auto fc = fine_for(4, rx.cfg);
        const auto res = fine_sync(rx.r, dtau - 2 * fc.fine_step, rx.cfg, fc);
        EXPECT_EQ(res.n_opt, 2);
        EXPECT_NEAR(res.tau2, dtau, 1e-15);
    }
}

// Brute-force edge statistic. Per pair, the polarity is the sign of the dirty
// correlation over the pair's whole scan span; a negative pair is read delta
// later. Per frame: energy in the window after the candidate pulse start, minus
// the same-polarity energy in the window before it. The before window stops
// one pulse length after the previous frame's pulse.
TEST(FineSync, PulseEdgeMatchesBruteForce) {
    const int m = 2;
    const auto rx = make_rx(8, m, SyncMode::nda, generate_cm1(8, 25e-9), 903.1e-9, 14.0);
    const auto& cfg = rx.cfg;
    const auto fc = fine_for(m, cfg);
    const double tau1 = 901.0e-9;
    const auto res = fine_sync(rx.r, tau1, cfg, fc);
    const long ns = 56000, d = 50, w = 200, np = 40, reach = 15 * 5;
    const auto& x = rx.r.samples;
    auto q = [&](long u) { return x[u + ns] * (x[u + d] - x[u - d]); };
    std::vector<long> phase(32);
    for (int j = 0; j < 32; ++j) phase[j] = j * 1750L + cfg.th_code[j] * 50L;
    const long b0 = ns + std::lround(tau1 * 50e9);
    std::vector<int> sign(m);
    for (int p = 0; p < m; ++p) {
        const long base = b0 + 2 * p * ns;
        double span = 0.0;
        for (long u = base - reach - w; u < base + ns + reach + w + d; ++u) span += q(u);
        sign[p] = span >= 0.0 ? 1 : -1;
    }
    for (int n = -15; n <= 15; ++n) {
        const long off = std::lround(n * 0.25e-9 * 50e9);
        double z = 0.0;
        for (int p = 0; p < m; ++p) {
            const long sh = sign[p] > 0 ? 0 : d;
            for (int j = 0; j < 32; ++j) {
                const long after = std::min(w, j + 1 < 32 ? phase[j + 1] - phase[j] : w);
                const long gap = j > 0 ? phase[j] - phase[j - 1] : ns + phase[0] - phase[31];
                const long before = std::clamp(gap - np, 0L, w);
                const long a = b0 + 2 * p * ns + off + phase[j] + sh;
                double wa = 0.0, wb = 0.0;
                for (long u = a; u < a + after; ++u) wa += q(u);
                for (long u = a - before; u < a; ++u) wb += q(u);
                z += sign[p] * wa - std::max(0.0, sign[p] * wb);
            }
        }
        z /= 50e9;
        const double got = res.objective[static_cast<std::size_t>(n + 15)];
        EXPECT_NEAR(got, z, 1e-9 * std::abs(z) + 1e-6) << "n " << n;
    }
}

TEST(FineSync, SymbolLagMatchesBruteForce) {
    const auto rx = make_rx(9, 2, SyncMode::nda, generate_cm1(9, 25e-9), 300e-9, 10.0);
    auto fc = fine_for(2, rx.cfg);
    fc.method = FineMethod::symbol_lag;
    const double tau1 = 299e-9;
    const auto res = fine_sync(rx.r, tau1, rx.cfg, fc);
    const long ns = 56000;
    const auto& x = rx.r.samples;
    for (int n = -15; n <= 15; ++n) {
        const long start = ns + std::lround(tau1 * 50e9) + std::lround(n * 0.25e-9 * 50e9);
        double z = 0.0;
        for (int k = 0; k < 2; ++k) {
            double s = 0.0;
            for (long u = start + k * ns; u < start + (k + 1) * ns; ++u) s += x[u + ns] * x[u];
            z += std::abs(s / 50e9);
        }
        EXPECT_NEAR(res.objective[static_cast<std::size_t>(n + 15)], z, 1e-9 * z) << n;
    }
}

TEST(FineSync, ZeroInputPicksCenter) {
    FrameConfig cfg = coded(1);
    SampledWaveform r;
    r.samples.assign(12 * 56000, 0.0);
    for (auto method : {FineMethod::pulse_edge, FineMethod::pulse_window, FineMethod::symbol_lag, FineMethod::frame_lag}) {
        auto fc = fine_for(2, cfg);
        fc.method = method;
        const auto res = fine_sync(r, 100e-9, cfg, fc);
        EXPECT_EQ(res.n_opt, 0) << to_string(method);
        for (double v : res.objective) EXPECT_EQ(v, 0.0);
    }
}

TEST(FineSync, Errors) {
    FrameConfig cfg = coded(1);
    SampledWaveform r;
    r.samples.assign(4 * 56000, 0.0);
    auto fc = fine_for(4, cfg);
    EXPECT_THROW(fine_sync(r, 10e-9, cfg, fc), InputError);
    EXPECT_THROW(fine_sync(r, cfg.symbol_duration(), cfg, fc), InputError);
    fc.n_frames_avg = 0;
    EXPECT_THROW(fine_sync(r, 10e-9, cfg, fc), ConfigError);
    fc.n_frames_avg = 1;
    fc.fine_step = 0.0;
    EXPECT_THROW(fine_sync(r, 10e-9, cfg, fc), ConfigError);
}

TEST(TwoFloor, RefinesBelowCoarseGrid) {
    const double dtau = 400.02e-9;
    const auto rx = make_rx(12, 8, SyncMode::da, single_path(), dtau, kInf);
    auto fc = fine_for(8, rx.cfg);
    fc.fine_step = 0.1e-9;
    const auto est = two_floor_sync(rx.r, rx.cfg, coarse_for(8, SyncMode::da, rx.cfg), fc);
    EXPECT_LE(circ(est.tau2, dtau, rx.cfg.symbol_duration()), 0.1e-9);
    EXPECT_EQ(est.fine_objective.size(), 79u);
}

TEST(TwoFloor, FrameGridKeepsContainment) {
    const double dtau = 400.02e-9;
    const auto rx = make_rx(12, 8, SyncMode::da, single_path(), dtau, kInf);
    auto cc = coarse_for(8, SyncMode::da, rx.cfg);
    cc.search_step = rx.cfg.frame_duration;
    auto fc = fine_for(8, rx.cfg);
    fc.fine_step = 0.1e-9;
    const auto est = two_floor_sync(rx.r, rx.cfg, cc, fc);
    EXPECT_EQ(est.coarse_objective.size(), 32u);
    EXPECT_LE(circ(est.tau2, est.tau1, rx.cfg.symbol_duration()), fc.t_corr + 1e-15);
}

TEST(TwoFloor, ZeroCorrWindowIsIdentity) {
    const auto rx = make_rx(13, 4, SyncMode::nda, generate_cm1(13, 25e-9), 222e-9, 12.0);
    auto fc = fine_for(4, rx.cfg);
    fc.t_corr = 0.0;
    const auto est = two_floor_sync(rx.r, rx.cfg, coarse_for(4, SyncMode::nda, rx.cfg), fc);
    EXPECT_EQ(est.n_opt, 0);
    EXPECT_EQ(est.tau2, est.tau1);
    EXPECT_EQ(est.fine_objective.size(), 1u);
}

TEST(TwoFloor, ShiftByWholeSymbol) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double dtau = (50 + 170 * seed) * 1e-9 + 0.02e-9;
        const auto rx = make_rx(seed, 4, SyncMode::da, generate_cm1(seed, 25e-9), dtau, kInf, 2);
        const auto cc1 = coarse_for(4, SyncMode::da, rx.cfg);
        auto cc2 = cc1;
        cc2.segment_origin = 3 * rx.cfg.symbol_duration(); // one pair later, same training phase
        const auto e1 = two_floor_sync(rx.r, rx.cfg, cc1, fine_for(4, rx.cfg));
        const auto e2 = two_floor_sync(rx.r, rx.cfg, cc2, fine_for(4, rx.cfg));
        EXPECT_NEAR(circ(e1.tau1, e2.tau1, rx.cfg.symbol_duration()), 0.0, 1e-15) << seed;
        EXPECT_NEAR(circ(e1.tau2, e2.tau2, rx.cfg.symbol_duration()), 0.0, 1e-15) << seed;
    }
}

TEST(TwoFloor, ScaleInvariance) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto mode = seed % 2 ? SyncMode::da : SyncMode::nda;
        const auto rx = make_rx(seed, 4, mode, generate_cm1(seed, 25e-9), (71 + 199 * seed) * 1e-9, 12.0);
        const auto cc = coarse_for(4, mode, rx.cfg);
        const auto fc = fine_for(4, rx.cfg);
        const auto ref = two_floor_sync(rx.r, rx.cfg, cc, fc);
        for (double c : {1e-3, 1e3, -2.0, 0.37}) {
            const auto e = two_floor_sync(scaled(rx.r, c), rx.cfg, cc, fc);
            EXPECT_EQ(e.tau1, ref.tau1) << c;
            EXPECT_EQ(e.n_opt, ref.n_opt) << c;
            EXPECT_EQ(e.tau2, ref.tau2) << c;
        }
    }
}

TEST(TwoFloor, OutputRanges) {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto mode = t % 2 ? SyncMode::da : SyncMode::nda;
        const double snr = rng.uniform() * 16;
        const double dtau = rng.below(56000) / 50e9;
        const auto rx = make_rx(t, 2, mode, generate_cm1(t, 25e-9), dtau, snr);
        auto cc = coarse_for(2, mode, rx.cfg);
        if (t % 3 == 0) cc.search_step = rx.cfg.frame_duration;
        const auto est = two_floor_sync(rx.r, rx.cfg, cc, fine_for(2, rx.cfg));
        const double ts = rx.cfg.symbol_duration();
        EXPECT_GE(est.tau1, 0.0);
        EXPECT_LT(est.tau1, ts);
        EXPECT_GE(est.tau2, 0.0);
        EXPECT_LT(est.tau2, ts);
        EXPECT_LE(circ(est.tau2, est.tau1, ts), 4e-9 + 1e-15);
    }
}

TEST(SyncConfig, Validation) {
    FrameConfig cfg = coded(1);
    CoarseConfig cc;
    EXPECT_NO_THROW(validate(cc, cfg));
    cc.search_step = 0.3e-9; // 15 samples: T_s / step not integral
    try {
        validate(cc, cfg);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "coarse.search_step");
    }
    cc = {};
    cc.n_symbols = 0;
    EXPECT_THROW(validate(cc, cfg), ConfigError);
    cc = {};
    cc.noise_margin = -1.0;
    try {
        validate(cc, cfg);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "coarse.noise_margin");
    }
    FineConfig fc;
    EXPECT_NO_THROW(validate(fc, cfg));
    EXPECT_EQ(fc.half_width(), 16);
    fc.t_corr = 0.0;
    EXPECT_EQ(fc.half_width(), 1);
    EXPECT_THROW(fine_method_from_string("bogus"), ConfigError);
    EXPECT_EQ(fine_method_from_string("frame_lag"), FineMethod::frame_lag);
}
