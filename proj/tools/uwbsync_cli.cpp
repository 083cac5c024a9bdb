// uwbsync: sweep / demo / channel front end.

#include "uwbsync/config.hpp"
#include "uwbsync/errors.hpp"
#include "uwbsync/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;
using namespace uwbsync;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr const char* kSnrNote = "# snr_db is E_p/N0 per pulse (per-sample noise variance E_p*f_c/(2*10^(snr/10)))";

void apply_seed_override(ExperimentPlan& plan) {
    const char* env = std::getenv("UWB_SYNC_SEED");
    if (!env) return;
    const std::string s(env);
    try {
        std::size_t pos = 0;
        if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
        plan.base_seed = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw ConfigError("UWB_SYNC_SEED", "expected a non-negative integer, got '" + s + "'");
    }
}

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || std::isnan(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("snr", "expected a number or 'inf', got '" + s + "'");
    }
}

std::string snr_tag(double snr) {
    if (std::isinf(snr)) return "inf";
    std::ostringstream os;
    os << snr;
    return os.str();
}

std::string cell_stem(const PlanCell& c) {
    return "snr" + snr_tag(c.snr_db) + "_m" + std::to_string(c.m) + "_" + to_string(c.mode);
}

void write_objectives(const fs::path& dir, const std::string& stem, const TrialDetail& d) {
    std::ofstream co(dir / (stem + "_coarse.txt"));
    write_coarse_objective(co, d.estimate, d.coarse_cfg);
    std::ofstream fo(dir / (stem + "_fine.txt"));
    write_fine_objective(fo, d.estimate, d.fine_cfg);
    if (!co || !fo) throw std::runtime_error("cannot write objective files in " + dir.string());
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int cmd_sweep(const std::string& config, const std::string& out, unsigned threads, bool dump) {
    ExperimentPlan plan = load_plan(config);
    apply_seed_override(plan);
    validate(plan);

    const std::string start = utc_now();
    std::cout << kSnrNote << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    const auto records = run_sweep(plan, threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(out);
    fs::create_directories(dir);
    std::vector<std::string> outputs = {"results.csv", "manifest"};
    {
        std::ofstream os(dir / "results.csv");
        write_csv(os, records);
        if (!os) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
    }
    if (dump) {
        const fs::path odir = dir / "objectives";
        fs::create_directories(odir);
        for (const auto& cell : plan_cells(plan)) {
            const auto d = run_trial_detailed(plan, cell, 0);
            write_objectives(odir, cell_stem(cell), d);
        }
        outputs.push_back("objectives/");
    }
    std::string outlist;
    for (std::size_t i = 0; i < outputs.size(); ++i) outlist += (i ? ", " : "") + outputs[i];
    {
        std::ofstream os(dir / "manifest");
        write_manifest(os, plan,
                       {{"config_path", config},
                        {"tool_version", kVersion},
                        {"base_seed", std::to_string(plan.base_seed)},
                        {"start_time", start},
                        {"outputs", outlist}});
        if (!os) throw std::runtime_error("cannot write " + (dir / "manifest").string());
    }
    std::printf("%zu records in %.1f s -> %s\n", records.size(), secs, (dir / "results.csv").c_str());
    return 0;
}

struct DemoArgs {
    std::string snr = "16";
    int m = 16;
    std::string mode;
    std::uint64_t seed = 1;
    std::string out = ".";
    std::string channel = "cm1";
    std::string config;
};

int cmd_demo(const DemoArgs& a) {
    ExperimentPlan plan = a.config.empty() ? ExperimentPlan{} : load_plan(a.config);
    plan.channel_model = channel_model_from_string(a.channel);
    if (plan.channel_model == ChannelModel::fixed && plan.fixed_taps.empty())
        throw ConfigError("channel", "fixed model needs taps from a config file");
    if (a.mode != "nda" && a.mode != "da") throw ConfigError("mode", "expected nda or da, got '" + a.mode + "'");
    const PlanCell cell{parse_snr(a.snr), a.m, sync_mode_from_string(a.mode)};
    plan.snr_grid_db = {cell.snr_db};
    plan.m_grid = {cell.m};
    plan.modes = {cell.mode};
    plan.trials_per_cell = 1;
    plan.base_seed = a.seed;
    validate(plan);
    if (cell.m < 1) throw ConfigError("m", "must be >= 1");

    const auto d = run_trial_detailed(plan, cell, 0);
    const double ts = d.frame_cfg.symbol_duration();
    const double e1 = wrapped_error(d.result.tau_coarse, d.result.delta_tau, ts);
    const double e2 = wrapped_error(d.result.tau_fine, d.result.delta_tau, ts);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_objectives(dir, "demo", d);

    std::cout << kSnrNote << "\n";
    std::printf("snr_db %s  M %d  mode %s  channel %s (%zu taps)\n", snr_tag(cell.snr_db).c_str(), cell.m,
                to_string(cell.mode), to_string(d.channel.model), d.channel.taps.size());
    std::printf("delta_tau_ns   %.4f\n", d.result.delta_tau * 1e9);
    std::printf("tau1_ns        %.4f\n", d.result.tau_coarse * 1e9);
    std::printf("tau2_ns        %.4f\n", d.result.tau_fine * 1e9);
    std::printf("n_opt          %d\n", d.result.n_opt);
    std::printf("coarse_err_ns  %.4f\n", e1 * 1e9);
    std::printf("fine_err_ns    %.4f\n", e2 * 1e9);
    std::printf("objectives -> %s, %s\n", (dir / "demo_coarse.txt").c_str(), (dir / "demo_fine.txt").c_str());
    return 0;
}

int cmd_channel(std::uint64_t seed, int count, const std::string& out, double max_delay) {
    if (count < 0) throw ConfigError("count", "must be >= 0");
    if (!(max_delay > 0)) throw ConfigError("max_delay", "must be > 0");
    if (count == 0) return 0;
    const fs::path dir(out);
    fs::create_directories(dir);
    std::ofstream summary(dir / "summary.txt");
    summary << "# file seed n_taps rms_delay_spread_ns\n";
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        const auto ch = generate_cm1(s, max_delay);
        char name[32];
        std::snprintf(name, sizeof name, "channel_%04d.txt", i);
        save_taps((dir / name).string(), ch);
        const double rms = rms_delay_spread(ch);
        sum += rms;
        char line[128];
        std::snprintf(line, sizeof line, "%s %llu %zu %.6f\n", name, static_cast<unsigned long long>(s),
                      ch.taps.size(), rms * 1e9);
        summary << line;
    }
    if (!summary) throw std::runtime_error("cannot write " + (dir / "summary.txt").string());
    std::printf("%d realizations -> %s, mean rms delay spread %.3f ns\n", count, dir.c_str(), sum / count * 1e9);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"UWB TH-PPM two-floor timing synchronization simulator"};
    app.set_version_flag("--version", std::string("uwbsync ") + kVersion);
    app.require_subcommand(1);

    std::string config, out = "results";
    unsigned threads = 0;
    bool dump = false;
    auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo sweep from a config file");
    sweep->add_option("config", config, "config file")->required();
    sweep->add_option("--out", out, "output directory");
    sweep->add_option("--threads", threads, "worker threads (0 = all cores)");
    sweep->add_flag("--dump-objectives", dump, "write trial-0 objective curves per cell");

    DemoArgs demo_args;
    auto* demo = app.add_subcommand("demo", "run and print a single trial");
    demo->add_option("--snr", demo_args.snr, "E_p/N0 in dB, or inf")->capture_default_str();
    demo->add_option("--m", demo_args.m, "symbol pairs M")->capture_default_str();
    demo->add_option("--mode", demo_args.mode, "nda or da")->required();
    demo->add_option("--seed", demo_args.seed, "base seed")->capture_default_str();
    demo->add_option("--out", demo_args.out, "directory for objective curves")->capture_default_str();
    demo->add_option("--channel", demo_args.channel, "cm1 or single_path")->capture_default_str();
    demo->add_option("--config", demo_args.config, "take frame/sync parameters from a config file");

    std::uint64_t ch_seed = 0;
    int ch_count = 1;
    std::string ch_out = "channels";
    double ch_max_delay = 25e-9;
    auto* channel = app.add_subcommand("channel", "write CM1 realizations as tap files");
    channel->add_option("--seed", ch_seed, "first seed")->capture_default_str();
    channel->add_option("--count", ch_count, "number of realizations")->capture_default_str();
    channel->add_option("--out", ch_out, "output directory")->capture_default_str();
    channel->add_option("--max-delay", ch_max_delay, "tap truncation horizon, seconds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 2;
    }

    try {
        if (*sweep) return cmd_sweep(config, out, threads, dump);
        if (*demo) return cmd_demo(demo_args);
        if (*channel) return cmd_channel(ch_seed, ch_count, ch_out, ch_max_delay);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
