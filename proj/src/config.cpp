#include "uwbsync/config.hpp"

#include "uwbsync/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace uwbsync {

namespace pt = boost::property_tree;

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_double(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + s + "'");
    }
}

long long to_int(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + s + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
    }
}

int to_count(const std::string& key, const std::string& s) {
    const long long v = to_int(key, s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError(key, "value out of range");
    return static_cast<int>(v);
}

using Setter = void (*)(ExperimentPlan&, const std::string& key, const std::string& value);

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"frame.n_frames_per_symbol", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.n_frames_per_symbol = to_count(k, v); }},
        {"frame.frame_duration", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.frame_duration = to_double(k, v); }},
        {"frame.chip_duration", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.chip_duration = to_double(k, v); }},
        {"frame.n_chips", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.n_chips = to_count(k, v); }},
        {"frame.ppm_shift", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.ppm_shift = to_double(k, v); }},
        {"frame.pulse_duration", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.pulse_duration = to_double(k, v); }},
        {"frame.pulse_energy", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.pulse_energy = to_double(k, v); }},
        {"frame.sample_rate", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.frame_cfg.sample_rate = to_double(k, v); }},
        {"frame.th_code", [](ExperimentPlan& p, const std::string& k, const std::string& v) {
             p.frame_cfg.th_code.clear();
             if (v == "random") return;
             for (const auto& s : split_list(v)) p.frame_cfg.th_code.push_back(to_count(k, s));
         }},
        {"coarse.search_step", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.coarse_cfg.search_step = to_double(k, v); }},
        {"coarse.edge_tolerance", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.coarse_cfg.edge_tolerance = to_double(k, v); }},
        {"coarse.noise_margin", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.coarse_cfg.noise_margin = to_double(k, v); }},
        {"fine.t_corr", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.fine_cfg.t_corr = to_double(k, v); }},
        {"fine.fine_step", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.fine_cfg.fine_step = to_double(k, v); }},
        {"fine.n_frames_avg", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.fine_cfg.n_frames_avg = to_count(k, v); }},
        {"fine.method", [](ExperimentPlan& p, const std::string&, const std::string& v) { p.fine_cfg.method = fine_method_from_string(v); }},
        {"fine.edge_tolerance", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.fine_cfg.edge_tolerance = to_double(k, v); }},
        {"channel.model", [](ExperimentPlan& p, const std::string&, const std::string& v) { p.channel_model = channel_model_from_string(v); }},
        {"channel.max_delay", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.channel_max_delay = to_double(k, v); }},
        {"channel.taps", [](ExperimentPlan& p, const std::string& k, const std::string& v) {
             // "delay gain; delay gain; ..." in seconds
             p.fixed_taps.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ';')) {
                 const auto parts = split_list(item);
                 if (parts.empty()) continue;
                 if (parts.size() != 2) throw ConfigError(k, "expected 'delay gain' pairs separated by ';'");
                 p.fixed_taps.push_back(Tap{to_double(k, parts[1]), to_double(k, parts[0])});
             }
         }},
        {"experiment.snr_grid_db", [](ExperimentPlan& p, const std::string& k, const std::string& v) {
             p.snr_grid_db.clear();
             for (const auto& s : split_list(v)) p.snr_grid_db.push_back(to_double(k, s));
         }},
        {"experiment.m_grid", [](ExperimentPlan& p, const std::string& k, const std::string& v) {
             p.m_grid.clear();
             for (const auto& s : split_list(v)) p.m_grid.push_back(to_count(k, s));
         }},
        {"experiment.modes", [](ExperimentPlan& p, const std::string& k, const std::string& v) {
             p.modes.clear();
             for (const auto& s : split_list(v)) {
                 if (s != "nda" && s != "da") throw ConfigError(k, "unknown mode '" + s + "' (nda, da)");
                 p.modes.push_back(sync_mode_from_string(s));
             }
         }},
        {"experiment.floors", [](ExperimentPlan& p, const std::string&, const std::string& v) {
             p.floors.clear();
             for (const auto& s : split_list(v)) p.floors.push_back(floor_from_string(s));
         }},
        {"experiment.trials_per_cell", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.trials_per_cell = to_count(k, v); }},
        {"experiment.base_seed", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.base_seed = to_u64(k, v); }},
        {"experiment.signal_gain", [](ExperimentPlan& p, const std::string& k, const std::string& v) { p.signal_gain = to_double(k, v); }},
    };
    return table;
}

} // namespace

ExperimentPlan parse_plan(std::istream& is) {
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentPlan plan;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (section == "run") continue;
        if (body.empty() && !body.data().empty())
            throw ConfigError(section, "key outside any section");
        for (const auto& [name, value] : body) {
            const std::string key = section + "." + name;
            const auto it = table.find(key);
            if (it == table.end()) throw ConfigError(key, "unknown key");
            it->second(plan, key, value.data());
        }
    }
    validate(plan);
    return plan;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_plan(is);
}

void write_plan(std::ostream& os, const ExperimentPlan& p) {
    auto list = [](const auto& v, auto f) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + f(v[i]);
        return s;
    };
    const auto& f = p.frame_cfg;
    os << "[frame]\n";
    os << "n_frames_per_symbol = " << f.n_frames_per_symbol << "\n";
    os << "frame_duration = " << fmt(f.frame_duration) << "\n";
    os << "chip_duration = " << fmt(f.chip_duration) << "\n";
    os << "n_chips = " << f.n_chips << "\n";
    os << "ppm_shift = " << fmt(f.ppm_shift) << "\n";
    os << "pulse_duration = " << fmt(f.pulse_duration) << "\n";
    os << "pulse_energy = " << fmt(f.pulse_energy) << "\n";
    os << "sample_rate = " << fmt(f.sample_rate) << "\n";
    os << "th_code = " << (f.th_code.empty() ? "random" : list(f.th_code, [](int c) { return std::to_string(c); }))
       << "\n\n";
    os << "[coarse]\n";
    os << "search_step = " << fmt(p.coarse_cfg.search_step) << "\n";
    os << "edge_tolerance = " << fmt(p.coarse_cfg.edge_tolerance) << "\n";
    os << "noise_margin = " << fmt(p.coarse_cfg.noise_margin) << "\n\n";
    os << "[fine]\n";
    os << "t_corr = " << fmt(p.fine_cfg.t_corr) << "\n";
    os << "fine_step = " << fmt(p.fine_cfg.fine_step) << "\n";
    os << "n_frames_avg = " << p.fine_cfg.n_frames_avg << "\n";
    os << "method = " << to_string(p.fine_cfg.method) << "\n";
    os << "edge_tolerance = " << fmt(p.fine_cfg.edge_tolerance) << "\n\n";
    os << "[channel]\n";
    os << "model = " << to_string(p.channel_model) << "\n";
    os << "max_delay = " << fmt(p.channel_max_delay) << "\n";
    if (!p.fixed_taps.empty()) {
        std::string s;
        for (std::size_t i = 0; i < p.fixed_taps.size(); ++i)
            s += (i ? "; " : "") + fmt(p.fixed_taps[i].delay) + " " + fmt(p.fixed_taps[i].gain);
        os << "taps = " << s << "\n";
    }
    os << "\n[experiment]\n";
    os << "snr_grid_db = " << list(p.snr_grid_db, fmt) << "\n";
    os << "m_grid = " << list(p.m_grid, [](int m) { return std::to_string(m); }) << "\n";
    os << "modes = " << list(p.modes, [](SyncMode m) { return std::string(to_string(m)); }) << "\n";
    os << "floors = " << list(p.floors, [](Floor x) { return std::string(to_string(x)); }) << "\n";
    os << "trials_per_cell = " << p.trials_per_cell << "\n";
    os << "base_seed = " << p.base_seed << "\n";
    os << "signal_gain = " << fmt(p.signal_gain) << "\n";
}

void write_manifest(std::ostream& os, const ExperimentPlan& plan, const std::map<std::string, std::string>& run) {
    write_plan(os, plan);
    os << "\n[run]\n";
    for (const auto& [k, v] : run) os << k << " = " << v << "\n";
}

} // namespace uwbsync
