// Copyright 2026 The qndr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Run configuration: a JSON document whose sections mirror the library
// modules. Every field is optional; unknown keys are rejected by name.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qndr/count_model.hpp"
#include "qndr/dynamics.hpp"
#include "qndr/experiments.hpp"
#include "qndr/strategies.hpp"

namespace qndr {

class ConfigError : public std::runtime_error {
   public:
    ConfigError(const std::string &key, const std::string &what)
        : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
    const std::string &key() const { return key_; }

   private:
    std::string key_;
};

inline constexpr std::uint64_t kDefaultSeed = 20080101;

struct CountModelConfig {
    int max_count = 30;
    double bright_mean = 10.0;
    double dark_mean = 0.2;
    double update_weight = 0.02;
    int bright_threshold = 2;
    /// Ideal binary outcomes (count 1 = bright, 0 = dark) instead of Poisson.
    bool binary = false;
    /// Optional single-ion likelihoods, one line per hypothesis {down, up}.
    std::string pmf_file;
};

struct StrategyConfig {
    StoppingRule rule{1e3, 100};
    /// Stopping threshold for two-ion detections (spectroscopy and the
    /// two-ion repeatability runs).
    double two_ion_threshold_ratio = 40.0;
    std::vector<double> candidate_durations;  // empty: {T1, T2}
    std::optional<double> fixed_duration;
    int oracle_depth_cap = 64;
};

struct ExperimentConfig {
    std::string system = "single_ion";
    std::vector<double> prepared;  // empty: resolved from prepared_label
    std::string prepared_label = "down";
    std::vector<double> thresholds{10, 1e2, 1e3, 1e4, 1e5, 1e6};
    std::vector<double> compare_thresholds{1.000001, 2, 5, 10, 30, 100, 300, 1e3,
                                           3e3,      1e4, 3e4, 1e5, 1e6};
    std::vector<int> fixed_counts{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    std::vector<int> rabi_k{0, 1, 2};
    std::vector<double> rabi_durations;  // empty: 0..200 us, 81 points
    double probe_time = 0.1;
    double clock_rabi = 0;               // 0: pi / probe_time
    std::vector<double> detunings;       // empty: symmetric grid, 61 points
    std::vector<double> flop_times;      // empty: 0..3 pi-times, 31 points
    bool oracle_decay = false;
};

struct RunConfig {
    PhysicsParams physics;
    CountModelConfig model;
    StrategyConfig strategies;
    ExperimentConfig experiments;
    std::uint64_t trials = 100000;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;  // 0: hardware concurrency
    std::string output_path = "qndr_out.csv";
    nlohmann::json run_info = nlohmann::json::object();

    std::vector<double> candidate_durations() const {
        if (!strategies.candidate_durations.empty()) {
            return strategies.candidate_durations;
        }
        return {physics.T1, physics.T2};
    }

    PulsePolicy policy() const {
        PulsePolicy p = PulsePolicy::adaptive(candidate_durations());
        p.fixed_duration = strategies.fixed_duration;
        return p;
    }

    double clock_rabi() const {
        return experiments.clock_rabi > 0 ? experiments.clock_rabi
                                          : std::numbers::pi / experiments.probe_time;
    }

    std::vector<double> rabi_durations() const {
        if (!experiments.rabi_durations.empty()) {
            return experiments.rabi_durations;
        }
        std::vector<double> d;
        for (int i = 0; i <= 80; ++i) {
            d.push_back(i * 2.5e-6);
        }
        return d;
    }

    std::vector<double> detunings() const {
        if (!experiments.detunings.empty()) {
            return experiments.detunings;
        }
        // +-3 Fourier widths, 0.8 / t in Hz.
        double width = 2 * std::numbers::pi * 0.8 / experiments.probe_time;
        std::vector<double> d;
        for (int i = -30; i <= 30; ++i) {
            d.push_back(i * width / 10.0);
        }
        return d;
    }

    std::vector<double> flop_times() const {
        if (!experiments.flop_times.empty()) {
            return experiments.flop_times;
        }
        double pi_time = std::numbers::pi / clock_rabi();
        std::vector<double> t;
        for (int i = 1; i <= 30; ++i) {
            t.push_back(i * 0.1 * pi_time);
        }
        return t;
    }

    System system() const {
        return experiments.system == "two_ion" ? System::two_ion : System::single_ion;
    }

    std::size_t hypothesis_count(System s) const { return s == System::two_ion ? 3 : 2; }

    PreparedPopulation prepared(System s) const {
        std::size_t n = hypothesis_count(s);
        if (!experiments.prepared.empty()) {
            if (experiments.prepared.size() != n) {
                throw ConfigError("experiments.prepared",
                                  "expected " + std::to_string(n) + " populations");
            }
            try {
                return PreparedPopulation(experiments.prepared);
            } catch (const std::domain_error &e) {
                throw ConfigError("experiments.prepared", e.what());
            }
        }
        const std::string &l = experiments.prepared_label;
        if (l == "mixed") {
            return PreparedPopulation::uniform(n);
        }
        HypothesisSet h = s == System::two_ion ? HypothesisSet::two_ion()
                                               : HypothesisSet::single_ion();
        try {
            return PreparedPopulation::pure(n, h.index_of(l));
        } catch (const std::out_of_range &) {
            throw ConfigError("experiments.prepared", "unknown label '" + l + "'");
        }
    }

    AncillaCounts ancilla() const {
        if (model.binary) {
            return AncillaCounts{CountPMF::indicator(2, 1), CountPMF::indicator(2, 0)};
        }
        try {
            return calibrate_bright_dark(model.bright_mean, model.dark_mean,
                                         OutcomeAlphabet(model.max_count));
        } catch (const std::domain_error &e) {
            throw ConfigError("count_model", e.what());
        }
    }

    ReadoutModel readout(System s) const {
        AncillaCounts a = ancilla();
        if (s == System::two_ion) {
            std::vector<double> d = candidate_durations();
            if (strategies.fixed_duration) {
                d.push_back(*strategies.fixed_duration);
            }
            return ReadoutModel::two_ion(physics, a, d);
        }
        if (!model.pmf_file.empty()) {
            std::ifstream in(model.pmf_file);
            if (!in) {
                throw ConfigError("count_model.pmf_file", "cannot open " + model.pmf_file);
            }
            std::vector<CountPMF> pmfs;
            try {
                pmfs = read_pmfs(in);
            } catch (const std::runtime_error &e) {
                throw ConfigError("count_model.pmf_file", e.what());
            }
            if (pmfs.size() != 2 || pmfs[0].size() != a.bright.size()) {
                throw ConfigError("count_model.pmf_file",
                                  "need two lines over the configured alphabet");
            }
            return ReadoutModel::single_ion(physics, a, std::move(pmfs));
        }
        return ReadoutModel::single_ion(physics, a);
    }

    StoppingRule two_ion_rule() const {
        return StoppingRule{strategies.two_ion_threshold_ratio, strategies.rule.max_cycles};
    }

    unsigned resolved_threads() const {
        if (threads > 0) {
            return threads;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }

    TrialPlan plan() const { return TrialPlan{trials, seed, resolved_threads()}; }

    void validate() const {
        try {
            physics.validate();
        } catch (const std::domain_error &e) {
            throw ConfigError("dynamics", e.what());
        }
        try {
            strategies.rule.validate();
            StoppingRule{strategies.two_ion_threshold_ratio, 1}.validate();
        } catch (const std::domain_error &e) {
            throw ConfigError("strategies", e.what());
        }
        try {
            policy().validate();
        } catch (const std::domain_error &e) {
            throw ConfigError("strategies.candidate_durations", e.what());
        }
        if (model.max_count < 1) {
            throw ConfigError("count_model.max_count", "must be >= 1");
        }
        if (!(model.update_weight > 0 && model.update_weight <= 1)) {
            throw ConfigError("count_model.update_weight", "must lie in (0, 1]");
        }
        if (experiments.system != "single_ion" && experiments.system != "two_ion") {
            throw ConfigError("experiments.system", "must be single_ion or two_ion");
        }
        if (!(experiments.probe_time > 0)) {
            throw ConfigError("experiments.probe_time", "must be > 0");
        }
        for (double t : experiments.thresholds) {
            if (!(t > 1)) {
                throw ConfigError("experiments.thresholds", "thresholds must be > 1");
            }
        }
        for (double t : experiments.compare_thresholds) {
            if (!(t > 1)) {
                throw ConfigError("experiments.compare_thresholds", "thresholds must be > 1");
            }
        }
        for (int n : experiments.fixed_counts) {
            if (n < 1) {
                throw ConfigError("experiments.fixed_counts", "counts must be >= 1");
            }
        }
        if (trials < 1) {
            throw ConfigError("trials", "must be >= 1");
        }
        prepared(system());
    }
};

namespace detail {

template <class T>
void read_field(const nlohmann::json &obj, const std::string &section, const char *name, T &out) {
    auto it = obj.find(name);
    if (it == obj.end()) {
        return;
    }
    std::string key = section.empty() ? name : section + "." + name;
    try {
        out = it->template get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError(key, "wrong type (got " + std::string(it->type_name()) + ")");
    }
}

inline void reject_unknown(const nlohmann::json &obj, const std::string &section,
                           const std::set<std::string> &allowed) {
    if (!obj.is_object()) {
        throw ConfigError(section.empty() ? "<root>" : section, "expected a JSON object");
    }
    for (const auto &[k, v] : obj.items()) {
        if (!allowed.count(k)) {
            throw ConfigError(section.empty() ? k : section + "." + k, "unknown key");
        }
    }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json &j) {
    using detail::read_field;
    using detail::reject_unknown;
    RunConfig c;
    reject_unknown(j, "", {"dynamics", "count_model", "strategies", "experiments", "trials",
                           "seed", "threads", "output_path", "run"});

    if (j.contains("dynamics")) {
        const auto &d = j["dynamics"];
        reject_unknown(d, "dynamics",
                       {"tau_up", "tau_aux", "t_cycle", "t_detect", "eps_down", "eps_up",
                        "p_repump", "omega_carrier", "eta", "omega_mode", "T1", "T2", "T_pi"});
        auto &p = c.physics;
        read_field(d, "dynamics", "tau_up", p.tau_up);
        read_field(d, "dynamics", "tau_aux", p.tau_aux);
        read_field(d, "dynamics", "t_cycle", p.t_cycle);
        read_field(d, "dynamics", "t_detect", p.t_detect);
        read_field(d, "dynamics", "eps_down", p.eps_down);
        read_field(d, "dynamics", "eps_up", p.eps_up);
        read_field(d, "dynamics", "p_repump", p.p_repump);
        read_field(d, "dynamics", "omega_carrier", p.omega_carrier);
        read_field(d, "dynamics", "eta", p.eta);
        read_field(d, "dynamics", "omega_mode", p.omega_mode);
        read_field(d, "dynamics", "T1", p.T1);
        read_field(d, "dynamics", "T2", p.T2);
        read_field(d, "dynamics", "T_pi", p.T_pi);
    }
    if (j.contains("count_model")) {
        const auto &m = j["count_model"];
        reject_unknown(m, "count_model",
                       {"max_count", "bright_mean", "dark_mean", "update_weight",
                        "bright_threshold", "binary", "pmf_file"});
        read_field(m, "count_model", "max_count", c.model.max_count);
        read_field(m, "count_model", "bright_mean", c.model.bright_mean);
        read_field(m, "count_model", "dark_mean", c.model.dark_mean);
        read_field(m, "count_model", "update_weight", c.model.update_weight);
        read_field(m, "count_model", "bright_threshold", c.model.bright_threshold);
        read_field(m, "count_model", "binary", c.model.binary);
        read_field(m, "count_model", "pmf_file", c.model.pmf_file);
    }
    if (j.contains("strategies")) {
        const auto &s = j["strategies"];
        reject_unknown(s, "strategies",
                       {"threshold_ratio", "max_cycles", "two_ion_threshold_ratio",
                        "candidate_durations", "fixed_duration", "oracle_depth_cap"});
        read_field(s, "strategies", "threshold_ratio", c.strategies.rule.threshold_ratio);
        read_field(s, "strategies", "max_cycles", c.strategies.rule.max_cycles);
        read_field(s, "strategies", "two_ion_threshold_ratio",
                   c.strategies.two_ion_threshold_ratio);
        read_field(s, "strategies", "candidate_durations", c.strategies.candidate_durations);
        if (s.contains("fixed_duration") && !s["fixed_duration"].is_null()) {
            double v = 0;
            read_field(s, "strategies", "fixed_duration", v);
            c.strategies.fixed_duration = v;
        }
        read_field(s, "strategies", "oracle_depth_cap", c.strategies.oracle_depth_cap);
    }
    if (j.contains("experiments")) {
        const auto &e = j["experiments"];
        reject_unknown(e, "experiments",
                       {"system", "prepared", "thresholds", "compare_thresholds", "fixed_counts",
                        "rabi_k", "rabi_durations", "probe_time", "clock_rabi", "detunings",
                        "flop_times", "oracle_decay"});
        auto &x = c.experiments;
        read_field(e, "experiments", "system", x.system);
        if (e.contains("prepared")) {
            if (e["prepared"].is_string()) {
                read_field(e, "experiments", "prepared", x.prepared_label);
            } else {
                read_field(e, "experiments", "prepared", x.prepared);
            }
        }
        read_field(e, "experiments", "thresholds", x.thresholds);
        read_field(e, "experiments", "compare_thresholds", x.compare_thresholds);
        read_field(e, "experiments", "fixed_counts", x.fixed_counts);
        read_field(e, "experiments", "rabi_k", x.rabi_k);
        read_field(e, "experiments", "rabi_durations", x.rabi_durations);
        read_field(e, "experiments", "probe_time", x.probe_time);
        read_field(e, "experiments", "clock_rabi", x.clock_rabi);
        read_field(e, "experiments", "detunings", x.detunings);
        read_field(e, "experiments", "flop_times", x.flop_times);
        read_field(e, "experiments", "oracle_decay", x.oracle_decay);
    }
    read_field(j, "", "trials", c.trials);
    read_field(j, "", "seed", c.seed);
    read_field(j, "", "threads", c.threads);
    read_field(j, "", "output_path", c.output_path);
    if (j.contains("run")) {
        c.run_info = j["run"];
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("--config", "cannot open " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

/// Fully resolved configuration; feeding it back to parse_config reproduces
/// the run. Thread count is omitted since results do not depend on it.
inline nlohmann::json to_json(const RunConfig &c) {
    const auto &p = c.physics;
    nlohmann::json j;
    j["dynamics"] = {{"tau_up", p.tau_up},         {"tau_aux", p.tau_aux},
                     {"t_cycle", p.t_cycle},       {"t_detect", p.t_detect},
                     {"eps_down", p.eps_down},     {"eps_up", p.eps_up},
                     {"p_repump", p.p_repump},     {"omega_carrier", p.omega_carrier},
                     {"eta", p.eta},               {"omega_mode", p.omega_mode},
                     {"T1", p.T1},                 {"T2", p.T2},
                     {"T_pi", p.T_pi}};
    j["count_model"] = {{"max_count", c.model.max_count},
                        {"bright_mean", c.model.bright_mean},
                        {"dark_mean", c.model.dark_mean},
                        {"update_weight", c.model.update_weight},
                        {"bright_threshold", c.model.bright_threshold},
                        {"binary", c.model.binary},
                        {"pmf_file", c.model.pmf_file}};
    j["strategies"] = {{"threshold_ratio", c.strategies.rule.threshold_ratio},
                       {"max_cycles", c.strategies.rule.max_cycles},
                       {"two_ion_threshold_ratio", c.strategies.two_ion_threshold_ratio},
                       {"candidate_durations", c.candidate_durations()},
                       {"fixed_duration", c.strategies.fixed_duration
                                              ? nlohmann::json(*c.strategies.fixed_duration)
                                              : nlohmann::json(nullptr)},
                       {"oracle_depth_cap", c.strategies.oracle_depth_cap}};
    const auto &x = c.experiments;
    j["experiments"] = {{"system", x.system},
                        {"thresholds", x.thresholds},
                        {"compare_thresholds", x.compare_thresholds},
                        {"fixed_counts", x.fixed_counts},
                        {"rabi_k", x.rabi_k},
                        {"rabi_durations", c.rabi_durations()},
                        {"probe_time", x.probe_time},
                        {"clock_rabi", c.clock_rabi()},
                        {"detunings", c.detunings()},
                        {"flop_times", c.flop_times()},
                        {"oracle_decay", x.oracle_decay}};
    if (x.prepared.empty()) {
        j["experiments"]["prepared"] = x.prepared_label;
    } else {
        j["experiments"]["prepared"] = x.prepared;
    }
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["output_path"] = c.output_path;
    j["run"] = c.run_info;
    return j;
}

}  // namespace qndr
