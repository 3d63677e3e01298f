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

// Subcommand dispatch shared by the qndr executable and the tests. Each
// subcommand writes a CSV to the configured output path, a JSON sidecar with
// the resolved configuration next to it, and a one-line summary.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qndr/config.hpp"
#include "qndr/experiments.hpp"
#include "qndr/oracle.hpp"
#include "qndr/strategies.hpp"

namespace qndr {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitResource = 3,
};

inline const std::vector<std::string> &subcommands() {
    static const std::vector<std::string> s{"detect",       "sweep-threshold", "compare-strategies",
                                            "rabi-scan",    "spectroscopy",    "oracle",
                                            "calibrate"};
    return s;
}

/// "<dir>/<stem><suffix>" for an output path "<dir>/<stem>.csv".
inline std::string sibling_path(const std::string &csv_path, const std::string &suffix) {
    std::filesystem::path p(csv_path);
    std::filesystem::path stem = p.extension() == ".csv" ? p.parent_path() / p.stem() : p;
    return stem.string() + suffix;
}

namespace detail {

inline void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
}

inline void write_sweep(const std::string &path, const SweepResult &r) {
    std::ostringstream s;
    r.write_csv(s);
    write_text(path, s.str());
}

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

/// Runs one subcommand. Throws ConfigError or ResourceError, which the
/// command-line driver maps to exit codes 2 and 3.
inline void run_subcommand(const std::string &sub, RunConfig cfg, std::ostream &summary) {
    using detail::fmt;
    const std::string csv = cfg.output_path;
    cfg.run_info["subcommand"] = sub;
    const TrialPlan plan = cfg.plan();
    const StoppingRule &rule = cfg.strategies.rule;
    const PulsePolicy policy = cfg.policy();
    std::ostringstream line;

    if (sub == "detect") {
        System sys = cfg.system();
        ReadoutModel model = cfg.readout(sys);
        StoppingRule r = sys == System::two_ion ? cfg.two_ion_rule() : rule;
        PreparedPopulation prepared = cfg.prepared(sys);
        struct Acc {
            std::vector<DetectionRecord> records;
            DetectionTally tally;
            void merge(const Acc &o) {
                records.insert(records.end(), o.records.begin(), o.records.end());
                tally.merge(o.tally);
            }
        };
        Acc acc = run_chunked<Acc>(plan.trials, plan.seed, plan.threads,
                                   [&](Rng &rng, std::uint64_t count) {
                                       Acc a;
                                       for (std::uint64_t i = 0; i < count; ++i) {
                                           a.records.push_back(
                                               adaptive_detect(prepared, r, policy, model, rng));
                                           a.tally.add(a.records.back());
                                       }
                                       return a;
                                   });
        std::ostringstream jsonl;
        for (const auto &rec : acc.records) {
            jsonl << rec.to_json_line(model.hypotheses()) << '\n';
        }
        detail::write_text(sibling_path(csv, ".jsonl"), jsonl.str());
        SweepResult res;
        res.axis_name = "threshold_ratio";
        res.extra_columns = detection_columns();
        res.points.push_back(detection_point(r.threshold_ratio, acc.tally, cfg.physics, plan.seed));
        detail::write_sweep(csv, res);
        line << "detect: " << acc.tally.detections << " detections, error "
             << fmt(acc.tally.error_rate()) << ", predicted " << fmt(acc.tally.mean_predicted())
             << ", mean cycles " << fmt(acc.tally.mean_cycles());
    } else if (sub == "sweep-threshold" || sub == "calibrate") {
        System sys = cfg.system();
        ReadoutModel model = cfg.readout(sys);
        ThresholdSweep sw = threshold_sweep(cfg.prepared(sys), cfg.experiments.thresholds,
                                            rule.max_cycles, policy, model, plan);
        detail::write_sweep(csv, sw.result);
        line << sub << ":";
        for (std::size_t i = 0; i < sw.tallies.size(); ++i) {
            const auto &p = sw.result.points[i];
            line << " [" << fmt(p.axis) << ": obs " << fmt(p.observed_error) << " pred "
                 << fmt(p.predicted_error);
            if (sub == "calibrate") {
                line << " " << to_string(calibration_check(sw.tallies[i]).status);
            }
            line << "]";
        }
    } else if (sub == "compare-strategies") {
        System sys = cfg.system();
        ReadoutModel model = cfg.readout(sys);
        StrategyComparison cmp = strategy_comparison(
            cfg.prepared(sys), cfg.experiments.compare_thresholds, cfg.experiments.fixed_counts,
            rule.max_cycles, policy, model, plan);
        detail::write_sweep(csv, cmp.adaptive);
        detail::write_sweep(sibling_path(csv, "_fixed.csv"), cmp.fixed);
        std::size_t better = 0;
        for (const auto &m : cmp.matched) {
            better += m.adaptive_better ? 1 : 0;
        }
        line << "compare-strategies: adaptive slope " << fmt(cmp.adaptive_slope)
             << "/s, fixed slope " << fmt(cmp.fixed_slope) << "/s, adaptive better at " << better
             << "/" << cmp.matched.size() << " matched durations";
    } else if (sub == "rabi-scan") {
        RabiScan scan = rabi_flop_scan(cfg.experiments.rabi_k, cfg.rabi_durations(), cfg.physics,
                                       cfg.ancilla(),
                                       Thresholding{cfg.model.bright_threshold}, plan);
        detail::write_sweep(csv, scan.result);
        line << "rabi-scan:";
        double w1 = 0, w2 = 0;
        for (std::size_t i = 0; i < scan.fits.size(); ++i) {
            int k = cfg.experiments.rabi_k[i];
            line << " k=" << k << " omega " << fmt(scan.fits[i].omega) << " rad/s";
            if (k == 1) {
                w1 = scan.fits[i].omega;
            }
            if (k == 2) {
                w2 = scan.fits[i].omega;
            }
        }
        if (w1 > 0 && w2 > 0) {
            line << ", ratio " << fmt(w2 / w1);
        }
    } else if (sub == "spectroscopy") {
        ReadoutModel model = cfg.readout(System::two_ion);
        StoppingRule r = cfg.two_ion_rule();
        SweepResult shape = spectroscopy_scan(cfg.detunings(), cfg.experiments.probe_time,
                                              cfg.clock_rabi(), r, policy, model, plan);
        SweepResult flop =
            spectroscopy_flop(cfg.flop_times(), cfg.clock_rabi(), r, policy, model, plan);
        detail::write_sweep(csv, shape);
        detail::write_sweep(sibling_path(csv, "_flop.csv"), flop);
        std::vector<std::pair<double, double>> xy;
        std::uint64_t errors = 0, n = 0;
        for (const auto &p : shape.points) {
            xy.emplace_back(p.axis, p.extra[0]);
            errors += static_cast<std::uint64_t>(std::llround(p.observed_error * p.trials));
            n += p.trials;
        }
        double fwhm_hz = peak_fwhm(xy) / (2 * std::numbers::pi);
        line << "spectroscopy: detection error " << fmt(static_cast<double>(errors) / n)
             << ", FWHM " << fmt(fwhm_hz) << " Hz (" << fmt(fwhm_hz * cfg.experiments.probe_time)
             << " / t_probe)";
    } else if (sub == "oracle") {
        if (cfg.system() != System::single_ion) {
            throw ConfigError("experiments.system", "oracle supports single_ion only");
        }
        ReadoutModel model = cfg.readout(System::single_ion);
        if (model.likelihoods(0).front().size() > kOracleMaxAlphabet) {
            throw ResourceError("oracle: alphabet of " +
                                std::to_string(model.likelihoods(0).front().size()) +
                                " counts exceeds " + std::to_string(kOracleMaxAlphabet) +
                                "; set count_model.binary or a smaller max_count");
        }
        double decay = cfg.experiments.oracle_decay ? cfg.physics.decay_per_cycle() : 0.0;
        PreparedPopulation prepared = cfg.prepared(System::single_ion);
        SweepResult res;
        res.axis_name = "threshold_ratio";
        res.extra_columns = {"residual_mass"};
        line << "oracle:";
        for (double t : cfg.experiments.thresholds) {
            StoppingRule r{t, rule.max_cycles};
            OracleResult o = exhaustive_error_oracle(r, model.likelihoods(0), prepared, decay,
                                                     cfg.strategies.oracle_depth_cap);
            if (!o.valid()) {
                throw ResourceError("oracle: residual mass " + fmt(o.residual_mass) +
                                    " at threshold " + fmt(t) + " exceeds 1e-6; raise "
                                    "strategies.oracle_depth_cap");
            }
            SweepPoint p;
            p.axis = t;
            p.observed_error = p.ci_low = p.ci_high = o.error;
            p.predicted_error = o.mean_predicted_error;
            p.mean_cycles = o.mean_cycles;
            p.extra = {o.residual_mass};
            res.points.push_back(p);
            line << " [" << fmt(t) << ": error " << std::setprecision(10) << o.error
                 << ", mean cycles " << o.mean_cycles << "]";
        }
        detail::write_sweep(csv, res);
    } else {
        throw ConfigError("<subcommand>", "unknown subcommand '" + sub + "'");
    }

    detail::write_text(sibling_path(csv, ".json"), to_json(cfg).dump(2) + "\n");
    summary << line.str() << '\n';
}

}  // namespace qndr
