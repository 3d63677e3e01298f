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

// Reproduction harness: repeatability runs, threshold sweeps, adaptive vs
// fixed comparison, sideband Rabi scans, clock spectroscopy and the
// predicted-vs-observed calibration check. Trials are split into fixed-size
// chunks, each with its own generator stream, so results are independent of
// the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qndr/count_model.hpp"
#include "qndr/dynamics.hpp"
#include "qndr/inference.hpp"
#include "qndr/random.hpp"
#include "qndr/strategies.hpp"

namespace qndr {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
    double low = 0;
    double high = 0;
};

/// Wilson score interval for k successes in n trials.
inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = kZ95) {
    if (n == 0) {
        throw std::domain_error("wilson_interval: no trials");
    }
    if (k > n) {
        throw std::domain_error("wilson_interval: more successes than trials");
    }
    double nn = static_cast<double>(n);
    double p = static_cast<double>(k) / nn;
    double z2 = z * z;
    double denom = 1 + z2 / nn;
    double center = (p + z2 / (2 * nn)) / denom;
    double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// SplitMix64 finalizer; derives well-separated per-point seeds.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct TrialPlan {
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0x5EED0F0A1ull;
    unsigned threads = 1;
};

inline constexpr std::uint64_t kChunkTrials = 4096;

/// Runs `chunk(rng, count)` over consecutive chunks of the trials and merges
/// the per-chunk accumulators in chunk order.
template <class Acc, class ChunkFn>
Acc run_chunked(std::uint64_t trials, std::uint64_t seed, unsigned threads, ChunkFn chunk) {
    std::uint64_t chunks = (trials + kChunkTrials - 1) / kChunkTrials;
    std::vector<Acc> parts(chunks);
    auto work = [&](std::uint64_t c) {
        Rng rng = Rng::stream(seed, c);
        std::uint64_t count = std::min(kChunkTrials, trials - c * kChunkTrials);
        parts[c] = chunk(rng, count);
    };
    unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
    if (workers <= 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) {
            work(c);
        }
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::uint64_t c = next++; c < chunks; c = next++) {
                    work(c);
                }
            });
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    Acc total{};
    for (const auto &p : parts) {
        total.merge(p);
    }
    return total;
}

/// Accumulated statistics over detections scored against the simulated truth.
struct DetectionTally {
    std::uint64_t detections = 0;
    std::uint64_t errors = 0;
    std::uint64_t unresolved = 0;
    double sum_predicted = 0;
    double sum_cycles = 0;
    double sum_cycles_sq = 0;

    void add(const DetectionRecord &r) {
        ++detections;
        errors += r.correct() ? 0 : 1;
        unresolved += r.resolved ? 0 : 1;
        sum_predicted += r.predicted_error;
        sum_cycles += r.cycles_used;
        sum_cycles_sq += static_cast<double>(r.cycles_used) * r.cycles_used;
    }
    void merge(const DetectionTally &o) {
        detections += o.detections;
        errors += o.errors;
        unresolved += o.unresolved;
        sum_predicted += o.sum_predicted;
        sum_cycles += o.sum_cycles;
        sum_cycles_sq += o.sum_cycles_sq;
    }

    double error_rate() const { return static_cast<double>(errors) / detections; }
    double mean_predicted() const { return sum_predicted / detections; }
    double mean_cycles() const { return sum_cycles / detections; }
    /// Sample variance of the cycle count.
    double cycles_variance() const {
        double n = static_cast<double>(detections);
        if (n < 2) {
            return 0;
        }
        return std::max(0.0, (sum_cycles_sq - sum_cycles * sum_cycles / n) / (n - 1));
    }
};

/// Consecutive-detection statistics. A disagreement within a pair counts as
/// one error out of the pair's two detections.
struct RepeatabilityTally {
    std::uint64_t pairs = 0;
    std::uint64_t disagreements = 0;
    DetectionTally truth;  // both detections scored against the prepared state
    // Disagreement count implied by the predicted errors: sum and variance of
    // q = pa (1 - pb) + pb (1 - pa) over pairs.
    double implied_disagreements = 0;
    double implied_variance = 0;

    void add(const DetectionRecord &a, const DetectionRecord &b) {
        ++pairs;
        disagreements += a.winner != b.winner ? 1 : 0;
        truth.add(a);
        truth.add(b);
        double q = a.predicted_error * (1 - b.predicted_error) +
                   b.predicted_error * (1 - a.predicted_error);
        implied_disagreements += q;
        implied_variance += q * (1 - q);
    }
    void merge(const RepeatabilityTally &o) {
        pairs += o.pairs;
        disagreements += o.disagreements;
        truth.merge(o.truth);
        implied_disagreements += o.implied_disagreements;
        implied_variance += o.implied_variance;
    }

    /// disagreements / (2 pairs).
    double observed_error() const {
        return static_cast<double>(disagreements) / (2.0 * static_cast<double>(pairs));
    }
    Interval observed_interval(double z = kZ95) const {
        Interval per_pair = wilson_interval(disagreements, pairs, z);
        return {per_pair.low / 2, per_pair.high / 2};
    }
    /// 95% band for observed_error() implied by the predictions.
    Interval predicted_band(double z = kZ95) const {
        double sd = std::sqrt(implied_variance);
        double scale = 2.0 * static_cast<double>(pairs);
        return {std::max(0.0, implied_disagreements - z * sd - 0.5) / scale,
                (implied_disagreements + z * sd + 0.5) / scale};
    }
};

enum class CalibrationStatus { pass, fail, inconclusive };

inline const char *to_string(CalibrationStatus s) {
    switch (s) {
        case CalibrationStatus::pass:
            return "PASS";
        case CalibrationStatus::fail:
            return "FAIL";
        case CalibrationStatus::inconclusive:
            return "INCONCLUSIVE";
    }
    return "?";
}

struct CalibrationReport {
    CalibrationStatus status = CalibrationStatus::inconclusive;
    std::uint64_t pairs = 0;
    double observed_error = 0;
    double mean_predicted_error = 0;
    Interval band;
};

inline constexpr std::uint64_t kCalibrationMinPairs = 1000;

/// Observed error passes when it falls inside the 95% band the predicted
/// errors imply for the disagreement count.
inline CalibrationReport calibration_check(const RepeatabilityTally &tally) {
    CalibrationReport r;
    r.pairs = tally.pairs;
    if (tally.pairs == 0) {
        return r;
    }
    r.observed_error = tally.observed_error();
    r.mean_predicted_error = tally.truth.mean_predicted();
    r.band = tally.predicted_band();
    if (tally.pairs < kCalibrationMinPairs) {
        r.status = CalibrationStatus::inconclusive;
    } else if (r.observed_error >= r.band.low && r.observed_error <= r.band.high) {
        r.status = CalibrationStatus::pass;
    } else {
        r.status = CalibrationStatus::fail;
    }
    return r;
}

inline CalibrationReport calibration_check(
    std::span<const std::pair<DetectionRecord, DetectionRecord>> records) {
    RepeatabilityTally t;
    for (const auto &[a, b] : records) {
        t.add(a, b);
    }
    return calibration_check(t);
}

/// Two consecutive full detections per trial on the same evolving true
/// state; re-preparation only between trials.
inline RepeatabilityTally repeatability_run(const PreparedPopulation &prepared,
                                            const StoppingRule &rule, const PulsePolicy &policy,
                                            const ReadoutModel &model, const TrialPlan &plan) {
    rule.validate();
    policy.validate();
    if (plan.trials < 1) {
        throw std::domain_error("repeatability_run: trials must be >= 1");
    }
    return run_chunked<RepeatabilityTally>(
        plan.trials, plan.seed, plan.threads, [&](Rng &rng, std::uint64_t count) {
            RepeatabilityTally t;
            for (std::uint64_t i = 0; i < count; ++i) {
                std::size_t truth = prepared.sample(rng);
                TrueState state = TrueState::from_hypothesis(model.ion_count(), truth);
                DetectionRecord a = adaptive_detect_state(state, rule, policy, model, rng);
                DetectionRecord b = adaptive_detect_state(state, rule, policy, model, rng);
                a.truth = truth;
                b.truth = truth;
                t.add(a, b);
            }
            return t;
        });
}

/// Single detections scored against the simulated truth.
inline DetectionTally detection_run(const PreparedPopulation &prepared,
                                    std::optional<StoppingRule> rule, int fixed_cycles,
                                    const PulsePolicy &policy, const ReadoutModel &model,
                                    const TrialPlan &plan) {
    policy.validate();
    if (rule) {
        rule->validate();
    }
    return run_chunked<DetectionTally>(
        plan.trials, plan.seed, plan.threads, [&](Rng &rng, std::uint64_t count) {
            DetectionTally t;
            for (std::uint64_t i = 0; i < count; ++i) {
                t.add(rule ? adaptive_detect(prepared, *rule, policy, model, rng)
                           : fixed_detect(prepared, fixed_cycles, policy, model, rng));
            }
            return t;
        });
}

struct SweepPoint {
    double axis = 0;
    double observed_error = std::numeric_limits<double>::quiet_NaN();
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    double predicted_error = std::numeric_limits<double>::quiet_NaN();
    double mean_cycles = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<double> extra;  // aligned with SweepResult::extra_columns
};

struct SweepResult {
    std::string axis_name;
    std::vector<std::string> extra_columns;
    std::vector<SweepPoint> points;

    /// Header row, then one row per point. Doubles print with 17 significant
    /// digits so the file round-trips exactly.
    void write_csv(std::ostream &out) const {
        out << "axis,observed_error,ci_low,ci_high,predicted_error,mean_cycles,trials,seed";
        for (const auto &c : extra_columns) {
            out << ',' << c;
        }
        out << '\n';
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf;
        };
        for (const auto &p : points) {
            num(p.axis);
            for (double v : {p.observed_error, p.ci_low, p.ci_high, p.predicted_error,
                             p.mean_cycles}) {
                out << ',';
                num(v);
            }
            out << ',' << p.trials << ',' << p.seed;
            for (double v : p.extra) {
                out << ',';
                num(v);
            }
            out << '\n';
        }
    }
};

inline const std::vector<std::string> &repeatability_columns() {
    static const std::vector<std::string> cols{
        "true_error", "true_ci_low", "true_ci_high", "mean_time_s", "unresolved_fraction",
        "band_low",   "band_high",   "calibration",
    };
    return cols;
}

inline SweepPoint repeatability_point(double axis, const RepeatabilityTally &t,
                                      const PhysicsParams &params, std::uint64_t seed) {
    SweepPoint p;
    p.axis = axis;
    p.observed_error = t.observed_error();
    Interval ci = t.observed_interval();
    p.ci_low = ci.low;
    p.ci_high = ci.high;
    p.predicted_error = t.truth.mean_predicted();
    p.mean_cycles = t.truth.mean_cycles();
    p.trials = t.pairs;
    p.seed = seed;
    Interval tci = wilson_interval(t.truth.errors, t.truth.detections);
    CalibrationReport cal = calibration_check(t);
    double verdict = cal.status == CalibrationStatus::pass   ? 1.0
                     : cal.status == CalibrationStatus::fail ? 0.0
                                                             : -1.0;
    p.extra = {t.truth.error_rate(),
               tci.low,
               tci.high,
               p.mean_cycles * params.t_cycle,
               static_cast<double>(t.truth.unresolved) / t.truth.detections,
               cal.band.low,
               cal.band.high,
               verdict};
    return p;
}

struct ThresholdSweep {
    SweepResult result;
    std::vector<RepeatabilityTally> tallies;
};

/// Repeatability run per threshold; point i uses seed derive_seed(root, i).
inline ThresholdSweep threshold_sweep(const PreparedPopulation &prepared,
                                      const std::vector<double> &thresholds, int max_cycles,
                                      const PulsePolicy &policy, const ReadoutModel &model,
                                      const TrialPlan &plan) {
    ThresholdSweep out;
    out.result.axis_name = "threshold_ratio";
    out.result.extra_columns = repeatability_columns();
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        StoppingRule rule{thresholds[i], max_cycles};
        TrialPlan p = plan;
        p.seed = derive_seed(plan.seed, i);
        RepeatabilityTally t = repeatability_run(prepared, rule, policy, model, p);
        out.result.points.push_back(repeatability_point(thresholds[i], t, model.params(), p.seed));
        out.tallies.push_back(t);
    }
    return out;
}

inline const std::vector<std::string> &detection_columns() {
    static const std::vector<std::string> cols{"mean_time_s", "errors", "unresolved_fraction"};
    return cols;
}

inline SweepPoint detection_point(double axis, const DetectionTally &t, const PhysicsParams &params,
                                  std::uint64_t seed, double z = kZ95) {
    SweepPoint p;
    p.axis = axis;
    p.observed_error = t.error_rate();
    Interval ci = wilson_interval(t.errors, t.detections, z);
    p.ci_low = ci.low;
    p.ci_high = ci.high;
    p.predicted_error = t.mean_predicted();
    p.mean_cycles = t.mean_cycles();
    p.trials = t.detections;
    p.seed = seed;
    p.extra = {p.mean_cycles * params.t_cycle, static_cast<double>(t.errors),
               static_cast<double>(t.unresolved) / t.detections};
    return p;
}

/// Least-squares slope of ln(error) against x over points with errors > 0
/// and x in [x_min, x_max]. NaN with fewer than two usable points.
inline double log_error_slope(const std::vector<std::pair<double, double>> &xy, double x_min,
                              double x_max) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, e] : xy) {
        if (e <= 0 || x < x_min || x > x_max) {
            continue;
        }
        double y = std::log(e);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double d = n * sxx - sx * sx;
    if (n < 2 || d <= 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (n * sxy - sx * sy) / d;
}

/// One fixed-N point against the adaptive curve interpolated to the same
/// mean cycle count.
struct MatchedComparison {
    int fixed_cycles = 0;
    double fixed_error = 0;
    Interval fixed_ci;        // z = 3
    double adaptive_error = 0;
    double adaptive_ci_high = 0;  // z = 3, interpolated
    bool adaptive_better = false;
};

struct StrategyComparison {
    SweepResult adaptive;
    SweepResult fixed;
    std::vector<MatchedComparison> matched;
    double adaptive_slope = std::numeric_limits<double>::quiet_NaN();  // d ln(error) / d time
    double fixed_slope = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Linear interpolation of ln(y) against x on a curve sorted by x; y values
/// are clamped below at `floor` so empty points stay usable.
inline std::optional<double> interpolate_log(const std::vector<std::pair<double, double>> &xy,
                                             double x, double floor) {
    for (std::size_t i = 0; i + 1 < xy.size(); ++i) {
        auto [x0, y0] = xy[i];
        auto [x1, y1] = xy[i + 1];
        if (x0 <= x && x <= x1 && x1 > x0) {
            double t = (x - x0) / (x1 - x0);
            double l0 = std::log(std::max(y0, floor));
            double l1 = std::log(std::max(y1, floor));
            return std::exp(l0 + t * (l1 - l0));
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Adaptive detections over `thresholds` and fixed-length detections over
/// `fixed_counts`, from the same generative model, scored against truth.
/// Matched comparisons are made at every fixed count >= min_matched_cycles
/// that the adaptive curve brackets; 3-sigma Wilson bounds on both sides.
inline StrategyComparison strategy_comparison(const PreparedPopulation &prepared,
                                              const std::vector<double> &thresholds,
                                              const std::vector<int> &fixed_counts, int max_cycles,
                                              const PulsePolicy &policy, const ReadoutModel &model,
                                              const TrialPlan &plan,
                                              double min_matched_cycles = 3) {
    if (thresholds.empty() || fixed_counts.empty()) {
        throw std::invalid_argument("strategy_comparison: empty axis");
    }
    constexpr double z3 = 3.0;
    StrategyComparison out;
    out.adaptive.axis_name = "threshold_ratio";
    out.fixed.axis_name = "fixed_cycles";
    out.adaptive.extra_columns = detection_columns();
    out.fixed.extra_columns = detection_columns();
    const PhysicsParams &params = model.params();

    std::vector<std::pair<double, double>> adaptive_err, adaptive_hi;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        TrialPlan p = plan;
        p.seed = derive_seed(plan.seed, i);
        DetectionTally t =
            detection_run(prepared, StoppingRule{thresholds[i], max_cycles}, 0, policy, model, p);
        out.adaptive.points.push_back(detection_point(thresholds[i], t, params, p.seed));
        adaptive_err.emplace_back(t.mean_cycles(), t.error_rate());
        adaptive_hi.emplace_back(t.mean_cycles(), wilson_interval(t.errors, t.detections, z3).high);
    }
    std::vector<std::pair<double, double>> fixed_err;
    for (std::size_t i = 0; i < fixed_counts.size(); ++i) {
        TrialPlan p = plan;
        p.seed = derive_seed(plan.seed, 1000 + i);
        DetectionTally t =
            detection_run(prepared, std::nullopt, fixed_counts[i], policy, model, p);
        out.fixed.points.push_back(detection_point(fixed_counts[i], t, params, p.seed));
        fixed_err.emplace_back(t.mean_cycles(), t.error_rate());
        if (fixed_counts[i] >= min_matched_cycles) {
            MatchedComparison m;
            m.fixed_cycles = fixed_counts[i];
            m.fixed_error = t.error_rate();
            m.fixed_ci = wilson_interval(t.errors, t.detections, z3);
            double floor = 0.5 / static_cast<double>(plan.trials);
            auto ae = detail::interpolate_log(adaptive_err, fixed_counts[i], floor);
            auto ah = detail::interpolate_log(adaptive_hi, fixed_counts[i], floor);
            if (ae && ah) {
                m.adaptive_error = *ae;
                m.adaptive_ci_high = *ah;
                m.adaptive_better = m.adaptive_ci_high < m.fixed_ci.low;
                out.matched.push_back(m);
            }
        }
    }
    double lo = min_matched_cycles * params.t_cycle;
    double hi = 0;
    for (int n : fixed_counts) {
        hi = std::max(hi, n * params.t_cycle);
    }
    auto to_time = [&](std::vector<std::pair<double, double>> v) {
        for (auto &[x, y] : v) {
            x *= params.t_cycle;
        }
        return v;
    };
    out.adaptive_slope = log_error_slope(to_time(adaptive_err), lo, hi);
    out.fixed_slope = log_error_slope(to_time(fixed_err), lo, hi);
    return out;
}

/// Best fit of y = offset + amplitude * sin^2(omega t / 2).
struct RabiFit {
    double omega = 0;
    double offset = 0;
    double amplitude = 0;
    double rss = 0;
};

namespace detail {

inline RabiFit fit_at(double omega, std::span<const double> t, std::span<const double> y) {
    // Linear least squares in (offset, amplitude) for fixed omega.
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double s = std::sin(0.5 * omega * t[i]);
        double x = s * s;
        n += 1;
        sx += x;
        sy += y[i];
        sxx += x * x;
        sxy += x * y[i];
    }
    RabiFit f;
    f.omega = omega;
    double d = n * sxx - sx * sx;
    if (d <= 1e-300) {
        f.offset = sy / n;
        f.amplitude = 0;
    } else {
        f.amplitude = (n * sxy - sx * sy) / d;
        f.offset = (sy - f.amplitude * sx) / n;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        double s = std::sin(0.5 * omega * t[i]);
        double r = y[i] - f.offset - f.amplitude * s * s;
        f.rss += r * r;
    }
    return f;
}

}  // namespace detail

/// Frequency fit by a dense scan over [omega_min, omega_max] followed by
/// golden-section refinement of the best bracket.
inline RabiFit fit_rabi_frequency(std::span<const double> t, std::span<const double> y,
                                  double omega_min, double omega_max, int scan_points = 4000) {
    if (t.size() != y.size() || t.size() < 3) {
        throw std::invalid_argument("fit_rabi_frequency: need >= 3 matching samples");
    }
    if (!(omega_max > omega_min && omega_min > 0)) {
        throw std::domain_error("fit_rabi_frequency: bad frequency range");
    }
    double step = (omega_max - omega_min) / scan_points;
    RabiFit best = detail::fit_at(omega_min, t, y);
    for (int i = 1; i <= scan_points; ++i) {
        RabiFit f = detail::fit_at(omega_min + i * step, t, y);
        if (f.rss < best.rss) {
            best = f;
        }
    }
    double a = std::max(omega_min, best.omega - step);
    double b = std::min(omega_max, best.omega + step);
    const double g = (std::sqrt(5.0) - 1) / 2;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    RabiFit fc = detail::fit_at(c, t, y);
    RabiFit fd = detail::fit_at(d, t, y);
    for (int it = 0; it < 100 && b - a > 1e-12 * b; ++it) {
        if (fc.rss < fd.rss) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = detail::fit_at(c, t, y);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = detail::fit_at(d, t, y);
        }
    }
    RabiFit refined = fc.rss < fd.rss ? fc : fd;
    return refined.rss <= best.rss ? refined : best;
}

/// Dark count threshold: counts below it read as dark.
struct Thresholding {
    int bright_threshold = 2;
    bool is_bright(int count) const { return count >= bright_threshold; }
};

inline const std::vector<std::string> &rabi_columns() {
    static const std::vector<std::string> cols{"k_ground", "dark_fraction", "dark_ci_low",
                                               "dark_ci_high", "ideal_excitation"};
    return cols;
}

struct RabiScan {
    SweepResult result;
    /// Fitted sideband frequency per k value, in input order.
    std::vector<RabiFit> fits;
};

/// Single two-ion transfer cycles with k ground-state ions, no decay, one
/// point per (k, duration). Reports the fraction of dark ancilla outcomes.
/// Duration 0 means no primary pulse.
inline RabiScan rabi_flop_scan(const std::vector<int> &k_values, const std::vector<double> &durations,
                               const PhysicsParams &params, const AncillaCounts &ancilla,
                               Thresholding thresholding, const TrialPlan &plan) {
    RabiScan out;
    out.result.axis_name = "duration_s";
    out.result.extra_columns = rabi_columns();
    struct Tally {
        std::uint64_t n = 0, dark = 0;
        void merge(const Tally &o) {
            n += o.n;
            dark += o.dark;
        }
    };
    std::uint64_t index = 0;
    for (int k : k_values) {
        if (k < 0 || k > 2) {
            throw std::domain_error("rabi_flop_scan: k_ground must be 0, 1 or 2");
        }
        std::vector<double> ts, ys;
        for (double d : durations) {
            if (d < 0) {
                throw std::domain_error("rabi_flop_scan: durations must be >= 0");
            }
            std::uint64_t seed = derive_seed(plan.seed, index++);
            Tally t = run_chunked<Tally>(plan.trials, seed, plan.threads,
                                         [&](Rng &rng, std::uint64_t count) {
                                             Tally c;
                                             TrueState start = TrueState::from_hypothesis(
                                                 2, static_cast<std::size_t>(2 - k));
                                             for (std::uint64_t i = 0; i < count; ++i) {
                                                 CycleOutcome o =
                                                     d > 0 ? two_ion_cycle(start, d, params,
                                                                           ancilla, rng)
                                                           : draw_ancilla(true, start, params,
                                                                          ancilla, rng);
                                                 ++c.n;
                                                 c.dark += thresholding.is_bright(o.count) ? 0 : 1;
                                             }
                                             return c;
                                         });
            SweepPoint p;
            p.axis = d;
            p.trials = t.n;
            p.seed = seed;
            p.mean_cycles = 1;
            double frac = static_cast<double>(t.dark) / t.n;
            Interval ci = wilson_interval(t.dark, t.n);
            p.extra = {static_cast<double>(k), frac, ci.low, ci.high,
                       rabi_excitation_prob(k, d, params)};
            out.result.points.push_back(p);
            ts.push_back(d);
            ys.push_back(frac);
        }
        double w1 = params.omega_one_ion();
        RabiFit fit;
        if (k > 0 && w1 > 0 && ts.size() >= 3) {
            fit = fit_rabi_frequency(ts, ys, 0.25 * w1, 3.0 * w1);
        } else if (ts.size() >= 3) {
            // k = 0 has no flopping; report the constant fit.
            fit = detail::fit_at(0.0, ts, ys);
        }
        out.fits.push_back(fit);
    }
    return out;
}

inline const std::vector<std::string> &spectroscopy_columns() {
    static const std::vector<std::string> cols{"signal", "signal_sd", "ideal_signal",
                                               "probe_time_s", "detuning_rad_s"};
    return cols;
}

/// Clock spectroscopy point: both primary ions independently excited with
/// clock_excitation_prob, then one adaptive two-ion detection. The signal is
/// the mean detected number of excited ions, in [0, 2].
inline SweepPoint spectroscopy_point(double axis, double detuning, double probe_time,
                                     double clock_rabi, const StoppingRule &rule,
                                     const PulsePolicy &policy, const ReadoutModel &model,
                                     std::uint64_t trials, std::uint64_t seed, unsigned threads) {
    if (model.system() != System::two_ion) {
        throw std::invalid_argument("spectroscopy: requires the two-ion readout model");
    }
    if (!(probe_time > 0)) {
        throw std::domain_error("spectroscopy: probe time must be > 0");
    }
    struct Tally {
        DetectionTally det;
        double sum_signal = 0, sum_signal2 = 0;
        void merge(const Tally &o) {
            det.merge(o.det);
            sum_signal += o.sum_signal;
            sum_signal2 += o.sum_signal2;
        }
    };
    double p_exc = clock_excitation_prob(detuning, probe_time, clock_rabi);
    Tally t = run_chunked<Tally>(trials, seed, threads, [&](Rng &rng, std::uint64_t count) {
        Tally c;
        for (std::uint64_t i = 0; i < count; ++i) {
            TrueState state = TrueState::pair(IonLevel::down, IonLevel::down);
            for (auto &ion : state.ions) {
                if (rng.bernoulli(p_exc)) {
                    ion = IonLevel::up;
                }
            }
            std::size_t truth = state.hypothesis();
            DetectionRecord r = adaptive_detect_state(state, rule, policy, model, rng);
            r.truth = truth;
            c.det.add(r);
            double s = static_cast<double>(r.winner);  // hypothesis index = excited ions
            c.sum_signal += s;
            c.sum_signal2 += s * s;
        }
        return c;
    });
    SweepPoint p = detection_point(axis, t.det, model.params(), seed);
    double n = static_cast<double>(t.det.detections);
    double mean = t.sum_signal / n;
    double var = std::max(0.0, t.sum_signal2 / n - mean * mean);
    p.extra = {mean, std::sqrt(var), 2 * p_exc, probe_time, detuning};
    return p;
}

/// Lineshape over detunings at a fixed probe time.
inline SweepResult spectroscopy_scan(const std::vector<double> &detunings, double probe_time,
                                     double clock_rabi, const StoppingRule &rule,
                                     const PulsePolicy &policy, const ReadoutModel &model,
                                     const TrialPlan &plan) {
    SweepResult out;
    out.axis_name = "detuning_rad_s";
    out.extra_columns = spectroscopy_columns();
    for (std::size_t i = 0; i < detunings.size(); ++i) {
        out.points.push_back(spectroscopy_point(detunings[i], detunings[i], probe_time, clock_rabi,
                                                rule, policy, model, plan.trials,
                                                derive_seed(plan.seed, i), plan.threads));
    }
    return out;
}

/// Resonant Rabi flopping: signal against probe time at zero detuning.
inline SweepResult spectroscopy_flop(const std::vector<double> &probe_times, double clock_rabi,
                                     const StoppingRule &rule, const PulsePolicy &policy,
                                     const ReadoutModel &model, const TrialPlan &plan) {
    SweepResult out;
    out.axis_name = "probe_time_s";
    out.extra_columns = spectroscopy_columns();
    for (std::size_t i = 0; i < probe_times.size(); ++i) {
        out.points.push_back(spectroscopy_point(probe_times[i], 0.0, probe_times[i], clock_rabi,
                                                rule, policy, model, plan.trials,
                                                derive_seed(plan.seed, 5000 + i), plan.threads));
    }
    return out;
}

/// Full width at half maximum of a sampled peak, measured between the
/// half-level crossings around the maximum (half level = midpoint of min
/// and max). NaN when the peak is not bracketed.
inline double peak_fwhm(const std::vector<std::pair<double, double>> &xy) {
    if (xy.size() < 3) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t top = 0;
    double lo = xy[0].second;
    for (std::size_t i = 0; i < xy.size(); ++i) {
        if (xy[i].second > xy[top].second) {
            top = i;
        }
        lo = std::min(lo, xy[i].second);
    }
    double half = 0.5 * (xy[top].second + lo);
    auto cross = [&](std::size_t i, std::size_t j) {
        auto [x0, y0] = xy[i];
        auto [x1, y1] = xy[j];
        return x0 + (half - y0) * (x1 - x0) / (y1 - y0);
    };
    std::optional<double> left, right;
    for (std::size_t i = top; i > 0; --i) {
        if (xy[i - 1].second <= half) {
            left = cross(i - 1, i);
            break;
        }
    }
    for (std::size_t i = top; i + 1 < xy.size(); ++i) {
        if (xy[i + 1].second <= half) {
            right = cross(i, i + 1);
            break;
        }
    }
    if (!left || !right) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return *right - *left;
}

}  // namespace qndr
