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

// Detection strategies: adaptive likelihood-ratio stopping, fixed cycle
// counts, and the contrast-maximizing pulse choice for two primary ions.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qndr/count_model.hpp"
#include "qndr/dynamics.hpp"
#include "qndr/inference.hpp"
#include "qndr/random.hpp"

namespace qndr {

/// Stop once the top-two likelihood ratio reaches `threshold_ratio`, or after
/// `max_cycles` cycles regardless.
struct StoppingRule {
    double threshold_ratio = 1e3;
    int max_cycles = 100;

    void validate() const {
        if (!(threshold_ratio > 1) || !std::isfinite(threshold_ratio)) {
            throw std::domain_error("StoppingRule: threshold_ratio must be finite and > 1");
        }
        if (max_cycles < 1) {
            throw std::domain_error("StoppingRule: max_cycles must be >= 1");
        }
    }

    double log_threshold() const { return std::log(threshold_ratio); }

    /// Compared in log space so long records never overflow the ratio.
    bool reached(double log_gap) const { return log_gap >= log_threshold(); }
    bool reached(const Posterior &post) const { return reached(post.log_likelihood_gap()); }
};

struct PulsePolicy {
    std::vector<double> candidate_durations;
    /// When set, every cycle uses this duration instead of the adaptive choice.
    std::optional<double> fixed_duration;

    static PulsePolicy adaptive(std::vector<double> candidates) {
        return PulsePolicy{std::move(candidates), std::nullopt};
    }
    static PulsePolicy fixed(double duration) { return PulsePolicy{{duration}, duration}; }

    void validate() const {
        if (candidate_durations.empty()) {
            throw std::domain_error("PulsePolicy: no candidate durations");
        }
        for (double d : candidate_durations) {
            if (!(d > 0)) {
                throw std::domain_error("PulsePolicy: durations must be > 0");
            }
        }
        if (fixed_duration && !(*fixed_duration > 0)) {
            throw std::domain_error("PulsePolicy: fixed duration must be > 0");
        }
    }
};

enum class System { single_ion, two_ion };

/// Everything needed to simulate and analyse one detection cycle: the
/// physics, the ancilla count model and the static inference likelihoods
/// P(n | i, pulse) for every pulse the strategy may execute.
class ReadoutModel {
   public:
    /// Single ion with inference likelihoods derived from the transfer errors:
    /// P(n|down) = (1 - eps_down) B(n) + eps_down D(n), and symmetrically for up.
    static ReadoutModel single_ion(const PhysicsParams &params, AncillaCounts ancilla) {
        std::vector<CountPMF> lik{
            CountPMF::mixture(1 - params.eps_down, ancilla.bright, ancilla.dark),
            CountPMF::mixture(params.eps_up, ancilla.bright, ancilla.dark),
        };
        return single_ion(params, std::move(ancilla), std::move(lik));
    }

    /// Single ion with externally supplied likelihoods (imported or learned
    /// histograms), one per hypothesis in {down, up} order.
    static ReadoutModel single_ion(const PhysicsParams &params, AncillaCounts ancilla,
                                   std::vector<CountPMF> likelihoods) {
        params.validate();
        if (likelihoods.size() != 2) {
            throw std::invalid_argument("ReadoutModel: single ion needs two likelihood pmfs");
        }
        for (const auto &l : likelihoods) {
            if (l.size() != ancilla.bright.size()) {
                throw std::invalid_argument("ReadoutModel: likelihood alphabet mismatch");
            }
        }
        ReadoutModel m(System::single_ion, HypothesisSet::single_ion(), params, std::move(ancilla));
        m.add_pulse(params.sideband_pi_time(), std::move(likelihoods));
        return m;
    }

    /// Two ions; one likelihood set per candidate primary-pulse duration.
    static ReadoutModel two_ion(const PhysicsParams &params, AncillaCounts ancilla,
                                const std::vector<double> &durations) {
        params.validate();
        if (durations.empty()) {
            throw std::invalid_argument("ReadoutModel: no pulse durations");
        }
        ReadoutModel m(System::two_ion, HypothesisSet::two_ion(), params, ancilla);
        for (double d : durations) {
            if (!(d > 0)) {
                throw std::domain_error("ReadoutModel: pulse durations must be > 0");
            }
            if (m.find_pulse(d)) {
                continue;
            }
            std::vector<CountPMF> lik;
            for (std::size_t h = 0; h < 3; ++h) {
                int k = 2 - static_cast<int>(h);
                double pb = observed_bright_probability(ideal_bright_probability(k, d, params),
                                                        params);
                lik.push_back(CountPMF::mixture(pb, m.ancilla_.bright, m.ancilla_.dark));
            }
            m.add_pulse(d, std::move(lik));
        }
        return m;
    }

    System system() const { return system_; }
    std::size_t ion_count() const { return system_ == System::single_ion ? 1 : 2; }
    const HypothesisSet &hypotheses() const { return hypotheses_; }
    const PhysicsParams &params() const { return params_; }
    const AncillaCounts &ancilla() const { return ancilla_; }

    std::size_t pulse_count() const { return durations_.size(); }
    double pulse_duration(std::size_t pulse) const { return durations_.at(pulse); }
    const std::vector<CountPMF> &likelihoods(std::size_t pulse) const {
        return likelihoods_.at(pulse);
    }
    const LogLikelihoodTable &table(std::size_t pulse) const { return tables_.at(pulse); }

    std::optional<std::size_t> find_pulse(double duration) const {
        for (std::size_t i = 0; i < durations_.size(); ++i) {
            if (std::abs(durations_[i] - duration) <= 1e-12 * std::max(1.0, duration)) {
                return i;
            }
        }
        return std::nullopt;
    }

    std::size_t pulse_index(double duration) const {
        if (system_ == System::single_ion) {
            return 0;
        }
        auto i = find_pulse(duration);
        if (!i) {
            throw std::out_of_range("ReadoutModel: no likelihoods for pulse duration " +
                                    std::to_string(duration));
        }
        return *i;
    }

    /// Transfer and detect once; the state is not decayed here.
    CycleOutcome run_cycle(TrueState state, std::size_t pulse, Rng &rng) const {
        if (system_ == System::single_ion) {
            return single_ion_cycle(std::move(state), params_, ancilla_, rng);
        }
        return two_ion_cycle(std::move(state), durations_.at(pulse), params_, ancilla_, rng);
    }

   private:
    ReadoutModel(System system, HypothesisSet hypotheses, const PhysicsParams &params,
                 AncillaCounts ancilla)
        : system_(system),
          hypotheses_(std::move(hypotheses)),
          params_(params),
          ancilla_(std::move(ancilla)) {}

    void add_pulse(double duration, std::vector<CountPMF> likelihoods) {
        durations_.push_back(duration);
        tables_.emplace_back(likelihoods);
        likelihoods_.push_back(std::move(likelihoods));
    }

    System system_;
    HypothesisSet hypotheses_;
    PhysicsParams params_;
    AncillaCounts ancilla_;
    std::vector<double> durations_;
    std::vector<std::vector<CountPMF>> likelihoods_;
    std::vector<LogLikelihoodTable> tables_;
};

namespace detail {

inline double pair_contrast(std::size_t a, std::size_t b, std::size_t hypotheses, double duration,
                            const PhysicsParams &params) {
    int ions = static_cast<int>(hypotheses) - 1;
    int ka = ions - static_cast<int>(a);
    int kb = ions - static_cast<int>(b);
    return std::abs(ideal_bright_probability(ka, duration, params) -
                    ideal_bright_probability(kb, duration, params));
}

inline bool better(double value, double duration, double best_value, double best_duration) {
    constexpr double tie = 1e-12;
    if (value > best_value + tie) {
        return true;
    }
    return std::abs(value - best_value) <= tie && duration < best_duration;
}

}  // namespace detail

/// Candidate maximizing |P_bright(i, d) - P_bright(j, d)| for the two most
/// likely hypotheses i, j; ties go to the shorter duration.
inline double select_pulse_duration(const Posterior &post, const std::vector<double> &candidates,
                                    const PhysicsParams &params) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_pulse_duration: no candidates");
    }
    auto [i, j] = post.top_two();
    double best = candidates.front();
    double best_contrast = -1;
    for (double d : candidates) {
        double c = detail::pair_contrast(i, j, post.size(), d, params);
        if (detail::better(c, d, best_contrast, best)) {
            best = d;
            best_contrast = c;
        }
    }
    return best;
}

/// First-cycle choice before any evidence: the candidate whose smallest
/// pairwise contrast over all hypothesis pairs is largest.
inline double opening_pulse_duration(std::size_t hypotheses, const std::vector<double> &candidates,
                                     const PhysicsParams &params) {
    if (candidates.empty()) {
        throw std::invalid_argument("opening_pulse_duration: no candidates");
    }
    double best = candidates.front();
    double best_worst = -1;
    for (double d : candidates) {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < hypotheses; ++a) {
            for (std::size_t b = a + 1; b < hypotheses; ++b) {
                worst = std::min(worst, detail::pair_contrast(a, b, hypotheses, d, params));
            }
        }
        if (detail::better(worst, d, best_worst, best)) {
            best = d;
            best_worst = worst;
        }
    }
    return best;
}

namespace detail {

inline std::size_t choose_pulse(const Posterior &post, int cycle, const PulsePolicy &policy,
                                const ReadoutModel &model) {
    if (model.system() == System::single_ion) {
        return 0;
    }
    if (policy.fixed_duration) {
        return model.pulse_index(*policy.fixed_duration);
    }
    double d = cycle == 0 ? opening_pulse_duration(post.size(), policy.candidate_durations,
                                                   model.params())
                          : select_pulse_duration(post, policy.candidate_durations,
                                                  model.params());
    return model.pulse_index(d);
}

template <class StopFn>
DetectionRecord run_detection(TrueState &state, const PulsePolicy &policy,
                              const ReadoutModel &model, Rng &rng, int cycle_cap, StopFn stop) {
    if (state.ions.size() != model.ion_count()) {
        throw std::invalid_argument("detection: state does not match readout model");
    }
    const PhysicsParams &params = model.params();
    Posterior post = Posterior::reset_prior(model.hypotheses());
    DetectionRecord rec;
    rec.counts.reserve(16);
    rec.pulses.reserve(16);
    rec.resolved = false;
    for (int cycle = 0; cycle < cycle_cap; ++cycle) {
        std::size_t pulse = choose_pulse(post, cycle, policy, model);
        state = evolve_decay(std::move(state), params.t_cycle, params, rng);
        CycleOutcome out = model.run_cycle(std::move(state), pulse, rng);
        state = std::move(out.state);
        post.update(out.count, model.table(pulse));
        rec.counts.push_back(out.count);
        rec.pulses.push_back(model.pulse_duration(pulse));
        if (stop(post, cycle + 1)) {
            rec.resolved = true;
            break;
        }
    }
    Verdict v = winner_and_error(post);
    rec.winner = v.winner;
    rec.predicted_error = v.predicted_error;
    rec.cycles_used = static_cast<int>(rec.counts.size());
    rec.elapsed_time = rec.cycles_used * params.t_cycle;
    return rec;
}

}  // namespace detail

/// Adaptive detection continuing from an existing (evolving) true state.
/// Each cycle: choose pulse, decay over t_cycle, transfer and detect, update.
/// Stops at the rule's threshold; hitting max_cycles leaves the record
/// unresolved with the winner still reported.
inline DetectionRecord adaptive_detect_state(TrueState &state, const StoppingRule &rule,
                                             const PulsePolicy &policy, const ReadoutModel &model,
                                             Rng &rng) {
    return detail::run_detection(state, policy, model, rng, rule.max_cycles,
                                 [&](const Posterior &post, int) { return rule.reached(post); });
}

/// Exactly `n_cycles` cycles, then the Bayesian verdict.
inline DetectionRecord fixed_detect_state(TrueState &state, int n_cycles, const PulsePolicy &policy,
                                          const ReadoutModel &model, Rng &rng) {
    if (n_cycles < 1) {
        throw std::domain_error("fixed_detect: n_cycles must be >= 1");
    }
    return detail::run_detection(state, policy, model, rng, n_cycles,
                                 [&](const Posterior &, int done) { return done >= n_cycles; });
}

inline DetectionRecord adaptive_detect(const PreparedPopulation &prepared, const StoppingRule &rule,
                                       const PulsePolicy &policy, const ReadoutModel &model,
                                       Rng &rng) {
    std::size_t truth = prepared.sample(rng);
    TrueState state = TrueState::from_hypothesis(model.ion_count(), truth);
    DetectionRecord rec = adaptive_detect_state(state, rule, policy, model, rng);
    rec.truth = truth;
    return rec;
}

inline DetectionRecord fixed_detect(const PreparedPopulation &prepared, int n_cycles,
                                    const PulsePolicy &policy, const ReadoutModel &model, Rng &rng) {
    std::size_t truth = prepared.sample(rng);
    TrueState state = TrueState::from_hypothesis(model.ion_count(), truth);
    DetectionRecord rec = fixed_detect_state(state, n_cycles, policy, model, rng);
    rec.truth = truth;
    return rec;
}

}  // namespace qndr
