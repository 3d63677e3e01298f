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

// Classical stochastic model of the repetitive transfer cycle: true-state
// decay, shelving through the auxiliary level, transfer errors and the
// sideband / clock excitation probabilities.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qndr/count_model.hpp"
#include "qndr/random.hpp"

namespace qndr {

struct PhysicsParams {
    double tau_up = 21.0;        // upper clock-state lifetime, s
    double tau_aux = 300e-6;     // auxiliary (shelf) level lifetime, s
    double t_cycle = 2.1e-3;     // one detection cycle including dead time, s
    double t_detect = 200e-6;    // ancilla fluorescence window, s
    double eps_down = 0.15;      // wrong-signature probability, down ion / bright-ideal outcome
    double eps_up = 0.15;        // wrong-signature probability, up ion / dark-ideal outcome
    double p_repump = 0.99;      // shelf relaxed back to down by the next cycle
    double omega_carrier = 2 * std::numbers::pi / 80e-6 / 0.1;  // carrier Rabi frequency, rad/s
    double eta = 0.1;                                           // Lamb-Dicke parameter
    double omega_mode = 2 * std::numbers::pi * 2.62e6;          // coupling mode, rad/s
    double T1 = 30e-6;
    double T2 = 80e-6;
    double T_pi = 10e-6;  // ancilla sideband pi-time

    void validate() const {
        auto positive = [](double v, const char *name) {
            if (!(v > 0)) {
                throw std::domain_error(std::string("PhysicsParams: ") + name + " must be > 0");
            }
        };
        auto probability = [](double v, const char *name) {
            if (!(v >= 0 && v <= 1)) {
                throw std::domain_error(std::string("PhysicsParams: ") + name +
                                        " must lie in [0, 1]");
            }
        };
        positive(tau_up, "tau_up");
        positive(tau_aux, "tau_aux");
        positive(t_cycle, "t_cycle");
        positive(t_detect, "t_detect");
        positive(T1, "T1");
        positive(T2, "T2");
        positive(T_pi, "T_pi");
        positive(omega_mode, "omega_mode");
        probability(eps_down, "eps_down");
        probability(eps_up, "eps_up");
        probability(p_repump, "p_repump");
        if (!(eps_down + eps_up < 1)) {
            throw std::domain_error("PhysicsParams: eps_down + eps_up must be < 1");
        }
        if (!(omega_carrier >= 0) || !(eta >= 0)) {
            throw std::domain_error("PhysicsParams: omega_carrier and eta must be >= 0");
        }
    }

    /// Probability an up ion decays during one cycle.
    double decay_per_cycle() const { return -std::expm1(-t_cycle / tau_up); }

    /// Sideband Rabi frequency with one ground-state ion, Omega_c * eta.
    double omega_one_ion() const { return omega_carrier * eta; }

    /// pi-time of the one-ion sideband transfer pulse.
    double sideband_pi_time() const {
        double w = omega_one_ion();
        return w > 0 ? std::numbers::pi / w : 0.0;
    }
};

enum class IonLevel { down, up, aux };

/// True internal state of the primary ions (one or two). `aux` marks an ion
/// still shelved from the previous cycle.
struct TrueState {
    std::vector<IonLevel> ions;

    static TrueState single(IonLevel level) { return TrueState{{level}}; }
    static TrueState pair(IonLevel a, IonLevel b) { return TrueState{{a, b}}; }

    /// Ions in the ground manifold (down or shelved).
    int ground_manifold() const {
        int k = 0;
        for (auto l : ions) {
            k += l != IonLevel::up;
        }
        return k;
    }

    /// Ions available to the transfer pulse this cycle.
    int available_down() const {
        int k = 0;
        for (auto l : ions) {
            k += l == IonLevel::down;
        }
        return k;
    }

    /// Hypothesis index: single ion {down=0, up=1}; two ions {g2=0, g1=1, g0=2}.
    std::size_t hypothesis() const {
        return ions.size() - static_cast<std::size_t>(ground_manifold());
    }

    static TrueState from_hypothesis(std::size_t ion_count, std::size_t hypothesis) {
        if (hypothesis > ion_count) {
            throw std::out_of_range("TrueState: hypothesis index out of range");
        }
        TrueState s;
        s.ions.assign(ion_count, IonLevel::down);
        for (std::size_t i = 0; i < hypothesis; ++i) {
            s.ions[ion_count - 1 - i] = IonLevel::up;
        }
        return s;
    }

    friend bool operator==(const TrueState &, const TrueState &) = default;
};

/// Classical populations of the prepared hypotheses.
class PreparedPopulation {
   public:
    explicit PreparedPopulation(std::vector<double> probs) : probs_(std::move(probs)) {
        double total = 0;
        for (double p : probs_) {
            if (!(p >= 0)) {
                throw std::domain_error("PreparedPopulation: negative population");
            }
            total += p;
        }
        if (probs_.empty() || std::abs(total - 1) > 1e-9) {
            throw std::domain_error("PreparedPopulation: populations must sum to 1");
        }
    }

    static PreparedPopulation pure(std::size_t hypotheses, std::size_t which) {
        std::vector<double> p(hypotheses, 0.0);
        p.at(which) = 1;
        return PreparedPopulation(std::move(p));
    }
    static PreparedPopulation uniform(std::size_t hypotheses) {
        return PreparedPopulation(
            std::vector<double>(hypotheses, 1.0 / static_cast<double>(hypotheses)));
    }

    std::size_t size() const { return probs_.size(); }
    const std::vector<double> &probs() const { return probs_; }

    std::size_t sample(Rng &rng) const {
        double u = rng.uniform();
        double acc = 0;
        for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
            acc += probs_[i];
            if (u < acc) {
                return i;
            }
        }
        std::size_t last = probs_.size() - 1;
        while (last > 0 && probs_[last] == 0) {
            --last;
        }
        return last;
    }

   private:
    std::vector<double> probs_;
};

/// Evolve the true state over `dt`: each up ion decays to down with
/// probability 1 - exp(-dt / tau_up); a shelved ion returns to down with
/// probability p_repump (only when dt > 0, i.e. across a cycle boundary).
inline TrueState evolve_decay(TrueState state, double dt, const PhysicsParams &params, Rng &rng) {
    if (dt < 0) {
        throw std::domain_error("evolve_decay: dt must be >= 0");
    }
    if (dt == 0) {
        return state;
    }
    double p_decay = -std::expm1(-dt / params.tau_up);
    for (auto &ion : state.ions) {
        if (ion == IonLevel::up) {
            if (rng.bernoulli(p_decay)) {
                ion = IonLevel::down;
            }
        } else if (ion == IonLevel::aux) {
            if (rng.bernoulli(params.p_repump)) {
                ion = IonLevel::down;
            }
        }
    }
    return state;
}

struct CycleOutcome {
    int count = 0;
    bool bright = false;  // ancilla outcome after transfer errors
    TrueState state;
};

inline CycleOutcome draw_ancilla(bool ideal_bright, TrueState state, const PhysicsParams &params,
                                 const AncillaCounts &ancilla, Rng &rng) {
    bool bright = ideal_bright ? !rng.bernoulli(params.eps_down) : rng.bernoulli(params.eps_up);
    int count = bright ? ancilla.bright.sample(rng) : ancilla.dark.sample(rng);
    return CycleOutcome{count, bright, std::move(state)};
}

/// One transfer-and-detect cycle for a single primary ion.
///
/// A down ion is shelved by the transfer pulse and gives the bright
/// signature (wrong with probability eps_down). Up ions and ions still
/// shelved from the previous cycle give the dark signature (wrong with
/// probability eps_up). Decay between cycles is the caller's job.
inline CycleOutcome single_ion_cycle(TrueState state, const PhysicsParams &params,
                                     const AncillaCounts &ancilla, Rng &rng) {
    if (state.ions.size() != 1) {
        throw std::invalid_argument("single_ion_cycle: expects one primary ion");
    }
    bool ideal_bright = state.ions[0] == IonLevel::down;
    if (ideal_bright) {
        state.ions[0] = IonLevel::aux;
    }
    return draw_ancilla(ideal_bright, std::move(state), params, ancilla, rng);
}

/// Sideband excitation probability sin^2(Omega_k t / 2) with k ground-state
/// ions sharing one motional quantum: Omega_k = sqrt(k) * Omega_c * eta.
inline double rabi_excitation_prob(int k_ground, double duration, const PhysicsParams &params) {
    if (k_ground < 0 || k_ground > 2) {
        throw std::domain_error("rabi_excitation_prob: k_ground must be 0, 1 or 2");
    }
    if (duration < 0) {
        throw std::domain_error("rabi_excitation_prob: duration must be >= 0");
    }
    double omega = std::sqrt(static_cast<double>(k_ground)) * params.omega_one_ion();
    double s = std::sin(0.5 * omega * duration);
    return s * s;
}

/// Ideal (error-free) probability that the ancilla ends bright after the
/// two-ion sequence: bright unless the primary ions absorbed the quantum.
inline double ideal_bright_probability(int k_ground, double duration, const PhysicsParams &params) {
    return 1.0 - rabi_excitation_prob(k_ground, duration, params);
}

/// Bright probability after transfer errors are folded in.
inline double observed_bright_probability(double ideal_bright, const PhysicsParams &params) {
    return ideal_bright * (1 - params.eps_down) + (1 - ideal_bright) * params.eps_up;
}

/// One cycle of the two-ion sequence with a variable-length primary pulse.
inline CycleOutcome two_ion_cycle(TrueState state, double pulse_duration,
                                  const PhysicsParams &params, const AncillaCounts &ancilla,
                                  Rng &rng) {
    if (state.ions.size() != 2) {
        throw std::invalid_argument("two_ion_cycle: expects two primary ions");
    }
    if (!(pulse_duration > 0)) {
        throw std::domain_error("two_ion_cycle: pulse duration must be > 0");
    }
    int k = state.available_down();
    bool excited = rng.bernoulli(rabi_excitation_prob(k, pulse_duration, params));
    if (excited) {
        std::size_t pick = k == 2 ? static_cast<std::size_t>(rng.below(2))
                                  : (state.ions[0] == IonLevel::down ? 0 : 1);
        state.ions[pick] = IonLevel::aux;
    }
    return draw_ancilla(!excited, std::move(state), params, ancilla, rng);
}

/// Rabi lineshape (Omega^2 / (Omega^2 + delta^2)) sin^2(sqrt(Omega^2 + delta^2) t / 2).
inline double clock_excitation_prob(double detuning, double probe_time, double rabi) {
    if (probe_time < 0) {
        throw std::domain_error("clock_excitation_prob: probe time must be >= 0");
    }
    double w2 = rabi * rabi + detuning * detuning;
    if (w2 == 0) {
        return 0.0;
    }
    double s = std::sin(0.5 * std::sqrt(w2) * probe_time);
    return rabi * rabi / w2 * s * s;
}

}  // namespace qndr
