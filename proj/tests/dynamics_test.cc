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


#include "qndr/dynamics.hpp"

#include <numbers>

#include "gtest/gtest.h"

namespace qndr {
namespace {

constexpr double kPi = std::numbers::pi;

AncillaCounts default_ancilla() { return calibrate_bright_dark(10, 0.2, OutcomeAlphabet(30)); }

PhysicsParams noiseless() {
    PhysicsParams p;
    p.eps_down = 0;
    p.eps_up = 0;
    p.p_repump = 1;
    p.tau_up = 1e30;
    return p;
}

// Binomial frequency within 4 standard errors.
void expect_rate(int hits, int trials, double p, const char *what) {
    double sd = std::sqrt(p * (1 - p) / trials);
    EXPECT_NEAR(static_cast<double>(hits) / trials, p, 4 * sd + 1e-12) << what;
}

TEST(PhysicsParams, Defaults) {
    PhysicsParams p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_NEAR(p.decay_per_cycle(), 9.99950001666625e-05, 1e-18);
    EXPECT_NEAR(p.omega_one_ion(), 2 * kPi / 80e-6, 1e-6);
    EXPECT_NEAR(p.sideband_pi_time(), 40e-6, 1e-15);
    p.eps_down = 0.6;
    p.eps_up = 0.4;
    EXPECT_THROW(p.validate(), std::domain_error);
    p = PhysicsParams{};
    p.t_cycle = 0;
    EXPECT_THROW(p.validate(), std::domain_error);
}

TEST(TrueState, Hypotheses) {
    for (std::size_t h = 0; h <= 2; ++h) {
        EXPECT_EQ(TrueState::from_hypothesis(2, h).hypothesis(), h);
    }
    auto shelved = TrueState::pair(IonLevel::aux, IonLevel::up);
    EXPECT_EQ(shelved.ground_manifold(), 1);
    EXPECT_EQ(shelved.available_down(), 0);
    EXPECT_EQ(shelved.hypothesis(), 1u);
    EXPECT_THROW(TrueState::from_hypothesis(1, 2), std::out_of_range);
}

TEST(Decay, ZeroTimeIsIdentity) {
    PhysicsParams p;
    p.tau_up = 1e-9;
    p.p_repump = 1;
    Rng rng(1);
    auto s = TrueState::pair(IonLevel::up, IonLevel::aux);
    EXPECT_EQ(evolve_decay(s, 0, p, rng), s);
    EXPECT_THROW(evolve_decay(s, -1, p, rng), std::domain_error);
}

TEST(Decay, ExponentialLaw) {
    PhysicsParams p;
    Rng rng(7);
    const int trials = 200000;
    int decayed = 0;
    for (int i = 0; i < trials; ++i) {
        decayed += evolve_decay(TrueState::single(IonLevel::up), p.tau_up, p, rng).ions[0] ==
                   IonLevel::down;
    }
    expect_rate(decayed, trials, 0.6321205588285577, "dt = tau");
}

TEST(Decay, SurvivalOverCycles) {
    PhysicsParams p;
    p.tau_up = 20 * p.t_cycle;
    Rng rng(8);
    const int trials = 50000;
    const int cycles = 10;
    int alive = 0;
    for (int i = 0; i < trials; ++i) {
        auto s = TrueState::single(IonLevel::up);
        for (int c = 0; c < cycles; ++c) {
            s = evolve_decay(s, p.t_cycle, p, rng);
        }
        alive += s.ions[0] == IonLevel::up;
    }
    expect_rate(alive, trials, std::exp(-0.5), "survival");
}

TEST(Decay, ShelfRelaxes) {
    PhysicsParams p;
    p.p_repump = 0.7;
    Rng rng(9);
    const int trials = 100000;
    int relaxed = 0;
    for (int i = 0; i < trials; ++i) {
        relaxed += evolve_decay(TrueState::single(IonLevel::aux), p.t_cycle, p, rng).ions[0] ==
                   IonLevel::down;
    }
    expect_rate(relaxed, trials, 0.7, "repump");
}

TEST(SingleIonCycle, NoiselessDark) {
    auto p = noiseless();
    auto ancilla = calibrate_bright_dark(10, 0, OutcomeAlphabet(30));
    Rng rng(10);
    for (int i = 0; i < 10000; ++i) {
        auto out = single_ion_cycle(TrueState::single(IonLevel::up), p, ancilla, rng);
        ASSERT_EQ(out.count, 0);
        ASSERT_EQ(out.state.ions[0], IonLevel::up);
    }
}

TEST(SingleIonCycle, DownShelvesAndReadsBright) {
    auto p = noiseless();
    auto ancilla = default_ancilla();
    Rng rng(11);
    const int trials = 100000;
    double sum = 0;
    for (int i = 0; i < trials; ++i) {
        auto out = single_ion_cycle(TrueState::single(IonLevel::down), p, ancilla, rng);
        ASSERT_TRUE(out.bright);
        ASSERT_EQ(out.state.ions[0], IonLevel::aux);
        sum += out.count;
    }
    // Poisson(10) standard error over 1e5 draws, 3 sigma.
    EXPECT_NEAR(sum / trials, ancilla.bright.mean(), 3 * std::sqrt(10.0 / trials));
    EXPECT_NEAR(ancilla.bright.mean(), 10, 1e-6);  // overflow bin holds the tail
}

TEST(SingleIonCycle, NoiselessIdentity) {
    auto p = noiseless();
    auto ancilla = calibrate_bright_dark(10, 0, OutcomeAlphabet(30));
    // Non-overlapping count pmfs: dark is the indicator at 0 and bright has
    // its zero-count bin removed.
    std::vector<double> bright = ancilla.bright.probabilities();
    bright[0] = 0;
    double total = std::accumulate(bright.begin(), bright.end(), 0.0);
    for (double &b : bright) {
        b /= total;
    }
    ancilla.bright = CountPMF(bright, 1e-9);
    Rng rng(12);
    for (int i = 0; i < 100000; ++i) {
        auto level = rng.bernoulli(0.5) ? IonLevel::up : IonLevel::down;
        auto s = evolve_decay(TrueState::single(level), p.t_cycle, p, rng);
        auto out = single_ion_cycle(s, p, ancilla, rng);
        ASSERT_EQ(out.count >= 1, level == IonLevel::down);
    }
}

TEST(SingleIonCycle, TransferErrorDominates) {
    PhysicsParams p;
    auto ancilla = default_ancilla();
    Rng rng(13);
    const int trials = 100000;
    int wrong = 0;
    for (int i = 0; i < trials; ++i) {
        bool down = i % 2 == 0;
        auto out = single_ion_cycle(TrueState::single(down ? IonLevel::down : IonLevel::up), p,
                                    ancilla, rng);
        wrong += (out.count >= 2) != down;
    }
    // 0.15 folded with the threshold-at-2 confusion of the count model.
    double flip_bright = 1 - ancilla.bright.tail_from(2);
    double flip_dark = ancilla.dark.tail_from(2);
    double expected = 0.5 * (0.85 * flip_bright + 0.15 * (1 - flip_dark)) +
                      0.5 * (0.85 * flip_dark + 0.15 * (1 - flip_bright));
    expect_rate(wrong, trials, expected, "single-cycle error");
    EXPECT_NEAR(expected, 0.15, 0.01);
}

TEST(Rabi, Examples) {
    PhysicsParams p;
    double pi_time = kPi / p.omega_one_ion();
    EXPECT_EQ(rabi_excitation_prob(0, 1.234e-4, p), 0.0);
    EXPECT_NEAR(rabi_excitation_prob(1, pi_time, p), 1.0, 1e-15);
    EXPECT_NEAR(rabi_excitation_prob(2, pi_time, p), 0.6331276710207078, 1e-12);
    EXPECT_THROW(rabi_excitation_prob(3, 1e-6, p), std::domain_error);
    EXPECT_THROW(rabi_excitation_prob(1, -1e-6, p), std::domain_error);
}

TEST(Rabi, ProbabilitiesBounded) {
    PhysicsParams p;
    for (int k = 0; k <= 2; ++k) {
        for (int i = 0; i <= 4000; ++i) {
            double t = i * 0.1e-6;
            double ideal = ideal_bright_probability(k, t, p);
            double observed = observed_bright_probability(ideal, p);
            ASSERT_GE(ideal, 0);
            ASSERT_LE(ideal, 1);
            ASSERT_GE(observed, 0);
            ASSERT_LE(observed, 1);
        }
    }
}

TEST(TwoIonCycle, NoiselessBrightFractions) {
    auto p = noiseless();
    auto ancilla = default_ancilla();
    double pi_time = kPi / p.omega_one_ion();
    Rng rng(14);
    const int trials = 100000;
    int bright0 = 0, bright1 = 0, bright2 = 0;
    for (int i = 0; i < trials; ++i) {
        bright0 += two_ion_cycle(TrueState::from_hypothesis(2, 2), pi_time, p, ancilla, rng).bright;
        bright1 += two_ion_cycle(TrueState::from_hypothesis(2, 1), pi_time, p, ancilla, rng).bright;
        bright2 += two_ion_cycle(TrueState::from_hypothesis(2, 0), pi_time, p, ancilla, rng).bright;
    }
    EXPECT_EQ(bright0, trials);
    EXPECT_EQ(bright1, 0);
    expect_rate(bright2, trials, 1 - 0.6331276710207078, "k=2 bright");
}

TEST(TwoIonCycle, ExcitationShelvesOneIon) {
    auto p = noiseless();
    auto ancilla = default_ancilla();
    Rng rng(15);
    int first = 0;
    for (int i = 0; i < 20000; ++i) {
        auto out = two_ion_cycle(TrueState::from_hypothesis(2, 0), p.sideband_pi_time() / std::sqrt(2.0),
                                 p, ancilla, rng);
        ASSERT_FALSE(out.bright);
        ASSERT_EQ(out.state.available_down(), 1);
        first += out.state.ions[0] == IonLevel::aux;
    }
    expect_rate(first, 20000, 0.5, "shelved ion choice");
    EXPECT_THROW(two_ion_cycle(TrueState::from_hypothesis(2, 0), 0, p, ancilla, rng),
                 std::domain_error);
    EXPECT_THROW(single_ion_cycle(TrueState::from_hypothesis(2, 0), p, ancilla, rng),
                 std::invalid_argument);
}

TEST(Clock, Lineshape) {
    double rabi = 2 * kPi * 5;
    double t = kPi / rabi;
    EXPECT_NEAR(clock_excitation_prob(0, t, rabi), 1.0, 1e-15);
    EXPECT_NEAR(clock_excitation_prob(rabi, t, rabi), 0.3165638355103539, 1e-12);
    EXPECT_LT(clock_excitation_prob(1e9, t, rabi), 1e-12);
    EXPECT_THROW(clock_excitation_prob(0, -1, rabi), std::domain_error);
}

TEST(Prepared, Sampling) {
    EXPECT_THROW(PreparedPopulation({0.5, 0.6}), std::domain_error);
    auto pop = PreparedPopulation({0.2, 0.0, 0.8});
    Rng rng(16);
    int first = 0;
    for (int i = 0; i < 100000; ++i) {
        auto h = pop.sample(rng);
        ASSERT_NE(h, 1u);
        first += h == 0;
    }
    expect_rate(first, 100000, 0.2, "prepared");
    EXPECT_EQ(PreparedPopulation::pure(3, 2).sample(rng), 2u);
}

}  // namespace
}  // namespace qndr
