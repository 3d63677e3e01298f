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


#include "qndr/strategies.hpp"

#include "qndr/experiments.hpp"
#include "gtest/gtest.h"

namespace qndr {
namespace {

// Binary readout: count 1 is bright, 0 dark; no decay and no shelf.
ReadoutModel binary_model(double eps) {
    PhysicsParams p;
    p.eps_down = eps;
    p.eps_up = eps;
    p.p_repump = 1;
    p.tau_up = 1e30;
    return ReadoutModel::single_ion(p, AncillaCounts{CountPMF::indicator(2, 1),
                                                     CountPMF::indicator(2, 0)});
}

const PulsePolicy kSinglePolicy = PulsePolicy::adaptive({40e-6});

TEST(StoppingRule, Validation) {
    EXPECT_THROW(StoppingRule({1.0, 10}).validate(), std::domain_error);
    EXPECT_THROW(StoppingRule({10.0, 0}).validate(), std::domain_error);
    EXPECT_NO_THROW(StoppingRule({1.000001, 1}).validate());
    StoppingRule rule{1000, 100};
    EXPECT_TRUE(rule.reached(std::log(1000.0)));
    EXPECT_FALSE(rule.reached(std::log(999.0)));
}

TEST(AdaptiveDetect, NearUnitThresholdStopsAfterOneCycle) {
    auto model = ReadoutModel::single_ion(PhysicsParams{},
                                          calibrate_bright_dark(10, 0.2, OutcomeAlphabet(30)));
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        auto rec = adaptive_detect(PreparedPopulation::uniform(2), {1.000001, 100}, kSinglePolicy,
                                   model, rng);
        ASSERT_EQ(rec.cycles_used, 1);
        ASSERT_TRUE(rec.resolved);
    }
}

TEST(AdaptiveDetect, RecordInvariants) {
    PhysicsParams p;
    auto model = ReadoutModel::single_ion(p, calibrate_bright_dark(10, 0.2, OutcomeAlphabet(30)));
    Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        auto rec = adaptive_detect(PreparedPopulation::uniform(2), {1e3, 100}, kSinglePolicy,
                                   model, rng);
        ASSERT_EQ(rec.counts.size(), static_cast<std::size_t>(rec.cycles_used));
        ASSERT_EQ(rec.pulses.size(), rec.counts.size());
        ASSERT_DOUBLE_EQ(rec.elapsed_time, rec.cycles_used * p.t_cycle);
        auto post = Posterior::reset_prior(2);
        for (int n : rec.counts) {
            post.update(n, model.likelihoods(0));
        }
        ASSERT_NEAR(rec.predicted_error, winner_and_error(post).predicted_error, 1e-15);
        ASSERT_EQ(rec.winner, winner_and_error(post).winner);
        ASSERT_TRUE(rec.resolved);
        ASSERT_GE(likelihood_ratio(post), 1e3 * (1 - 1e-12));
    }
}

TEST(AdaptiveDetect, CycleCapLeavesUnresolved) {
    auto model = binary_model(0.15);
    Rng rng(3);
    int unresolved = 0;
    for (int i = 0; i < 1000; ++i) {
        auto rec = adaptive_detect(PreparedPopulation::pure(2, 0), {1e6, 3}, kSinglePolicy, model,
                                   rng);
        ASSERT_EQ(rec.cycles_used, 3);
        unresolved += !rec.resolved;
        ASSERT_LE(rec.predicted_error, 0.5);
    }
    EXPECT_EQ(unresolved, 1000);
}

TEST(FixedDetect, SingleCycleError) {
    auto model = binary_model(0.15);
    auto t = detection_run(PreparedPopulation::uniform(2), std::nullopt, 1, kSinglePolicy, model,
                           TrialPlan{200000, 4, 1});
    double sd = std::sqrt(0.15 * 0.85 / 200000);
    EXPECT_NEAR(t.error_rate(), 0.15, 3 * sd);
    EXPECT_DOUBLE_EQ(t.mean_cycles(), 1.0);
}

TEST(FixedDetect, FiveCycleBayesEqualsMajority) {
    auto model = binary_model(0.15);
    auto t = detection_run(PreparedPopulation::uniform(2), std::nullopt, 5, kSinglePolicy, model,
                           TrialPlan{400000, 5, 1});
    // Binomial tail sum_{k>=3} C(5,k) 0.15^k 0.85^(5-k).
    const double expected = 0.026611874999999993;
    double sd = std::sqrt(expected * (1 - expected) / 400000);
    EXPECT_NEAR(t.error_rate(), expected, 3 * sd);
}

TEST(FixedDetect, Noiseless) {
    auto model = binary_model(0.0);
    auto t = detection_run(PreparedPopulation::uniform(2), std::nullopt, 5, kSinglePolicy, model,
                           TrialPlan{20000, 6, 1});
    EXPECT_EQ(t.errors, 0u);
    Rng rng(1);
    EXPECT_THROW(fixed_detect(PreparedPopulation::uniform(2), 0, kSinglePolicy, model, rng),
                 std::domain_error);
}

TEST(PulseSelection, UniformPosteriorUsesFirstPair) {
    PhysicsParams p;
    std::vector<double> candidates = {30e-6, 80e-6};
    // g2 vs g1 contrast: 0.1374 at 30 us, 0.9291 at 80 us.
    EXPECT_EQ(select_pulse_duration(Posterior::reset_prior(3), candidates, p), 80e-6);
}

TEST(PulseSelection, FollowsTopTwo) {
    PhysicsParams p;
    std::vector<double> candidates = {80e-6, 30e-6};
    // g2 vs g0: 0.9909 at 30 us, 0.9291 at 80 us.
    auto g2_g0 = Posterior::from_log_likelihoods({0, -9, -0.5});
    EXPECT_EQ(select_pulse_duration(g2_g0, candidates, p), 30e-6);
    // g1 vs g0: 0.8536 at 30 us, 0 at 80 us.
    auto g1_g0 = Posterior::from_log_likelihoods({-9, 0, -0.5});
    EXPECT_EQ(select_pulse_duration(g1_g0, candidates, p), 30e-6);
    auto g2_g1 = Posterior::from_log_likelihoods({0, -0.5, -9});
    EXPECT_EQ(select_pulse_duration(g2_g1, candidates, p), 80e-6);
}

TEST(PulseSelection, TiesAndDegenerate) {
    PhysicsParams p;
    EXPECT_EQ(select_pulse_duration(Posterior::reset_prior(3), {55e-6}, p), 55e-6);
    // One full k=1 period apart: identical contrasts, shorter wins.
    double period = 2 * p.sideband_pi_time();
    auto g1_g0 = Posterior::from_log_likelihoods({-9, 0, -0.5});
    EXPECT_EQ(select_pulse_duration(g1_g0, {20e-6 + period, 20e-6}, p), 20e-6);
    EXPECT_THROW(select_pulse_duration(g1_g0, {}, p), std::invalid_argument);
}

TEST(PulseSelection, OpeningPulseMaximizesWorstPair) {
    PhysicsParams p;
    // Worst pairwise contrast: 0.1374 at 30 us, 0 at 80 us.
    EXPECT_EQ(opening_pulse_duration(3, {80e-6, 30e-6}, p), 30e-6);
}

TEST(TwoIonDetect, UsesCandidatesOnly) {
    PhysicsParams p;
    auto model = ReadoutModel::two_ion(p, calibrate_bright_dark(10, 0.2, OutcomeAlphabet(30)),
                                       {p.T1, p.T2});
    auto policy = PulsePolicy::adaptive({p.T1, p.T2});
    Rng rng(7);
    int correct = 0;
    for (int i = 0; i < 2000; ++i) {
        auto rec = adaptive_detect(PreparedPopulation::uniform(3), {40, 100}, policy, model, rng);
        ASSERT_EQ(rec.pulses.front(), p.T1);
        for (double d : rec.pulses) {
            ASSERT_TRUE(d == p.T1 || d == p.T2);
        }
        correct += rec.correct();
    }
    EXPECT_GT(correct, 1900);
    auto fixed = PulsePolicy::fixed(p.T2);
    auto rec = fixed_detect(PreparedPopulation::pure(3, 0), 4, fixed, model, rng);
    EXPECT_EQ(rec.pulses, std::vector<double>(4, p.T2));
    EXPECT_THROW(model.pulse_index(55e-6), std::out_of_range);
}

TEST(ReadoutModel, TwoIonLikelihoods) {
    PhysicsParams p;
    auto ancilla = calibrate_bright_dark(10, 0.2, OutcomeAlphabet(30));
    auto model = ReadoutModel::two_ion(p, ancilla, {p.T2, p.T2});
    ASSERT_EQ(model.pulse_count(), 1u);
    // At T2 one ground-state ion completes a full Rabi cycle: bright ideal.
    auto expect = CountPMF::mixture(1 - p.eps_down, ancilla.bright, ancilla.dark);
    EXPECT_LT(total_variation(model.likelihoods(0)[1], expect), 1e-12);
    EXPECT_THROW(ReadoutModel::two_ion(p, ancilla, {}), std::invalid_argument);
    EXPECT_THROW(ReadoutModel::two_ion(p, ancilla, {-1e-6}), std::domain_error);
}

}  // namespace
}  // namespace qndr
