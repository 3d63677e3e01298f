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


#include "qndr/count_model.hpp"

#include <sstream>

#include "gtest/gtest.h"

namespace qndr {
namespace {

// Independent Poisson evaluation: direct n-term product, no recurrence sharing.
double poisson_direct(double mean, int n) {
    double p = std::exp(-mean);
    for (int k = 1; k <= n; ++k) {
        p *= mean / k;
    }
    return p;
}

TEST(CountPMF, UniformLookup) {
    auto pmf = CountPMF::uniform(3);
    EXPECT_DOUBLE_EQ(pmf(1), 1.0 / 3.0);
}

TEST(CountPMF, DirectLookup) {
    CountPMF pmf({0.9, 0.08, 0.02});
    EXPECT_DOUBLE_EQ(pmf.eval(2), 0.02);
    EXPECT_THROW(pmf(3), std::out_of_range);
    EXPECT_THROW(pmf(-1), std::out_of_range);
}

TEST(CountPMF, RejectsBadVectors) {
    EXPECT_THROW(CountPMF({0.5, 0.6}), std::domain_error);
    EXPECT_THROW(CountPMF({1.2, -0.2}), std::domain_error);
    EXPECT_THROW(CountPMF({1.0}), std::domain_error);
}

TEST(CountPMF, TruncatedPoissonMatchesDirectSum) {
    auto pmf = CountPMF::truncated_poisson(10, OutcomeAlphabet(30));
    EXPECT_NEAR(pmf(10), 0.1251100357211333, 1e-13);
    double tail = 1.0;
    for (int n = 0; n < 30; ++n) {
        EXPECT_NEAR(pmf(n), poisson_direct(10, n), 1e-15) << n;
        tail -= poisson_direct(10, n);
    }
    EXPECT_NEAR(pmf(30), tail, 1e-12);
    double total = 0;
    for (double p : pmf.probabilities()) {
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(CountPMF, SampleDegenerate) {
    CountPMF pmf({1, 0, 0});
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(pmf.sample(rng), 0);
    }
    auto last = CountPMF::indicator(4, 3);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(last.sample(rng), 3);
    }
}

TEST(CountPMF, SampleFrequency) {
    CountPMF pmf({0.5, 0.5});
    Rng rng(17);
    const int draws = 1000000;
    int zeros = 0;
    for (int i = 0; i < draws; ++i) {
        zeros += pmf.sample(rng) == 0;
    }
    EXPECT_NEAR(static_cast<double>(zeros) / draws, 0.5, 0.002);
}

TEST(CountPMF, SampleDeterministic) {
    auto pmf = CountPMF::truncated_poisson(2, OutcomeAlphabet(30));
    Rng a(99), b(99);
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(pmf.sample(a), pmf.sample(b));
    }
}

TEST(HistogramLearner, FullWeightReplaces) {
    HistogramLearner learner({CountPMF({0.1, 0.2, 0.3, 0.4}), CountPMF::uniform(4)}, 1.0);
    learner.update(0, 3);
    EXPECT_EQ(learner.pmf(0), CountPMF::indicator(4, 3));
    EXPECT_EQ(learner.pmf(1), CountPMF::uniform(4));
}

TEST(HistogramLearner, SmallWeightArithmetic) {
    HistogramLearner learner({CountPMF::uniform(2), CountPMF::uniform(2)}, 0.01);
    learner.update(0, 0);
    EXPECT_NEAR(learner.pmf(0)(0), 0.505, 1e-15);
    EXPECT_NEAR(learner.pmf(0)(1), 0.495, 1e-15);
}

TEST(HistogramLearner, OverflowClamps) {
    HistogramLearner learner({CountPMF::uniform(3), CountPMF::uniform(3)}, 1.0);
    learner.update(1, 17);
    EXPECT_EQ(learner.pmf(1), CountPMF::indicator(3, 2));
    EXPECT_THROW(learner.update(0, -1), std::out_of_range);
    EXPECT_THROW(learner.update(2, 0), std::out_of_range);
}

TEST(HistogramLearner, RejectsWeight) {
    EXPECT_THROW(HistogramLearner({CountPMF::uniform(2)}, 0.0), std::domain_error);
    EXPECT_THROW(HistogramLearner({CountPMF::uniform(2)}, 1.5), std::domain_error);
}

TEST(HistogramLearner, ConvergesToSource) {
    OutcomeAlphabet alphabet(30);
    auto truth = CountPMF::truncated_poisson(10, alphabet);
    HistogramLearner learner({CountPMF::uniform(alphabet.size())}, 5e-4);
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        learner.update(0, truth.sample(rng));
        ASSERT_NEAR(std::accumulate(learner.pmf(0).probabilities().begin(),
                                    learner.pmf(0).probabilities().end(), 0.0),
                    1.0, 1e-12);
    }
    EXPECT_LT(total_variation(learner.pmf(0), truth), 0.05);
}

// The run-averaged learned pmf approaches the source as updates accumulate.
TEST(HistogramLearner, MeanDistanceDecreases) {
    OutcomeAlphabet alphabet(20);
    auto truth = CountPMF::truncated_poisson(4, alphabet);
    for (double w : {0.01, 0.05, 0.1}) {
        std::vector<int> checkpoints = {static_cast<int>(0.5 / w), static_cast<int>(2 / w),
                                        static_cast<int>(5 / w)};
        std::vector<std::vector<double>> mean(checkpoints.size(),
                                              std::vector<double>(alphabet.size(), 0.0));
        for (int run = 0; run < 10; ++run) {
            HistogramLearner learner({CountPMF::uniform(alphabet.size())}, w);
            Rng rng = Rng::stream(5, static_cast<std::uint64_t>(run));
            int done = 0;
            for (std::size_t c = 0; c < checkpoints.size(); ++c) {
                for (; done < checkpoints[c]; ++done) {
                    learner.update(0, truth.sample(rng));
                }
                for (std::size_t n = 0; n < alphabet.size(); ++n) {
                    mean[c][n] += learner.pmf(0).probabilities()[n] / 10;
                }
            }
        }
        double previous = 1.0;
        for (const auto &m : mean) {
            double tv = total_variation(CountPMF(m, 1e-9), truth);
            EXPECT_LT(tv, previous) << "w=" << w;
            previous = tv;
        }
    }
}

TEST(Calibration, BrightDark) {
    OutcomeAlphabet alphabet(30);
    auto zero = calibrate_bright_dark(10, 0, alphabet);
    EXPECT_EQ(zero.dark, CountPMF::indicator(alphabet.size(), 0));
    EXPECT_THROW(calibrate_bright_dark(-1, 0.2, alphabet), std::domain_error);
    EXPECT_THROW(calibrate_bright_dark(10, -0.2, alphabet), std::domain_error);

    auto counts = calibrate_bright_dark(10, 0.2, alphabet);
    double total = 0;
    for (double p : counts.bright.probabilities()) {
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    // Threshold at two counts: n >= 2 reads bright.
    EXPECT_NEAR(counts.dark.tail_from(2), 0.017523096306421904, 1e-12);
    EXPECT_NEAR(1 - counts.bright.tail_from(2), 0.0004993992273873334, 1e-12);
}

TEST(PmfFile, RoundTrip) {
    OutcomeAlphabet alphabet(12);
    std::vector<CountPMF> pmfs = {CountPMF::truncated_poisson(3.5, alphabet),
                                  CountPMF::truncated_poisson(0.4, alphabet)};
    std::stringstream io;
    write_pmfs(io, pmfs);
    auto back = read_pmfs(io);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LT(total_variation(back[i], pmfs[i]), 1e-15);
    }
}

TEST(PmfFile, RejectsMalformed) {
    std::stringstream bad_sum("0.5 0.4\n");
    EXPECT_THROW(read_pmfs(bad_sum), std::runtime_error);
    std::stringstream bad_token("0.5 x\n");
    EXPECT_THROW(read_pmfs(bad_token), std::runtime_error);
    std::stringstream ragged("0.5 0.5\n0.2 0.3 0.5\n");
    EXPECT_THROW(read_pmfs(ragged), std::runtime_error);
    std::stringstream loose("0.5 0.5000001\n\n1 0\n");
    EXPECT_EQ(read_pmfs(loose).size(), 2u);
}

}  // namespace
}  // namespace qndr
