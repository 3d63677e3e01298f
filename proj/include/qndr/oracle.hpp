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

// Exact error probability and expected cycle count of the adaptive rule on a
// small outcome alphabet, by exhaustive enumeration.
//
// The stopping decision and the verdict depend on a count sequence only
// through its histogram, so sequences sharing (histogram, current true
// state, prepared hypothesis) are enumerated once with their summed
// probability. The result is exact; nothing is sampled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qndr/count_model.hpp"
#include "qndr/dynamics.hpp"
#include "qndr/inference.hpp"
#include "qndr/strategies.hpp"

namespace qndr {

class ResourceError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kOracleMaxAlphabet = 4;
inline constexpr std::size_t kOracleMaxHypotheses = 4;
inline constexpr int kOracleMaxDepth = 256;
/// Enumeration is only a valid reference when less mass than this is left
/// undecided at the depth cap.
inline constexpr double kOracleResidualLimit = 1e-6;

struct OracleResult {
    double error = 0;                 // P(verdict != prepared hypothesis), decided paths
    double mean_cycles = 0;           // E[cycles], decided paths
    double mean_predicted_error = 0;  // E[1 - max posterior], decided paths
    double residual_mass = 0;         // mass still undecided at depth_cap
    std::size_t peak_classes = 0;

    bool valid() const { return residual_mass < kOracleResidualLimit; }
};

/// Generative outcome pmfs per hypothesis (hypothesis index = number of up
/// ions) and the pmfs the posterior uses. Usually identical.
struct OracleModel {
    std::vector<CountPMF> generative;
    std::vector<CountPMF> inference;
};

namespace detail {

/// Per-cycle transition between hypotheses when each up ion decays
/// independently with probability p: h up ions -> h - m with Binomial(h, p).
inline std::vector<std::vector<double>> decay_transitions(std::size_t hypotheses, double p) {
    std::vector<std::vector<double>> t(hypotheses, std::vector<double>(hypotheses, 0.0));
    for (std::size_t h = 0; h < hypotheses; ++h) {
        double binom = 1;
        for (std::size_t m = 0; m <= h; ++m) {
            if (m > 0) {
                binom = binom * static_cast<double>(h - m + 1) / static_cast<double>(m);
            }
            t[h][h - m] = binom * std::pow(p, static_cast<double>(m)) *
                          std::pow(1 - p, static_cast<double>(h - m));
        }
    }
    return t;
}

}  // namespace detail

inline OracleResult exhaustive_error_oracle(const StoppingRule &rule, const OracleModel &model,
                                            const PreparedPopulation &prepared,
                                            double decay_per_cycle, int depth_cap) {
    rule.validate();
    const std::size_t hyps = model.generative.size();
    if (hyps < 2 || model.inference.size() != hyps || prepared.size() != hyps) {
        throw std::invalid_argument("oracle: hypothesis counts disagree");
    }
    if (hyps > kOracleMaxHypotheses) {
        throw ResourceError("oracle: at most " + std::to_string(kOracleMaxHypotheses) +
                            " hypotheses");
    }
    const std::size_t alphabet = model.generative.front().size();
    if (alphabet > kOracleMaxAlphabet) {
        throw ResourceError("oracle: alphabet of " + std::to_string(alphabet) +
                            " outcomes exceeds cap of " + std::to_string(kOracleMaxAlphabet));
    }
    if (depth_cap < 1 || depth_cap > kOracleMaxDepth) {
        throw ResourceError("oracle: depth cap must lie in [1, " +
                            std::to_string(kOracleMaxDepth) + "]");
    }
    if (!(decay_per_cycle >= 0 && decay_per_cycle <= 1)) {
        throw std::domain_error("oracle: decay probability outside [0, 1]");
    }
    for (std::size_t h = 0; h < hyps; ++h) {
        if (model.generative[h].size() != alphabet || model.inference[h].size() != alphabet) {
            throw std::invalid_argument("oracle: alphabet mismatch");
        }
    }

    // log P(c | i) with the same floor the posterior applies.
    std::vector<std::vector<double>> log_lik(alphabet, std::vector<double>(hyps));
    for (std::size_t c = 0; c < alphabet; ++c) {
        for (std::size_t i = 0; i < hyps; ++i) {
            log_lik[c][i] =
                std::log(std::max(model.inference[i].probabilities()[c], kLikelihoodFloor));
        }
    }
    const auto transitions = detail::decay_transitions(hyps, decay_per_cycle);
    const double log_threshold = rule.log_threshold();

    // Class key: 9 bits per histogram bin, then current state, then prepared
    // hypothesis (3 bits each).
    constexpr int kBinBits = 9;
    auto pack = [&](const std::vector<int> &hist, std::size_t state, std::size_t origin) {
        std::uint64_t key = 0;
        for (std::size_t c = 0; c < alphabet; ++c) {
            key |= static_cast<std::uint64_t>(hist[c]) << (kBinBits * c);
        }
        key |= static_cast<std::uint64_t>(state) << (kBinBits * kOracleMaxAlphabet);
        key |= static_cast<std::uint64_t>(origin) << (kBinBits * kOracleMaxAlphabet + 3);
        return key;
    };
    auto unpack = [&](std::uint64_t key, std::vector<int> &hist, std::size_t &state,
                      std::size_t &origin) {
        for (std::size_t c = 0; c < alphabet; ++c) {
            hist[c] = static_cast<int>((key >> (kBinBits * c)) & ((1u << kBinBits) - 1));
        }
        state = static_cast<std::size_t>((key >> (kBinBits * kOracleMaxAlphabet)) & 7u);
        origin = static_cast<std::size_t>((key >> (kBinBits * kOracleMaxAlphabet + 3)) & 7u);
    };

    std::map<std::uint64_t, double> alive;
    std::vector<int> hist(alphabet, 0);
    for (std::size_t h = 0; h < hyps; ++h) {
        if (prepared.probs()[h] > 0) {
            alive[pack(hist, h, h)] += prepared.probs()[h];
        }
    }

    OracleResult result;
    const int last = std::min(depth_cap, rule.max_cycles);
    std::vector<double> ll(hyps);
    for (int depth = 1; depth <= last && !alive.empty(); ++depth) {
        std::map<std::uint64_t, double> next;
        std::size_t state = 0;
        std::size_t origin = 0;
        for (const auto &[key, mass] : alive) {
            unpack(key, hist, state, origin);
            for (std::size_t s2 = 0; s2 < hyps; ++s2) {
                double p_move = transitions[state][s2];
                if (p_move == 0) {
                    continue;
                }
                for (std::size_t c = 0; c < alphabet; ++c) {
                    double p_obs = model.generative[s2].probabilities()[c];
                    if (p_obs == 0) {
                        continue;
                    }
                    double w = mass * p_move * p_obs;
                    ++hist[c];
                    for (std::size_t i = 0; i < hyps; ++i) {
                        double s = 0;
                        for (std::size_t b = 0; b < alphabet; ++b) {
                            s += hist[b] * log_lik[b][i];
                        }
                        ll[i] = s;
                    }
                    std::size_t best = 0;
                    for (std::size_t i = 1; i < hyps; ++i) {
                        if (ll[i] > ll[best]) {
                            best = i;
                        }
                    }
                    std::size_t second = best == 0 ? 1 : 0;
                    for (std::size_t i = 0; i < hyps; ++i) {
                        if (i != best && ll[i] > ll[second]) {
                            second = i;
                        }
                    }
                    if (ll[best] - ll[second] >= log_threshold || depth == rule.max_cycles) {
                        double z = 0;
                        for (std::size_t i = 0; i < hyps; ++i) {
                            z += std::exp(ll[i] - ll[best]);
                        }
                        result.error += best != origin ? w : 0.0;
                        result.mean_cycles += w * depth;
                        result.mean_predicted_error += w * (1 - 1 / z);
                    } else {
                        next[pack(hist, s2, origin)] += w;
                    }
                    --hist[c];
                }
            }
        }
        alive.swap(next);
        result.peak_classes = std::max(result.peak_classes, alive.size());
    }
    for (const auto &[key, mass] : alive) {
        result.residual_mass += mass;
    }
    return result;
}

/// Oracle with the generative pmfs doubling as inference likelihoods.
inline OracleResult exhaustive_error_oracle(const StoppingRule &rule,
                                            const std::vector<CountPMF> &outcome_model,
                                            const PreparedPopulation &prepared,
                                            double decay_per_cycle, int depth_cap) {
    return exhaustive_error_oracle(rule, OracleModel{outcome_model, outcome_model}, prepared,
                                   decay_per_cycle, depth_cap);
}

/// Binary outcome model (0 = dark, 1 = bright) of one ion with symmetric
/// or asymmetric transfer errors: {down, up}.
inline std::vector<CountPMF> binary_outcome_model(double eps_down, double eps_up) {
    return {CountPMF({eps_down, 1 - eps_down}), CountPMF({1 - eps_up, eps_up})};
}

}  // namespace qndr
