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

#include <cstdint>
#include <random>

namespace qndr {

/// Seeded generator used everywhere a simulation draws randomness.
///
/// Wraps mt19937_64 and converts to doubles by bit slicing rather than through
/// std::uniform_real_distribution, whose algorithm is implementation-defined.
/// Given a seed, the stream is identical on every conforming platform.
class Rng {
   public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream `index` derived from `root`. Used to give every
    /// chunk of Monte-Carlo trials its own generator so that results do not
    /// depend on how chunks are scheduled across threads.
    static Rng stream(std::uint64_t root, std::uint64_t index) {
        std::seed_seq seq{
            static_cast<std::uint32_t>(root),
            static_cast<std::uint32_t>(root >> 32),
            static_cast<std::uint32_t>(index),
            static_cast<std::uint32_t>(index >> 32),
        };
        return Rng(seq);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n), for small n.
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

   private:
    explicit Rng(std::seed_seq &seq) : engine_(seq) {}

    std::mt19937_64 engine_;
};

}  // namespace qndr
