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

// Photon-count likelihood models P(n | i): truncated-Poisson calibration,
// sampling, exponential-filter histogram learning and plain-text import/export.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qndr/random.hpp"

namespace qndr {

/// Photon counts per detection window live in [0, max_count]; the top bin
/// collects every count at or above max_count.
struct OutcomeAlphabet {
    int max_count = 30;

    explicit OutcomeAlphabet(int max_count_ = 30) : max_count(max_count_) {
        if (max_count < 1) {
            throw std::domain_error("OutcomeAlphabet: max_count must be >= 1");
        }
    }

    std::size_t size() const { return static_cast<std::size_t>(max_count) + 1; }
    bool contains(int n) const { return n >= 0 && n <= max_count; }
    int clamp(long long n) const {
        return static_cast<int>(std::clamp<long long>(n, 0, max_count));
    }
};

inline constexpr double kPmfTolerance = 1e-12;

/// Probability mass over photon counts for one hypothesis.
class CountPMF {
   public:
    /// `probs` must be non-negative and sum to one within `tolerance`; the
    /// stored vector is renormalized exactly.
    explicit CountPMF(std::vector<double> probs, double tolerance = kPmfTolerance)
        : probs_(std::move(probs)) {
        if (probs_.size() < 2) {
            throw std::domain_error("CountPMF: need at least two count bins");
        }
        double total = 0;
        for (double p : probs_) {
            if (!(p >= 0) || !std::isfinite(p)) {
                throw std::domain_error("CountPMF: probabilities must be finite and non-negative");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > tolerance) {
            std::ostringstream msg;
            msg << "CountPMF: probabilities sum to " << std::setprecision(17) << total
                << ", not 1";
            throw std::domain_error(msg.str());
        }
        for (double &p : probs_) {
            p /= total;
        }
        build_cdf();
    }

    static CountPMF uniform(std::size_t bins) {
        return CountPMF(std::vector<double>(bins, 1.0 / static_cast<double>(bins)));
    }

    static CountPMF indicator(std::size_t bins, int at) {
        std::vector<double> p(bins, 0.0);
        p.at(static_cast<std::size_t>(at)) = 1.0;
        return CountPMF(std::move(p));
    }

    /// Poisson(mean) on the alphabet with the tail mass folded into the top bin.
    static CountPMF truncated_poisson(double mean, OutcomeAlphabet alphabet) {
        if (!(mean >= 0) || !std::isfinite(mean)) {
            throw std::domain_error("truncated_poisson: mean must be finite and >= 0");
        }
        std::vector<double> p(alphabet.size(), 0.0);
        if (mean == 0) {
            p[0] = 1.0;
            return CountPMF(std::move(p));
        }
        // Recurrence in log space so large means do not underflow exp(-mean).
        double log_term = -mean;
        for (int n = 0; n < alphabet.max_count; ++n) {
            p[n] = std::exp(log_term);
            log_term += std::log(mean) - std::log(static_cast<double>(n + 1));
        }
        // Tail summed directly rather than 1 - head, which cancels badly when
        // the tail is small.
        double tail = 0;
        for (int n = alphabet.max_count;; ++n) {
            double term = std::exp(log_term);
            tail += term;
            if (n > mean && term < 1e-300 + 1e-18 * tail) {
                break;
            }
            log_term += std::log(mean) - std::log(static_cast<double>(n + 1));
        }
        p[alphabet.max_count] = tail;
        return CountPMF(std::move(p), 1e-9);
    }

    /// weight_a * a + (1 - weight_a) * b.
    static CountPMF mixture(double weight_a, const CountPMF &a, const CountPMF &b) {
        if (a.size() != b.size()) {
            throw std::invalid_argument("CountPMF::mixture: alphabet mismatch");
        }
        if (!(weight_a >= 0 && weight_a <= 1)) {
            throw std::domain_error("CountPMF::mixture: weight outside [0, 1]");
        }
        std::vector<double> p(a.size());
        for (std::size_t n = 0; n < p.size(); ++n) {
            p[n] = weight_a * a.probs_[n] + (1 - weight_a) * b.probs_[n];
        }
        return CountPMF(std::move(p), 1e-9);
    }

    std::size_t size() const { return probs_.size(); }
    int max_count() const { return static_cast<int>(probs_.size()) - 1; }
    const std::vector<double> &probabilities() const { return probs_; }

    /// P(n). Throws std::out_of_range outside the alphabet.
    double operator()(int n) const {
        if (n < 0 || n > max_count()) {
            throw std::out_of_range("CountPMF: count " + std::to_string(n) +
                                    " outside [0, " + std::to_string(max_count()) + "]");
        }
        return probs_[static_cast<std::size_t>(n)];
    }

    double eval(int n) const { return (*this)(n); }

    /// Inverse-CDF draw; consumes exactly one uniform from `rng`.
    int sample(Rng &rng) const {
        double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<int>(it - cdf_.begin());
    }

    /// Mass at counts >= threshold.
    double tail_from(int threshold) const {
        double s = 0;
        for (int n = std::max(threshold, 0); n <= max_count(); ++n) {
            s += probs_[static_cast<std::size_t>(n)];
        }
        return s;
    }

    double mean() const {
        double m = 0;
        for (std::size_t n = 0; n < probs_.size(); ++n) {
            m += static_cast<double>(n) * probs_[n];
        }
        return m;
    }

    friend bool operator==(const CountPMF &a, const CountPMF &b) { return a.probs_ == b.probs_; }

   private:
    friend class HistogramLearner;

    void build_cdf() {
        cdf_.resize(probs_.size());
        double acc = 0;
        std::size_t last_positive = 0;
        for (std::size_t n = 0; n < probs_.size(); ++n) {
            acc += probs_[n];
            cdf_[n] = acc;
            if (probs_[n] > 0) {
                last_positive = n;
            }
        }
        // Zero-mass trailing bins must never be drawn.
        for (std::size_t n = last_positive; n < cdf_.size(); ++n) {
            cdf_[n] = 1.0;
        }
    }

    std::vector<double> probs_;
    std::vector<double> cdf_;
};

/// Total-variation distance between two pmfs on the same alphabet.
inline double total_variation(const CountPMF &a, const CountPMF &b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("total_variation: alphabet mismatch");
    }
    double s = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        s += std::abs(a.probabilities()[n] - b.probabilities()[n]);
    }
    return 0.5 * s;
}

/// Exponentially filtered per-hypothesis count histograms.
class HistogramLearner {
   public:
    HistogramLearner(std::vector<CountPMF> initial, double update_weight)
        : pmfs_(std::move(initial)), weight_(update_weight) {
        if (!(weight_ > 0 && weight_ <= 1)) {
            throw std::domain_error("HistogramLearner: update weight must lie in (0, 1]");
        }
        if (pmfs_.empty()) {
            throw std::invalid_argument("HistogramLearner: no hypotheses");
        }
        for (const auto &p : pmfs_) {
            if (p.size() != pmfs_.front().size()) {
                throw std::invalid_argument("HistogramLearner: alphabet mismatch");
            }
        }
    }

    /// pmf[h] <- (1 - w) pmf[h] + w * indicator(observed). Counts above the
    /// alphabet land in the overflow bin.
    void update(std::size_t hypothesis, int observed) {
        CountPMF &pmf = pmfs_.at(hypothesis);
        if (observed < 0) {
            throw std::out_of_range("HistogramLearner: negative count");
        }
        std::size_t bin = std::min<std::size_t>(static_cast<std::size_t>(observed),
                                                pmf.probs_.size() - 1);
        double total = 0;
        for (std::size_t n = 0; n < pmf.probs_.size(); ++n) {
            pmf.probs_[n] = (1 - weight_) * pmf.probs_[n] + (n == bin ? weight_ : 0.0);
            total += pmf.probs_[n];
        }
        for (double &p : pmf.probs_) {
            p /= total;
        }
        pmf.build_cdf();
    }

    const CountPMF &pmf(std::size_t hypothesis) const { return pmfs_.at(hypothesis); }
    const std::vector<CountPMF> &pmfs() const { return pmfs_; }
    double update_weight() const { return weight_; }

   private:
    std::vector<CountPMF> pmfs_;
    double weight_;
};

/// Ancilla count distributions: bright is the fluorescing Be state, dark the
/// shelved one.
struct AncillaCounts {
    CountPMF bright;
    CountPMF dark;
};

inline AncillaCounts calibrate_bright_dark(double bright_mean, double dark_mean,
                                           OutcomeAlphabet alphabet) {
    if (bright_mean < 0 || dark_mean < 0) {
        throw std::domain_error("calibrate_bright_dark: means must be >= 0");
    }
    return AncillaCounts{CountPMF::truncated_poisson(bright_mean, alphabet),
                         CountPMF::truncated_poisson(dark_mean, alphabet)};
}

/// One line per pmf, whitespace-separated probabilities.
inline void write_pmfs(std::ostream &out, const std::vector<CountPMF> &pmfs) {
    out << std::setprecision(17);
    for (const auto &pmf : pmfs) {
        const auto &p = pmf.probabilities();
        for (std::size_t n = 0; n < p.size(); ++n) {
            out << (n ? " " : "") << p[n];
        }
        out << '\n';
    }
}

/// Inverse of write_pmfs. Blank lines are skipped; every line must sum to 1
/// within 1e-6 and all lines must share one alphabet.
inline std::vector<CountPMF> read_pmfs(std::istream &in) {
    std::vector<CountPMF> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::vector<double> probs;
        std::string tok;
        while (fields >> tok) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != tok.size()) {
                throw std::runtime_error("read_pmfs: line " + std::to_string(line_no) +
                                         ": not a number: '" + tok + "'");
            }
            probs.push_back(v);
        }
        if (probs.empty()) {
            continue;
        }
        try {
            out.emplace_back(std::move(probs), 1e-6);
        } catch (const std::domain_error &e) {
            throw std::runtime_error("read_pmfs: line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
        if (out.back().size() != out.front().size()) {
            throw std::runtime_error("read_pmfs: line " + std::to_string(line_no) +
                                     ": alphabet size differs from first line");
        }
    }
    return out;
}

}  // namespace qndr
