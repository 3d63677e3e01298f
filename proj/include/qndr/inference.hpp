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

// Sequential Bayesian posterior over a finite hypothesis set, accumulated in
// log space, together with the stopping statistic and the detection record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qndr/count_model.hpp"

namespace qndr {

/// Likelihoods below this are raised to it during inference so a single
/// unseen count cannot contribute infinite evidence.
inline constexpr double kLikelihoodFloor = 1e-9;

class DegenerateEvidenceError : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

class HypothesisSet {
   public:
    explicit HypothesisSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) {
            throw std::invalid_argument("HypothesisSet: need at least two hypotheses");
        }
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            for (std::size_t j = i + 1; j < labels_.size(); ++j) {
                if (labels_[i] == labels_[j]) {
                    throw std::invalid_argument("HypothesisSet: duplicate label " + labels_[i]);
                }
            }
        }
    }

    /// {down, up}: the qubit of one primary ion.
    static HypothesisSet single_ion() { return HypothesisSet({"down", "up"}); }
    /// {g2, g1, g0}: number of primary ions in the ground state.
    static HypothesisSet two_ion() { return HypothesisSet({"g2", "g1", "g0"}); }

    std::size_t size() const { return labels_.size(); }
    const std::string &label(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string> &labels() const { return labels_; }

    std::size_t index_of(const std::string &label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) {
            throw std::out_of_range("HypothesisSet: unknown label " + label);
        }
        return static_cast<std::size_t>(it - labels_.begin());
    }

   private:
    std::vector<std::string> labels_;
};

/// Floored log P(n | i) for every count n and hypothesis i of one pulse.
/// Counts that every hypothesis assigns zero probability are kept as
/// impossible rather than floored.
class LogLikelihoodTable {
   public:
    LogLikelihoodTable() = default;

    explicit LogLikelihoodTable(std::span<const CountPMF> per_hypothesis)
        : hypotheses_(per_hypothesis.size()) {
        if (per_hypothesis.empty()) {
            throw std::invalid_argument("LogLikelihoodTable: no hypotheses");
        }
        bins_ = per_hypothesis.front().size();
        table_.resize(bins_ * hypotheses_);
        possible_.assign(bins_, false);
        for (std::size_t h = 0; h < hypotheses_; ++h) {
            const auto &pmf = per_hypothesis[h];
            if (pmf.size() != bins_) {
                throw std::invalid_argument("LogLikelihoodTable: alphabet mismatch");
            }
            for (std::size_t n = 0; n < bins_; ++n) {
                double p = pmf.probabilities()[n];
                if (p > 0) {
                    possible_[n] = true;
                }
                table_[n * hypotheses_ + h] = std::log(std::max(p, kLikelihoodFloor));
            }
        }
    }

    std::size_t hypotheses() const { return hypotheses_; }
    std::size_t bins() const { return bins_; }

    /// log P(n | i) for all i. Throws on out-of-range or impossible counts.
    std::span<const double> row(int n) const {
        if (n < 0 || static_cast<std::size_t>(n) >= bins_) {
            throw std::out_of_range("LogLikelihoodTable: count " + std::to_string(n) +
                                    " outside alphabet");
        }
        if (!possible_[static_cast<std::size_t>(n)]) {
            throw DegenerateEvidenceError("count " + std::to_string(n) +
                                          " has zero likelihood under every hypothesis");
        }
        return {table_.data() + static_cast<std::size_t>(n) * hypotheses_, hypotheses_};
    }

   private:
    std::size_t hypotheses_ = 0;
    std::size_t bins_ = 0;
    std::vector<double> table_;
    std::vector<bool> possible_;
};

struct Verdict {
    std::size_t winner = 0;
    double predicted_error = 0;
};

/// Posterior P(i | {n_j}) under equal priors.
///
/// Holds the running log-likelihoods sum_j log P(n_j | i); the probabilities
/// are always their max-subtracted softmax.
class Posterior {
   public:
    /// Uniform prior, zero log-likelihoods.
    static Posterior reset_prior(std::size_t hypotheses) {
        if (hypotheses < 2) {
            throw std::invalid_argument("Posterior: need at least two hypotheses");
        }
        Posterior p;
        p.log_likelihoods_.assign(hypotheses, 0.0);
        p.probs_.assign(hypotheses, 1.0 / static_cast<double>(hypotheses));
        return p;
    }
    static Posterior reset_prior(const HypothesisSet &h) { return reset_prior(h.size()); }

    /// Build directly from accumulated log-likelihoods.
    static Posterior from_log_likelihoods(std::vector<double> log_likelihoods) {
        Posterior p = reset_prior(log_likelihoods.size());
        p.log_likelihoods_ = std::move(log_likelihoods);
        p.renormalize();
        return p;
    }

    /// Bayes update with one observed count under the executed pulse's
    /// per-hypothesis likelihoods.
    void update(int n, std::span<const CountPMF> likelihoods) {
        if (likelihoods.size() != size()) {
            throw std::invalid_argument("Posterior::update: hypothesis count mismatch");
        }
        bool any = false;
        for (const auto &pmf : likelihoods) {
            any = any || pmf(n) > 0;
        }
        if (!any) {
            throw DegenerateEvidenceError("count " + std::to_string(n) +
                                          " has zero likelihood under every hypothesis");
        }
        for (std::size_t i = 0; i < size(); ++i) {
            log_likelihoods_[i] += std::log(std::max(likelihoods[i](n), kLikelihoodFloor));
        }
        renormalize();
    }

    /// Same as update() with a precomputed table row.
    void update(int n, const LogLikelihoodTable &table) {
        auto row = table.row(n);
        if (row.size() != size()) {
            throw std::invalid_argument("Posterior::update: hypothesis count mismatch");
        }
        for (std::size_t i = 0; i < size(); ++i) {
            log_likelihoods_[i] += row[i];
        }
        renormalize();
    }

    std::size_t size() const { return probs_.size(); }
    const std::vector<double> &probs() const { return probs_; }
    const std::vector<double> &log_likelihoods() const { return log_likelihoods_; }

    /// Indices of the largest and second-largest log-likelihood; ties go to
    /// the lower index.
    std::pair<std::size_t, std::size_t> top_two() const {
        std::size_t first = 0;
        for (std::size_t i = 1; i < size(); ++i) {
            if (log_likelihoods_[i] > log_likelihoods_[first]) {
                first = i;
            }
        }
        std::size_t second = first == 0 ? 1 : 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (i != first && log_likelihoods_[i] > log_likelihoods_[second]) {
                second = i;
            }
        }
        return {first, second};
    }

    /// log of likelihood_ratio(); avoids overflow for long records.
    double log_likelihood_gap() const {
        auto [a, b] = top_two();
        return log_likelihoods_[a] - log_likelihoods_[b];
    }

   private:
    Posterior() = default;

    void renormalize() {
        double top = *std::max_element(log_likelihoods_.begin(), log_likelihoods_.end());
        double total = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            probs_[i] = std::exp(log_likelihoods_[i] - top);
            total += probs_[i];
        }
        for (double &p : probs_) {
            p /= total;
        }
    }

    std::vector<double> log_likelihoods_;
    std::vector<double> probs_;
};

inline Posterior posterior_update(Posterior post, int n, std::span<const CountPMF> likelihoods) {
    post.update(n, likelihoods);
    return post;
}

/// exp(L_max - L_second) over the running log-likelihoods. For two
/// hypotheses this is the larger of the two sequence-likelihood ratios.
inline double likelihood_ratio(const Posterior &post) {
    return std::exp(post.log_likelihood_gap());
}

/// Most likely hypothesis and 1 - max posterior. Ties go to the lowest index.
inline Verdict winner_and_error(const Posterior &post) {
    const auto &p = post.probs();
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] > p[best]) {
            best = i;
        }
    }
    return Verdict{best, 1.0 - p[best]};
}

/// One complete detection: the count sequence, the pulse executed on each
/// cycle and the aggregate verdict.
struct DetectionRecord {
    std::vector<int> counts;
    std::vector<double> pulses;  // pulse duration per cycle, seconds
    std::size_t winner = 0;
    double predicted_error = 1;
    int cycles_used = 0;
    double elapsed_time = 0;
    bool resolved = true;
    /// Simulated true hypothesis at preparation, when known.
    std::optional<std::size_t> truth;

    bool correct() const { return truth.has_value() && *truth == winner; }

    nlohmann::json to_json(const HypothesisSet &hypotheses) const {
        nlohmann::json j;
        j["counts"] = counts;
        j["pulses"] = pulses;
        j["winner"] = hypotheses.label(winner);
        j["predicted_error"] = predicted_error;
        j["cycles"] = cycles_used;
        j["time_s"] = elapsed_time;
        j["resolved"] = resolved;
        if (truth) {
            j["truth"] = hypotheses.label(*truth);
        }
        return j;
    }

    /// One JSON object, no trailing newline.
    std::string to_json_line(const HypothesisSet &hypotheses) const {
        return to_json(hypotheses).dump();
    }

    static DetectionRecord from_json(const nlohmann::json &j, const HypothesisSet &hypotheses) {
        DetectionRecord r;
        r.counts = j.at("counts").get<std::vector<int>>();
        r.pulses = j.at("pulses").get<std::vector<double>>();
        r.winner = hypotheses.index_of(j.at("winner").get<std::string>());
        r.predicted_error = j.at("predicted_error").get<double>();
        r.cycles_used = j.at("cycles").get<int>();
        r.elapsed_time = j.at("time_s").get<double>();
        r.resolved = j.value("resolved", true);
        if (j.contains("truth")) {
            r.truth = hypotheses.index_of(j.at("truth").get<std::string>());
        }
        return r;
    }
};

/// Feeds every cycle count of a concluded detection to the histogram of its
/// winner. Records with per-cycle pulse changes belong to one histogram set
/// per pulse; callers split them first.
inline void update_histograms(HistogramLearner &learner, const DetectionRecord &record) {
    for (int n : record.counts) {
        learner.update(record.winner, n);
    }
}

}  // namespace qndr
