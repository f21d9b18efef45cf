#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netresil/dataset.hpp"
#include "netresil/dynamics.hpp"
#include "netresil/metrics.hpp"
#include "netresil/rng.hpp"
#include "netresil/trainer.hpp"
#include "netresil/window.hpp"

namespace netresil {

inline constexpr double kEdgeThreshold = 0.5;

// ---------------------------------------------------------------------------
// Model forward passes against a dataset

struct ModelOutputs {
    Matrix predicted_states;     // N x M, prediction for the final snapshot
    Matrix predicted_adjacency;  // N x N probabilities
};

inline ModelOutputs run_model(Checkpoint& ckpt, const TemporalGraphDataset& ds) {
    TrainConfig cfg = ckpt.train_config();
    std::size_t want_n = ckpt.config.at("n_nodes").get<std::size_t>();
    std::size_t want_m = ckpt.config.at("feature_dim").get<std::size_t>();
    if (ds.n_nodes != want_n || ds.feature_dim != want_m)
        throw std::invalid_argument("checkpoint expects " + std::to_string(want_n) + "x" +
                                    std::to_string(want_m) + " dataset, got " +
                                    std::to_string(ds.n_nodes) + "x" +
                                    std::to_string(ds.feature_dim));
    JointModel model = bind_model(ckpt);
    Window w = make_tail_window(ds, cfg.window);
    ModelOutputs out;
    out.predicted_states = matrix_from_tensor(predict_next_state(w, model.state, cfg.state_encoder));
    out.predicted_adjacency =
        matrix_from_tensor(predict_topology(w, model.topo, cfg.topo_encoder).adjacency);
    return out;
}

// ---------------------------------------------------------------------------
// Topology evaluation on held-out edges

struct TopologyEvaluation {
    ClassificationCounts counts;
    ClassificationMetrics metrics;
    ClassificationCounts baseline_counts;  // degree-product score
    ClassificationMetrics baseline_metrics;
};

// Degree-product (preferential attachment) link score from the last observed
// snapshot: neighbor counts, normalized by the maximum product; never sees
// the target graph.
inline Matrix degree_product_scores(const Graph& observed) {
    std::size_t n = observed.size();
    std::vector<double> deg(n);
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        deg[i] = static_cast<double>(observed.neighbors(i).size());
        dmax = std::max(dmax, deg[i]);
    }
    Matrix s(n, n);
    double denom = dmax * dmax;
    if (denom > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s.at(i, j) = deg[i] * deg[j] / denom;
    return s;
}

inline ClassificationCounts count_predictions(const Matrix& prob,
                                              const std::vector<EdgePair>& positives,
                                              const std::vector<EdgePair>& negatives,
                                              double threshold) {
    ClassificationCounts c;
    for (const auto& [i, j] : positives)
        (prob.at(i, j) >= threshold ? c.tp : c.fn) += 1;
    for (const auto& [i, j] : negatives)
        (prob.at(i, j) >= threshold ? c.fp : c.tn) += 1;
    return c;
}

// Held-out positives against an equal-count uniform non-edge sample.
inline TopologyEvaluation evaluate_topology(const Matrix& prob, const Graph& target,
                                            const std::vector<EdgePair>& heldout,
                                            const Graph& last_observed, std::uint64_t seed,
                                            double threshold = kEdgeThreshold) {
    if (heldout.empty()) throw std::invalid_argument("evaluate_topology: empty held-out set");
    Rng rng = derive_rng(seed, "eval.negatives");
    std::vector<EdgePair> negatives = sample_negative_edges(target, heldout.size(), rng);
    TopologyEvaluation ev;
    ev.counts = count_predictions(prob, heldout, negatives, threshold);
    ev.metrics = classification_metrics(ev.counts);
    Matrix base = degree_product_scores(last_observed);
    ev.baseline_counts = count_predictions(base, heldout, negatives, threshold);
    ev.baseline_metrics = classification_metrics(ev.baseline_counts);
    return ev;
}

// ---------------------------------------------------------------------------
// State evaluation

struct StateEvaluation {
    RegressionMetrics model;
    RegressionMetrics persistence;  // predict the last observed states
};

inline StateEvaluation evaluate_states(const Matrix& predicted, const TemporalGraphDataset& ds) {
    if (ds.horizon() < 2) throw std::invalid_argument("evaluate_states: need >= 2 snapshots");
    const Matrix& truth = ds.snapshots.back().states;
    const Matrix& prev = ds.snapshots[ds.horizon() - 2].states;
    StateEvaluation ev;
    ev.model = regression_metrics(predicted, truth);
    ev.persistence = regression_metrics(prev, truth);
    return ev;
}

// ---------------------------------------------------------------------------
// Attack experiments

struct AttackOutcome {
    double fraction = 0.0;
    MeanCurve curve;
    ResilienceVerdict verdict;
    double recovery_ratio = 0.0;
    double time_to_90 = -1.0;  // first time the mean is back to 90% of steady; -1 if never
};

struct AttackExperiment {
    std::string subject;  // "simulator" or "model"
    double unperturbed_steady_mean = 0.0;
    double theta = 0.0;
    std::vector<AttackOutcome> outcomes;
};

namespace detail {

inline double time_to_fraction(const MeanCurve& c, double level) {
    for (std::size_t k = 0; k < c.times.size(); ++k)
        if (c.mean_state[k] >= level) return c.times[k];
    return -1.0;
}

}  // namespace detail

// Ground-truth subject: attack the final snapshot of the dataset and
// integrate its dynamics forward.
inline AttackExperiment attack_experiment(const TemporalGraphDataset& ds,
                                          const std::vector<double>& fractions,
                                          std::uint64_t seed, double dt = kDefaultDt,
                                          double t_end = kDefaultTEnd) {
    const Snapshot& last = ds.snapshots.back();
    DynamicsSpec spec = DynamicsSpec::from_descriptor(ds.dynamics);

    AttackExperiment ex;
    ex.subject = "simulator";
    Trajectory baseline = integrate(last.graph, spec, last.states, dt, t_end);
    ex.unperturbed_steady_mean = baseline.final_states().mean();
    ex.theta = kResilienceThetaFraction * ex.unperturbed_steady_mean;

    for (std::size_t idx = 0; idx < fractions.size(); ++idx) {
        double f = fractions[idx];
        AttackOutcome oc;
        oc.fraction = f;
        AttackResult a = attack(last.graph, last.states, f, splitmix64(seed ^ (idx + 1)));
        Trajectory traj = integrate(a.graph, spec, a.states, dt, t_end);
        oc.curve = detail::trajectory_curve(traj, f);
        oc.verdict = classify_resilience(traj, ex.theta);
        oc.recovery_ratio = traj.final_states().mean() / ex.unperturbed_steady_mean;
        oc.time_to_90 = detail::time_to_fraction(oc.curve, 0.9 * ex.unperturbed_steady_mean);
        ex.outcomes.push_back(std::move(oc));
    }
    return ex;
}

// Learned subject: attack the observation window, then roll the state
// predictor forward autoregressively on the damaged topology.
inline AttackExperiment attack_experiment(Checkpoint& ckpt, const TemporalGraphDataset& ds,
                                          const std::vector<double>& fractions,
                                          std::uint64_t seed, double t_end = kDefaultTEnd) {
    TrainConfig cfg = ckpt.train_config();
    JointModel model = bind_model(ckpt);

    std::vector<double> times = ds.timestamps();
    std::vector<double> gaps;
    for (std::size_t k = 1; k < times.size(); ++k) gaps.push_back(times[k] - times[k - 1]);
    std::sort(gaps.begin(), gaps.end());
    double dt = gaps.empty() ? 1.0 : gaps[gaps.size() / 2];
    auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));

    auto rollout = [&](const TemporalGraphDataset& base) {
        TemporalGraphDataset work = base;
        std::vector<double> mean_curve, std_curve, curve_times;
        Trajectory traj;
        traj.dynamics_id = "learned";
        traj.integrator = "autoregressive";
        traj.dt = dt;
        const Matrix& start = work.snapshots.back().states;
        traj.times.push_back(0.0);
        traj.states.push_back(start);
        for (std::size_t s = 0; s < steps; ++s) {
            Window w = make_tail_window(work, cfg.window);
            Matrix next =
                matrix_from_tensor(predict_next_state(w, model.state, cfg.state_encoder));
            Snapshot snap;
            snap.time = work.snapshots.back().time + dt;
            snap.graph = work.snapshots.back().graph;
            snap.states = next;
            work.snapshots.push_back(std::move(snap));
            work.snapshots.erase(work.snapshots.begin());  // keep the rollout window short
            traj.times.push_back(static_cast<double>(s + 1) * dt);
            traj.states.push_back(next);
        }
        return traj;
    };

    AttackExperiment ex;
    ex.subject = "model";
    Trajectory baseline = rollout(ds);
    ex.unperturbed_steady_mean = baseline.final_states().mean();
    ex.theta = kResilienceThetaFraction * ex.unperturbed_steady_mean;

    for (std::size_t idx = 0; idx < fractions.size(); ++idx) {
        double f = fractions[idx];
        AttackOutcome oc;
        oc.fraction = f;
        TemporalGraphDataset damaged = attack(ds, f, splitmix64(seed ^ (idx + 1)));
        Trajectory traj = rollout(damaged);
        oc.curve = detail::trajectory_curve(traj, f);
        oc.verdict = classify_resilience(traj, ex.theta);
        oc.recovery_ratio = traj.final_states().mean() / ex.unperturbed_steady_mean;
        oc.time_to_90 = detail::time_to_fraction(oc.curve, 0.9 * ex.unperturbed_steady_mean);
        ex.outcomes.push_back(std::move(oc));
    }
    return ex;
}

inline nlohmann::ordered_json attack_experiment_json(const AttackExperiment& ex) {
    nlohmann::ordered_json j;
    j["subject"] = ex.subject;
    j["unperturbed_steady_mean"] = ex.unperturbed_steady_mean;
    j["theta"] = ex.theta;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const AttackOutcome& oc : ex.outcomes) {
        nlohmann::ordered_json o;
        o["fraction"] = oc.fraction;
        o["resilient"] = oc.verdict.resilient;
        o["converged"] = oc.verdict.converged;
        o["steady_mean"] = oc.verdict.steady_mean;
        o["derivative_norm_at_end"] = oc.verdict.derivative_norm_at_end;
        o["recovery_ratio"] = oc.recovery_ratio;
        o["time_to_90"] = oc.time_to_90;
        arr.push_back(std::move(o));
    }
    j["outcomes"] = std::move(arr);
    return j;
}

// ---------------------------------------------------------------------------
// Multi-seed reporting

struct MetricsReport {
    std::vector<std::uint64_t> seeds;
    std::string config_digest;
    // metric name -> per-seed values, in seed order
    std::map<std::string, std::vector<double>> values;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["seeds"] = seeds;
        j["config_digest"] = config_digest;
        nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
        static const char* order[] = {"acc",  "precision", "recall",    "f1",
                                      "mae",  "rmse",      "rmse_paper"};
        auto emit = [&](const std::string& name, const std::vector<double>& vals) {
            nlohmann::ordered_json m;
            m["per_seed"] = vals;
            MeanStd ms = mean_std(vals);
            m["mean"] = ms.mean;
            if (ms.degenerate) {
                m["degenerate_std"] = true;  // fewer than two seeds; std omitted
            } else {
                m["std"] = ms.std;
            }
            metrics[name] = std::move(m);
        };
        for (const char* name : order) {
            auto it = values.find(name);
            if (it != values.end()) emit(name, it->second);
        }
        for (const auto& [name, vals] : values) {
            bool known = false;
            for (const char* o : order) known = known || (name == o);
            if (!known) emit(name, vals);
        }
        j["metrics"] = std::move(metrics);
        return j;
    }
};

}  // namespace netresil
