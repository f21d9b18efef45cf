#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "netresil/dataset.hpp"
#include "netresil/errors.hpp"
#include "netresil/graph.hpp"
#include "netresil/matrix.hpp"
#include "netresil/rng.hpp"

namespace netresil {

// Per-node dynamics du_i/dt = F(u_i) + sum_j A_ij G(u_i, u_j), applied
// independently per feature channel.
struct DynamicsSpec {
    std::string id = "custom";
    std::function<double(double)> self_rate;             // F
    std::function<double(double, double)> pair_rate;     // G
    bool clamp_nonnegative = false;
    std::map<std::string, double> params;

    // Bistable mutualistic family; the standard parameterization keeps a
    // positive abundance equilibrium reachable only above a coupling level.
    static DynamicsSpec mutualistic(double B = 0.1, double C = 1.0, double K = 5.0, double D = 5.0,
                                    double E = 0.9, double H = 0.1) {
        DynamicsSpec s;
        s.id = "mutualistic";
        s.params = {{"B", B}, {"C", C}, {"K", K}, {"D", D}, {"E", E}, {"H", H}};
        s.self_rate = [B, C, K](double x) { return B + x * (1.0 - x / K) * (x / C - 1.0); };
        s.pair_rate = [D, E, H](double xi, double xj) {
            return xi * xj / (D + E * xi + H * xj);
        };
        s.clamp_nonnegative = true;
        return s;
    }

    static DynamicsSpec linear_diffusion(double coupling = 1.0) {
        DynamicsSpec s;
        s.id = "linear_diffusion";
        s.params = {{"coupling", coupling}};
        s.self_rate = [](double) { return 0.0; };
        s.pair_rate = [coupling](double xi, double xj) { return coupling * (xj - xi); };
        return s;
    }

    static DynamicsSpec custom(std::function<double(double)> f,
                               std::function<double(double, double)> g,
                               bool clamp_nonnegative = false) {
        DynamicsSpec s;
        s.id = "custom";
        s.self_rate = std::move(f);
        s.pair_rate = std::move(g);
        s.clamp_nonnegative = clamp_nonnegative;
        return s;
    }

    static DynamicsSpec from_descriptor(const DynamicsDescriptor& d) {
        auto get = [&](const char* key, double fallback) {
            auto it = d.params.find(key);
            return it == d.params.end() ? fallback : it->second;
        };
        if (d.id == "mutualistic")
            return mutualistic(get("B", 0.1), get("C", 1.0), get("K", 5.0), get("D", 5.0),
                               get("E", 0.9), get("H", 0.1));
        if (d.id == "linear_diffusion") return linear_diffusion(get("coupling", 1.0));
        throw std::invalid_argument("unknown dynamics id: " + d.id);
    }

    DynamicsDescriptor descriptor() const { return DynamicsDescriptor{id, params}; }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Matrix> states;  // aligned with times
    std::string dynamics_id;
    double dt = 0.0;
    std::string integrator = "rk4";

    const Matrix& final_states() const { return states.back(); }
};

struct ResilienceVerdict {
    bool resilient = false;
    double steady_mean = 0.0;
    bool converged = false;
    double derivative_norm_at_end = 0.0;
};

inline constexpr double kDefaultDt = 0.01;
inline constexpr double kDefaultTEnd = 50.0;
inline constexpr double kConvergenceEps = 1e-4;
inline constexpr double kResilienceThetaFraction = 0.1;

namespace detail {

inline Matrix dynamics_field(const Graph& g, const DynamicsSpec& spec, const Matrix& u) {
    std::size_t n = u.rows, m = u.cols;
    Matrix du(n, m);
    // adjacency-driven interaction; per channel
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c) du.at(i, c) = spec.self_rate(u.at(i, c));
        for (std::size_t j = 0; j < n; ++j) {
            double a = g.at(i, j);
            if (a == 0.0) continue;
            for (std::size_t c = 0; c < m; ++c)
                du.at(i, c) += a * spec.pair_rate(u.at(i, c), u.at(j, c));
        }
    }
    return du;
}

}  // namespace detail

// Classical fixed-step RK4 with divergence detection. Mutualistic states are
// clamped at zero after each step (negative abundances are unphysical at
// coarse dt).
inline Trajectory integrate(const Graph& g, const DynamicsSpec& spec, const Matrix& u0, double dt,
                            double t_end) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
    if (t_end < 0.0) throw std::invalid_argument("integrate: t_end must be non-negative");
    if (!u0.all_finite()) throw std::invalid_argument("integrate: non-finite initial state");
    if (u0.rows != g.size()) throw std::invalid_argument("integrate: state rows != node count");

    Trajectory traj;
    traj.dynamics_id = spec.id;
    traj.dt = dt;
    traj.times.push_back(0.0);
    traj.states.push_back(u0);

    std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    Matrix u = u0;
    for (std::size_t s = 0; s < steps; ++s) {
        double t = static_cast<double>(s) * dt;
        Matrix k1 = detail::dynamics_field(g, spec, u);
        Matrix k2 = detail::dynamics_field(g, spec, u + scaled(k1, dt / 2.0));
        Matrix k3 = detail::dynamics_field(g, spec, u + scaled(k2, dt / 2.0));
        Matrix k4 = detail::dynamics_field(g, spec, u + scaled(k3, dt));
        for (std::size_t i = 0; i < u.v.size(); ++i)
            u.v[i] += dt / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
        if (spec.clamp_nonnegative)
            for (double& x : u.v) x = std::max(x, 0.0);
        for (std::size_t i = 0; i < u.v.size(); ++i)
            if (!std::isfinite(u.v[i])) throw divergence_error(t + dt, i / u.cols);
        traj.times.push_back(t + dt);
        traj.states.push_back(u);
    }
    return traj;
}

// Random node attack: round(fraction*N) distinct nodes get zeroed state rows
// and lose all incident edges. Nodes themselves are retained.
struct AttackResult {
    Graph graph;
    Matrix states;
    std::vector<std::size_t> removed;
};

inline AttackResult attack(const Graph& g, const Matrix& states, double fraction,
                           std::uint64_t rng_seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("attack: fraction must be in [0,1]");
    AttackResult out{g, states, {}};
    std::size_t n = g.size();
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    Rng rng = derive_rng(rng_seed, "attack");
    out.removed = rng.sample_without_replacement(n, k);
    std::sort(out.removed.begin(), out.removed.end());
    for (std::size_t node : out.removed) {
        out.graph.drop_incident_edges(node);
        for (std::size_t c = 0; c < out.states.cols; ++c) out.states.at(node, c) = 0.0;
    }
    return out;
}

// Dataset overload: the same node set is damaged in every snapshot of the copy.
inline TemporalGraphDataset attack(const TemporalGraphDataset& ds, double fraction,
                                   std::uint64_t rng_seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("attack: fraction must be in [0,1]");
    TemporalGraphDataset out = ds;
    std::size_t n = ds.n_nodes;
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    Rng rng = derive_rng(rng_seed, "attack");
    std::vector<std::size_t> removed = rng.sample_without_replacement(n, k);
    for (Snapshot& s : out.snapshots)
        for (std::size_t node : removed) {
            s.graph.drop_incident_edges(node);
            for (std::size_t c = 0; c < s.states.cols; ++c) s.states.at(node, c) = 0.0;
        }
    return out;
}

// Converged := RMS finite-difference derivative at the last sample < eps;
// resilient := converged and mean final state above theta.
inline ResilienceVerdict classify_resilience(const Trajectory& traj, double theta,
                                             double eps = kConvergenceEps) {
    if (traj.states.size() < 2)
        throw std::invalid_argument("classify_resilience: trajectory needs >= 2 samples");
    const Matrix& last = traj.states.back();
    const Matrix& prev = traj.states[traj.states.size() - 2];
    double dt = traj.times.back() - traj.times[traj.times.size() - 2];
    double acc = 0.0;
    for (std::size_t i = 0; i < last.v.size(); ++i) {
        double d = (last.v[i] - prev.v[i]) / dt;
        acc += d * d;
    }
    ResilienceVerdict v;
    v.derivative_norm_at_end = std::sqrt(acc / static_cast<double>(last.v.size()));
    v.converged = v.derivative_norm_at_end < eps;
    v.steady_mean = last.mean();
    v.resilient = v.converged && v.steady_mean > theta;
    return v;
}

struct MeanCurve {
    double fraction = 0.0;
    std::vector<double> times;
    std::vector<double> mean_state;
    std::vector<double> std_state;
};

namespace detail {

inline MeanCurve trajectory_curve(const Trajectory& traj, double fraction) {
    MeanCurve c;
    c.fraction = fraction;
    c.times = traj.times;
    c.mean_state.reserve(traj.states.size());
    c.std_state.reserve(traj.states.size());
    for (const Matrix& s : traj.states) {
        double mu = s.mean();
        double var = 0.0;
        for (double x : s.v) var += (x - mu) * (x - mu);
        var /= static_cast<double>(s.v.size());
        c.mean_state.push_back(mu);
        c.std_state.push_back(std::sqrt(var));
    }
    return c;
}

}  // namespace detail

// Attack at each fraction, integrate, and report the cross-node mean state
// over time. Fraction entries are attacked with independent derived seeds.
inline std::vector<MeanCurve> recovery_curve(const Graph& g, const DynamicsSpec& spec,
                                             const Matrix& u0,
                                             const std::vector<double>& fractions, double dt,
                                             double t_end, std::uint64_t seed = 0) {
    std::vector<MeanCurve> curves;
    curves.reserve(fractions.size());
    for (std::size_t idx = 0; idx < fractions.size(); ++idx) {
        double f = fractions[idx];
        if (f < 0.0 || f > 1.0)
            throw std::invalid_argument("recovery_curve: fraction must be in [0,1]");
        AttackResult a = attack(g, u0, f, splitmix64(seed ^ (idx + 1)));
        Trajectory traj = integrate(a.graph, spec, a.states, dt, t_end);
        curves.push_back(detail::trajectory_curve(traj, f));
    }
    return curves;
}

inline void write_curves_csv(std::ostream& os, const std::vector<MeanCurve>& curves) {
    os << "fraction,t,mean_state,std_state\n";
    char buf[128];
    for (const MeanCurve& c : curves)
        for (std::size_t k = 0; k < c.times.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", c.fraction, c.times[k],
                          c.mean_state[k], c.std_state[k]);
            os << buf;
        }
}

}  // namespace netresil
