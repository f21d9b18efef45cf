#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netresil/dataset.hpp"
#include "netresil/errors.hpp"
#include "netresil/params.hpp"
#include "netresil/physics.hpp"
#include "netresil/rng.hpp"
#include "netresil/state_encoder.hpp"
#include "netresil/tensor.hpp"
#include "netresil/topo_encoder.hpp"
#include "netresil/window.hpp"

namespace netresil {

struct TrainConfig {
    std::size_t epochs = 200;
    double learning_rate = 1e-3;
    double lr_min_fraction = 1.0;  // < 1 decays the rate linearly to this floor
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    PhysicsParams physics;
    double negative_ratio = 1.0;
    std::size_t window = 8;
    std::uint64_t seed = 1;
    std::string dataset_path;
    double split_ratio = 0.8;
    bool use_true_adjacency = false;  // ablation: ground-truth A in the residual
    bool sliding_windows = false;
    StateEncoderConfig state_encoder;
    TopoEncoderConfig topo_encoder;

    void validate() const {
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("train config: learning_rate must be positive");
        if (!(lr_min_fraction > 0.0 && lr_min_fraction <= 1.0))
            throw std::invalid_argument("train config: lr_min_fraction must be in (0,1]");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw std::invalid_argument("train config: split ratio must be in (0,1)");
        if (window < 1) throw std::invalid_argument("train config: window must be >= 1");
        if (!(negative_ratio > 0.0))
            throw std::invalid_argument("train config: negative_ratio must be positive");
        state_encoder.validate();
        topo_encoder.validate();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["epochs"] = epochs;
        j["learning_rate"] = learning_rate;
        j["lr_min_fraction"] = lr_min_fraction;
        j["beta1"] = beta1;
        j["beta2"] = beta2;
        j["epsilon"] = epsilon;
        j["physics"] = physics.to_json();
        j["negative_ratio"] = negative_ratio;
        j["window"] = window;
        j["seed"] = seed;
        j["dataset"] = dataset_path;
        j["split_ratio"] = split_ratio;
        j["use_true_adjacency"] = use_true_adjacency;
        j["sliding_windows"] = sliding_windows;
        j["state_encoder"] = state_encoder.to_json();
        j["topo_encoder"] = topo_encoder.to_json();
        return j;
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.lr_min_fraction = j.value("lr_min_fraction", c.lr_min_fraction);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        if (j.contains("physics")) c.physics = PhysicsParams::from_json(j.at("physics"));
        c.negative_ratio = j.value("negative_ratio", c.negative_ratio);
        c.window = j.value("window", c.window);
        c.seed = j.value("seed", c.seed);
        c.dataset_path = j.value("dataset", c.dataset_path);
        c.split_ratio = j.value("split_ratio", c.split_ratio);
        c.use_true_adjacency = j.value("use_true_adjacency", c.use_true_adjacency);
        c.sliding_windows = j.value("sliding_windows", c.sliding_windows);
        if (j.contains("state_encoder"))
            c.state_encoder = StateEncoderConfig::from_json(j.at("state_encoder"));
        if (j.contains("topo_encoder"))
            c.topo_encoder = TopoEncoderConfig::from_json(j.at("topo_encoder"));
        return c;
    }
};

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy over positive pairs and sampled non-edges, averaged
// over all terms. Probabilities are clamped to [1e-7, 1-1e-7].
inline Tensor topology_loss_terms(const Tensor& a_hat, const std::vector<EdgePair>& positives,
                                  const std::vector<EdgePair>& negatives) {
    if (positives.empty()) throw std::invalid_argument("topology_loss: no positive edges");
    std::size_t n = a_hat.rows();
    std::vector<std::size_t> pos_idx, neg_idx;
    pos_idx.reserve(positives.size());
    neg_idx.reserve(negatives.size());
    for (const auto& [i, j] : positives) pos_idx.push_back(i * n + j);
    for (const auto& [i, j] : negatives) neg_idx.push_back(i * n + j);

    Tensor acc = sum(log(clamp(gather(a_hat, pos_idx), kProbClamp, 1.0 - kProbClamp)));
    if (!neg_idx.empty()) {
        Tensor pn = gather(a_hat, neg_idx);
        Tensor one_minus = add_scalar(neg(pn), 1.0);
        acc = add(acc, sum(log(clamp(one_minus, kProbClamp, 1.0 - kProbClamp))));
    }
    double total = static_cast<double>(pos_idx.size() + neg_idx.size());
    return mul_scalar(acc, -1.0 / total);
}

inline std::vector<EdgePair> sample_negative_edges(const Graph& truth, std::size_t count,
                                                   Rng& rng) {
    std::vector<EdgePair> universe = truth.non_edges();
    if (universe.empty()) return {};
    if (count > universe.size()) count = universe.size();
    std::vector<std::size_t> picks = rng.sample_without_replacement(universe.size(), count);
    std::vector<EdgePair> out;
    out.reserve(picks.size());
    for (std::size_t k : picks) out.push_back(universe[k]);
    return out;
}

// Spec-shaped entry point: positives are all edges of the 0/1 truth graph,
// negatives an equal-count (times negative_ratio) uniform non-edge sample.
inline Tensor topology_loss(const Tensor& a_hat, const Graph& truth,
                            std::uint64_t negative_sample_seed, double negative_ratio = 1.0) {
    std::vector<EdgePair> positives;
    for (const Edge& e : truth.edges()) positives.emplace_back(e.i, e.j);
    if (positives.empty())
        throw std::invalid_argument("topology_loss: graph has no edges; loss undefined");
    Rng rng = derive_rng(negative_sample_seed, "negatives");
    auto count = static_cast<std::size_t>(
        std::llround(negative_ratio * static_cast<double>(positives.size())));
    std::vector<EdgePair> negatives = sample_negative_edges(truth, count, rng);
    return topology_loss_terms(a_hat, positives, negatives);
}

inline Tensor joint_loss(const Tensor& physics_term, const Tensor& topology_term) {
    return add(physics_term, topology_term);
}

// ---------------------------------------------------------------------------
// Optimizer: adaptive moment estimation with bias correction

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long long step = 0;
};

inline void adam_step(ParamStore& store, AdamState& state, const AdamConfig& cfg) {
    if (state.m.size() != store.size()) {
        state.m.assign(store.size(), {});
        state.v.assign(store.size(), {});
        for (std::size_t p = 0; p < store.size(); ++p) {
            state.m[p].assign(store.item(p).second.numel(), 0.0);
            state.v[p].assign(store.item(p).second.numel(), 0.0);
        }
    }
    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < store.size(); ++p) {
        const auto& [name, tensor] = store.item(p);
        Tensor t = tensor;
        auto& values = t.mutable_values();
        const std::vector<double>* grad = t.has_grad() ? &t.grad() : nullptr;
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < values.size(); ++i) {
            double g = grad ? (*grad)[i] : 0.0;
            if (std::isnan(g)) throw numerical_error("NaN gradient in parameter " + name);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Training

struct TrainHistory {
    std::vector<double> loss;
    std::vector<double> loss_phy;
    std::vector<double> loss_top;
};

struct Checkpoint {
    int version = 1;
    nlohmann::ordered_json config;
    ParamStore params;
    TrainHistory history;

    TrainConfig train_config() const { return TrainConfig::from_json(config); }
};

struct JointModel {
    StateEncoderParams state;
    TopoEncoderParams topo;
};

inline JointModel build_model(ParamStore& store, const TrainConfig& cfg, std::size_t feature_dim,
                              Rng& init_rng) {
    JointModel m;
    m.state = init_state_encoder(store, cfg.state_encoder, feature_dim, init_rng);
    m.topo = init_topo_encoder(store, cfg.topo_encoder, feature_dim, init_rng);
    return m;
}

// Mean physics residual over consecutive predicted snapshots, using the
// window's first snapshot as the reference initial state.
inline Tensor window_physics_loss(const StatePrediction& pred, const Window& w,
                                  const Tensor& adjacency, const PhysicsParams& p) {
    std::size_t pairs = pred.step_predictions.size() >= 2 ? pred.step_predictions.size() - 1 : 0;
    if (pairs == 0) return Tensor::scalar(0.0);
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t k = 0; k + 1 < pred.step_predictions.size(); ++k) {
        double dt = w.times[k + 2] - w.times[k + 1];
        acc = add(acc, physics_loss(pred.step_predictions[k], pred.step_predictions[k + 1],
                                    w.states[0], adjacency, p, dt));
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(pairs));
}

inline Checkpoint train(const TemporalGraphDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    if (ds.horizon() < cfg.window + 1)
        throw std::invalid_argument("train: dataset has " + std::to_string(ds.horizon()) +
                                    " snapshots, window " + std::to_string(cfg.window) +
                                    " needs at least " + std::to_string(cfg.window + 1));

    Rng init_rng = derive_rng(cfg.seed, "init");
    Checkpoint ckpt;
    ckpt.config = cfg.to_json();
    ckpt.config["dataset_name"] = ds.name;
    ckpt.config["n_nodes"] = ds.n_nodes;
    ckpt.config["feature_dim"] = ds.feature_dim;
    JointModel model = build_model(ckpt.params, cfg, ds.feature_dim, init_rng);

    // physics residual over every window, topology loss on the tail window
    std::vector<Window> windows;
    if (cfg.sliding_windows) {
        for (std::size_t s = 0; s + cfg.window < ds.horizon(); ++s)
            windows.push_back(make_window(ds, s, cfg.window));
    } else {
        windows.push_back(make_tail_window(ds, cfg.window));
    }
    const Window& tail = windows.back();
    const Graph& target_graph = ds.snapshots[tail.target_index].graph;
    EdgeSplit edge_split = split_edges(target_graph, cfg.split_ratio, cfg.seed);
    Tensor true_adjacency = adjacency_tensor(target_graph);

    AdamConfig adam_cfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
    AdamState adam_state;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        ckpt.params.zero_grads();

        Tensor topo_term, phys_term;
        {
            TopologyPrediction topo = predict_topology(tail, model.topo, cfg.topo_encoder);
            const Tensor& residual_adj = cfg.use_true_adjacency ? true_adjacency : topo.adjacency;

            Tensor phys_acc = Tensor::scalar(0.0);
            for (const Window& w : windows) {
                StatePrediction pred = predict_states(w, model.state, cfg.state_encoder);
                phys_acc = add(phys_acc, window_physics_loss(pred, w, residual_adj, cfg.physics));
            }
            phys_term = mul_scalar(phys_acc, 1.0 / static_cast<double>(windows.size()));

            Rng neg_rng = derive_rng(cfg.seed, "negatives", epoch);
            auto count = static_cast<std::size_t>(std::llround(
                cfg.negative_ratio * static_cast<double>(edge_split.train.size())));
            std::vector<EdgePair> negatives = sample_negative_edges(target_graph, count, neg_rng);
            topo_term = topology_loss_terms(topo.adjacency, edge_split.train, negatives);
        }
        Tensor total = joint_loss(phys_term, topo_term);

        double lv = total.value();
        if (std::isnan(lv) || std::isinf(lv))
            throw numerical_error("training diverged at epoch " + std::to_string(epoch));
        ckpt.history.loss.push_back(lv);
        ckpt.history.loss_phy.push_back(phys_term.value());
        ckpt.history.loss_top.push_back(topo_term.value());

        backward(total);
        double frac = cfg.epochs > 1
                          ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1)
                          : 0.0;
        adam_cfg.learning_rate =
            cfg.learning_rate * (1.0 - (1.0 - cfg.lr_min_fraction) * frac);
        adam_step(ckpt.params, adam_state, adam_cfg);
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O (atomic write-temp-then-rename)

inline nlohmann::ordered_json checkpoint_to_json(const Checkpoint& c) {
    nlohmann::ordered_json j;
    j["version"] = c.version;
    j["config"] = c.config;
    j["params"] = c.params.to_json();
    nlohmann::ordered_json h;
    h["loss"] = c.history.loss;
    h["loss_phy"] = c.history.loss_phy;
    h["loss_top"] = c.history.loss_top;
    j["history"] = std::move(h);
    return j;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("save_checkpoint: cannot write " + tmp.string());
        f << checkpoint_to_json(c).dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    Checkpoint c;
    c.version = j.at("version").get<int>();
    if (c.version != 1)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(c.version));
    c.config = j.at("config");
    c.params.load_json(j.at("params"));
    c.history.loss = j.at("history").at("loss").get<std::vector<double>>();
    c.history.loss_phy = j.at("history").at("loss_phy").get<std::vector<double>>();
    c.history.loss_top = j.at("history").at("loss_top").get<std::vector<double>>();
    return c;
}

// Rebuild the live model from a loaded checkpoint.
inline JointModel bind_model(Checkpoint& c) {
    TrainConfig cfg = c.train_config();
    std::size_t feature_dim = c.config.at("feature_dim").get<std::size_t>();
    Rng throwaway = derive_rng(cfg.seed, "init");
    return build_model(c.params, cfg, feature_dim, throwaway);
}

}  // namespace netresil
