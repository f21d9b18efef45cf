#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netresil/errors.hpp"
#include "netresil/params.hpp"
#include "netresil/tensor.hpp"
#include "netresil/window.hpp"

namespace netresil {

struct StateEncoderConfig {
    std::size_t d_e = 16;
    std::size_t n_heads = 2;
    std::size_t n_layers = 1;
    std::size_t gcn_hidden = 16;
    std::string ode_solver = "none";  // none | rk4
    double ode_dt = 0.25;

    std::size_t d_k() const { return d_e / n_heads; }
    std::size_t ffn_hidden() const { return 2 * d_e; }

    void validate() const {
        if (d_e < 1 || n_heads < 1 || n_layers < 1 || gcn_hidden < 1)
            throw std::invalid_argument("state encoder dims must be >= 1");
        if (d_e % n_heads != 0)
            throw std::invalid_argument("state encoder: n_heads * d_k must equal d_e");
        if (ode_solver != "none" && ode_solver != "rk4")
            throw std::invalid_argument("state encoder: unknown ode_solver " + ode_solver);
        if (ode_solver == "rk4" && !(ode_dt > 0.0))
            throw std::invalid_argument("state encoder: ode_dt must be positive");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["d_e"] = d_e;
        j["n_heads"] = n_heads;
        j["n_layers"] = n_layers;
        j["gcn_hidden"] = gcn_hidden;
        j["ode_solver"] = ode_solver;
        j["ode_dt"] = ode_dt;
        return j;
    }
    static StateEncoderConfig from_json(const nlohmann::json& j) {
        StateEncoderConfig c;
        c.d_e = j.value("d_e", c.d_e);
        c.n_heads = j.value("n_heads", c.n_heads);
        c.n_layers = j.value("n_layers", c.n_layers);
        c.gcn_hidden = j.value("gcn_hidden", c.gcn_hidden);
        c.ode_solver = j.value("ode_solver", c.ode_solver);
        c.ode_dt = j.value("ode_dt", c.ode_dt);
        return c;
    }
};

// Learned embedding-space vector field for the continuous-time head.
struct LearnedField {
    Tensor w1, b1, w2, b2;
};

struct TransformerLayerParams {
    std::vector<Tensor> wq, wk, wv;  // per head, d_e x d_k
    Tensor wo;                       // d_e x d_e
    Tensor ln1_gain, ln1_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln2_gain, ln2_bias;
};

struct StateEncoderParams {
    Tensor gcn_w1, gcn_w2;
    std::vector<TransformerLayerParams> layers;
    Tensor readout_w, readout_b;
    LearnedField ode_field;  // only populated when the rollout head is enabled
    bool has_ode_field = false;
};

inline StateEncoderParams init_state_encoder(ParamStore& store, const StateEncoderConfig& cfg,
                                             std::size_t feature_dim, Rng& rng) {
    cfg.validate();
    StateEncoderParams p;
    p.gcn_w1 = store.acquire("state.gcn.w1", {feature_dim, cfg.gcn_hidden}, Init::Xavier, rng);
    p.gcn_w2 = store.acquire("state.gcn.w2", {cfg.gcn_hidden, cfg.d_e}, Init::Xavier, rng);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        TransformerLayerParams lp;
        std::string base = "state.encoder." + std::to_string(l) + ".";
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            std::string hb = base + "head." + std::to_string(h) + ".";
            lp.wq.push_back(store.acquire(hb + "wq", {cfg.d_e, cfg.d_k()}, Init::Xavier, rng));
            lp.wk.push_back(store.acquire(hb + "wk", {cfg.d_e, cfg.d_k()}, Init::Xavier, rng));
            lp.wv.push_back(store.acquire(hb + "wv", {cfg.d_e, cfg.d_k()}, Init::Xavier, rng));
        }
        lp.wo = store.acquire(base + "wo", {cfg.d_e, cfg.d_e}, Init::Xavier, rng);
        lp.ln1_gain = store.acquire(base + "ln1.gain", {cfg.d_e}, Init::Ones, rng);
        lp.ln1_bias = store.acquire(base + "ln1.bias", {cfg.d_e}, Init::Zeros, rng);
        lp.ff_w1 = store.acquire(base + "ffn.w1", {cfg.d_e, cfg.ffn_hidden()}, Init::Xavier, rng);
        lp.ff_b1 = store.acquire(base + "ffn.b1", {cfg.ffn_hidden()}, Init::Zeros, rng);
        lp.ff_w2 = store.acquire(base + "ffn.w2", {cfg.ffn_hidden(), cfg.d_e}, Init::Xavier, rng);
        lp.ff_b2 = store.acquire(base + "ffn.b2", {cfg.d_e}, Init::Zeros, rng);
        lp.ln2_gain = store.acquire(base + "ln2.gain", {cfg.d_e}, Init::Ones, rng);
        lp.ln2_bias = store.acquire(base + "ln2.bias", {cfg.d_e}, Init::Zeros, rng);
        p.layers.push_back(std::move(lp));
    }
    p.readout_w = store.acquire("state.readout.w", {cfg.d_e, feature_dim}, Init::Xavier, rng);
    p.readout_b = store.acquire("state.readout.b", {feature_dim}, Init::Zeros, rng);
    if (cfg.ode_solver == "rk4") {
        p.ode_field.w1 = store.acquire("state.ode.w1", {cfg.d_e, cfg.d_e}, Init::Xavier, rng);
        p.ode_field.b1 = store.acquire("state.ode.b1", {cfg.d_e}, Init::Zeros, rng);
        p.ode_field.w2 = store.acquire("state.ode.w2", {cfg.d_e, cfg.d_e}, Init::Xavier, rng);
        p.ode_field.b2 = store.acquire("state.ode.b2", {cfg.d_e}, Init::Zeros, rng);
        p.has_ode_field = true;
    }
    return p;
}

// E = S relu(S U W1) W2 with S the self-loop symmetric-normalized adjacency.
inline Tensor gcn_embed(const Tensor& states, const Tensor& sym_norm_adj,
                        const StateEncoderParams& p) {
    Tensor hidden = relu(matmul(matmul(sym_norm_adj, states), p.gcn_w1));
    return matmul(matmul(sym_norm_adj, hidden), p.gcn_w2);
}

inline std::vector<double> positional_embedding(std::size_t t, std::size_t d_e) {
    std::vector<double> pe(d_e);
    for (std::size_t idx = 0; idx < d_e; ++idx) {
        std::size_t n2 = idx - (idx % 2);  // 2n
        double angle = static_cast<double>(t) /
                       std::pow(10000.0, static_cast<double>(n2) / static_cast<double>(d_e));
        pe[idx] = (idx % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    return pe;
}

// softmax(Q K^T / sqrt(d_k)); exposed so tests can look at the weights.
inline Tensor attention_weights(const Tensor& q, const Tensor& k) {
    double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return softmax_rows(mul_scalar(matmul(q, transpose(k)), scale));
}

// One encoder stack over a per-node time sequence (T x d_e): multi-head
// scaled dot-product attention along the time axis, residual + layer norm,
// then the two-layer feed-forward block, residual + layer norm.
inline Tensor transformer_encode(const Tensor& sequence, const StateEncoderParams& p,
                                 const StateEncoderConfig& cfg) {
    if (sequence.rank() != 2 || sequence.cols() != cfg.d_e)
        throw std::invalid_argument("transformer_encode: expected T x d_e input, got " +
                                    detail::shape_str(sequence.shape()));
    Tensor x = sequence;
    for (const TransformerLayerParams& lp : p.layers) {
        std::vector<Tensor> heads;
        heads.reserve(lp.wq.size());
        for (std::size_t h = 0; h < lp.wq.size(); ++h) {
            Tensor q = matmul(x, lp.wq[h]);
            Tensor k = matmul(x, lp.wk[h]);
            Tensor v = matmul(x, lp.wv[h]);
            heads.push_back(matmul(attention_weights(q, k), v));
        }
        Tensor att = matmul(concat_cols(heads), lp.wo);
        x = layer_norm_rows(add(x, att), lp.ln1_gain, lp.ln1_bias);
        Tensor ff = add_row_vector(
            matmul(relu(add_row_vector(matmul(x, lp.ff_w1), lp.ff_b1)), lp.ff_w2), lp.ff_b2);
        x = layer_norm_rows(add(x, ff), lp.ln2_gain, lp.ln2_bias);
    }
    return x;
}

inline Tensor apply_field(const LearnedField& f, const Tensor& v) {
    return add(matvec(f.w2, tanh(add(matvec(f.w1, v), f.b1))), f.b2);
}

// RK4 rollout of the learned field in embedding space; exact at t_target = 0.
inline Tensor ode_rollout(const LearnedField& f, const Tensor& e0, double t_target, double dt) {
    if (t_target < 0.0) throw std::invalid_argument("ode_rollout: t_target must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("ode_rollout: dt must be positive");
    Tensor e = e0;
    double t = 0.0;
    while (t < t_target - 1e-12) {
        double h = std::min(dt, t_target - t);
        Tensor k1 = apply_field(f, e);
        Tensor k2 = apply_field(f, add(e, mul_scalar(k1, h / 2.0)));
        Tensor k3 = apply_field(f, add(e, mul_scalar(k2, h / 2.0)));
        Tensor k4 = apply_field(f, add(e, mul_scalar(k3, h)));
        Tensor step = add(add(k1, mul_scalar(add(k2, k3), 2.0)), k4);
        e = add(e, mul_scalar(step, h / 6.0));
        for (std::size_t i = 0; i < e.numel(); ++i)
            if (!std::isfinite(e.at(i))) throw divergence_error(t + h, i);
        t += h;
    }
    return e;
}

struct StatePrediction {
    // step_predictions[k] is the one-step prediction of window step k+1; the
    // last entry targets the snapshot after the window.
    std::vector<Tensor> step_predictions;
    Tensor target_prediction;  // N x M
};

inline StatePrediction predict_states(const Window& w, const StateEncoderParams& p,
                                      const StateEncoderConfig& cfg) {
    std::size_t T = w.length;
    std::size_t n = w.nodes();

    std::vector<Tensor> embeddings;  // per step, N x d_e
    embeddings.reserve(T);
    for (std::size_t k = 0; k < T; ++k) {
        Tensor e = gcn_embed(w.states[k], w.sym_adj[k], p);
        Tensor pe = Tensor::from_data({cfg.d_e}, positional_embedding(k, cfg.d_e));
        embeddings.push_back(add_row_vector(e, pe));
    }

    std::vector<Tensor> per_node_readout;  // per node, T x M
    per_node_readout.reserve(n);
    std::vector<Tensor> rolled_rows;  // only with the continuous-time head
    bool use_ode = p.has_ode_field && cfg.ode_solver == "rk4";
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Tensor> seq;
        seq.reserve(T);
        for (std::size_t k = 0; k < T; ++k) seq.push_back(row(embeddings[k], i));
        Tensor ctx = transformer_encode(stack_rows(seq), p, cfg);
        per_node_readout.push_back(add_row_vector(matmul(ctx, p.readout_w), p.readout_b));
        if (use_ode) {
            double gap = w.times[T] - w.times[T - 1];
            Tensor rolled = ode_rollout(p.ode_field, row(ctx, T - 1), gap, cfg.ode_dt);
            rolled_rows.push_back(
                add(matvec(transpose(p.readout_w), rolled), p.readout_b));
        }
    }

    StatePrediction out;
    out.step_predictions.reserve(T);
    for (std::size_t k = 0; k < T; ++k) {
        std::vector<Tensor> rows;
        rows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) rows.push_back(row(per_node_readout[i], k));
        out.step_predictions.push_back(stack_rows(rows));
    }
    out.target_prediction = use_ode ? stack_rows(rolled_rows) : out.step_predictions.back();
    return out;
}

inline Tensor predict_next_state(const Window& w, const StateEncoderParams& p,
                                 const StateEncoderConfig& cfg) {
    return predict_states(w, p, cfg).target_prediction;
}

}  // namespace netresil
