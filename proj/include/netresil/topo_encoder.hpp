#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netresil/graph.hpp"
#include "netresil/params.hpp"
#include "netresil/tensor.hpp"
#include "netresil/window.hpp"

namespace netresil {

struct TopoEncoderConfig {
    std::size_t d_z = 16;
    std::size_t l_hops = 1;
    std::size_t d_h = 16;  // kept equal to d_z so the fusion set is homogeneous
    std::size_t mlp_hidden = 16;

    void validate() const {
        if (d_z < 1 || l_hops < 1 || d_h < 1 || mlp_hidden < 1)
            throw std::invalid_argument("topo encoder dims must be >= 1");
        if (d_z != d_h)
            throw std::invalid_argument("topo encoder: d_z must equal d_h");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["d_z"] = d_z;
        j["l_hops"] = l_hops;
        j["d_h"] = d_h;
        j["mlp_hidden"] = mlp_hidden;
        return j;
    }
    static TopoEncoderConfig from_json(const nlohmann::json& j) {
        TopoEncoderConfig c;
        c.d_z = j.value("d_z", c.d_z);
        c.l_hops = j.value("l_hops", c.l_hops);
        c.d_h = j.value("d_h", j.value("d_z", c.d_h));
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        return c;
    }
};

struct SpatialHopParams {
    Tensor w_attn;  // d_z x (2*in + 1), input side of the attention score
    Tensor v_attn;  // d_z
    Tensor w_agg;   // d_z x (in + 1)
    Tensor w_self;  // d_z x (in + d_z)
};

struct TopoEncoderParams {
    std::vector<SpatialHopParams> hops;  // shared across time steps
    Tensor lstm_w;                       // 4*d_h x (d_z + d_h)
    Tensor lstm_b;                       // 4*d_h
    Tensor fuse_score_v;                 // d_z
    Tensor fuse_proj_w;                  // d_z x d_z
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

inline TopoEncoderParams init_topo_encoder(ParamStore& store, const TopoEncoderConfig& cfg,
                                           std::size_t feature_dim, Rng& rng) {
    cfg.validate();
    TopoEncoderParams p;
    for (std::size_t l = 0; l < cfg.l_hops; ++l) {
        std::size_t in = (l == 0) ? feature_dim : cfg.d_z;
        std::string base = "topo.spatial." + std::to_string(l) + ".";
        SpatialHopParams hp;
        hp.w_attn = store.acquire(base + "w_attn", {cfg.d_z, 2 * in + 1}, Init::Xavier, rng);
        hp.v_attn = store.acquire(base + "v_attn", {cfg.d_z}, Init::Xavier, rng);
        hp.w_agg = store.acquire(base + "w_agg", {cfg.d_z, in + 1}, Init::Xavier, rng);
        hp.w_self = store.acquire(base + "w_self", {cfg.d_z, in + cfg.d_z}, Init::Xavier, rng);
        p.hops.push_back(std::move(hp));
    }
    p.lstm_w = store.acquire("topo.lstm.w", {4 * cfg.d_h, cfg.d_z + cfg.d_h}, Init::Xavier, rng);
    p.lstm_b = store.acquire("topo.lstm.b", {4 * cfg.d_h}, Init::Zeros, rng);
    p.fuse_score_v = store.acquire("topo.fuse.v", {cfg.d_z}, Init::Xavier, rng);
    p.fuse_proj_w = store.acquire("topo.fuse.w", {cfg.d_z, cfg.d_z}, Init::Xavier, rng);
    p.mlp_w1 = store.acquire("topo.decoder.w1", {2 * cfg.d_z, cfg.mlp_hidden}, Init::Xavier, rng);
    p.mlp_b1 = store.acquire("topo.decoder.b1", {cfg.mlp_hidden}, Init::Zeros, rng);
    p.mlp_w2 = store.acquire("topo.decoder.w2", {cfg.mlp_hidden, 1}, Init::Xavier, rng);
    p.mlp_b2 = store.acquire("topo.decoder.b2", {1}, Init::Zeros, rng);
    return p;
}

// Attention-weighted neighbor aggregation for one node:
//   a_ij  = softmax_j( v . sigmoid(W1 [x_i, x_j, e_ij]) )
//   z'_i  = sigmoid(W2 sum_j a_ij [x_j, e_ij])      (zero vector if isolated)
//   z_i   = sigmoid(W3 [x_i, z'_i])
inline Tensor spatial_aggregate(const Tensor& x_i,
                                const std::vector<std::pair<Tensor, double>>& neighbors,
                                const SpatialHopParams& p, std::size_t d_z) {
    Tensor zprime;
    if (neighbors.empty()) {
        zprime = Tensor::zeros({d_z});
    } else {
        std::vector<Tensor> score_rows, feat_rows;
        score_rows.reserve(neighbors.size());
        feat_rows.reserve(neighbors.size());
        for (const auto& [x_j, w] : neighbors) {
            Tensor e = Tensor::scalar(w);
            score_rows.push_back(concat({x_i, x_j, e}));
            feat_rows.push_back(concat({x_j, e}));
        }
        Tensor scores = reshape(
            matmul(sigmoid(matmul(stack_rows(score_rows), transpose(p.w_attn))),
                   reshape(p.v_attn, {d_z, 1})),
            {neighbors.size()});
        Tensor att = softmax(scores);
        Tensor weighted = reshape(
            matmul(reshape(att, {1, neighbors.size()}), stack_rows(feat_rows)),
            {feat_rows[0].numel()});
        zprime = sigmoid(matvec(p.w_agg, weighted));
    }
    return sigmoid(matvec(p.w_self, concat({x_i, zprime})));
}

// Standard LSTM recurrence over a node's spatial embeddings; returns the
// hidden state at every step.
inline std::vector<Tensor> temporal_aggregate(const std::vector<Tensor>& sequence,
                                              const TopoEncoderParams& p, std::size_t d_h) {
    if (sequence.empty()) throw std::invalid_argument("temporal_aggregate: empty sequence");
    std::vector<Tensor> hidden;
    hidden.reserve(sequence.size());
    Tensor h = Tensor::zeros({d_h});
    Tensor c = Tensor::zeros({d_h});
    for (const Tensor& z : sequence) {
        Tensor gates = add(matvec(p.lstm_w, concat({z, h})), p.lstm_b);
        Tensor gi = sigmoid(slice(gates, 0, d_h));
        Tensor gf = sigmoid(slice(gates, d_h, d_h));
        Tensor go = sigmoid(slice(gates, 2 * d_h, d_h));
        Tensor gg = tanh(slice(gates, 3 * d_h, d_h));
        c = add(mul(gf, c), mul(gi, gg));
        h = mul(go, tanh(c));
        hidden.push_back(h);
    }
    return hidden;
}

// Attention pooling over the union of spatial and temporal embeddings:
//   delta_e = softmax_e( v2 . sigmoid(e) ),  q = sigmoid(W [sum_e delta_e e]).
inline Tensor fuse(const std::vector<Tensor>& members, const TopoEncoderParams& p,
                   std::size_t d_z) {
    if (members.empty()) throw std::invalid_argument("fuse: empty embedding set");
    Tensor emat = stack_rows(members);
    Tensor scores = reshape(
        matmul(sigmoid(emat), reshape(p.fuse_score_v, {d_z, 1})), {members.size()});
    Tensor delta = softmax(scores);
    Tensor agg = reshape(matmul(reshape(delta, {1, members.size()}), emat), {d_z});
    return sigmoid(matvec(p.fuse_proj_w, agg));
}

// Edge probabilities from node embeddings: sigmoid(MLP([q_i, q_j])),
// symmetrized and with a zero diagonal.
inline Tensor decode_edges(const Tensor& q, const TopoEncoderParams& p) {
    if (q.rank() != 2) throw std::invalid_argument("decode_edges: expected N x d input");
    std::size_t n = q.rows();
    Tensor pairs = concat_cols({repeat_rows_each(q, n), tile_rows(q, n)});  // n^2 x 2d
    Tensor hidden = relu(add_row_vector(matmul(pairs, p.mlp_w1), p.mlp_b1));
    Tensor score = add_row_vector(matmul(hidden, p.mlp_w2), p.mlp_b2);
    Tensor probs = reshape(sigmoid(score), {n, n});
    Tensor sym = mul_scalar(add(probs, transpose(probs)), 0.5);
    Tensor mask = Tensor::full({n, n}, 1.0);
    for (std::size_t i = 0; i < n; ++i) mask.mutable_values()[i * n + i] = 0.0;
    return mul(sym, mask);
}

struct TopologyPrediction {
    Tensor node_embeddings;  // N x d_z
    Tensor adjacency;        // N x N probabilities
};

inline TopologyPrediction predict_topology(const Window& w, const TopoEncoderParams& p,
                                           const TopoEncoderConfig& cfg) {
    std::size_t T = w.length;
    std::size_t n = w.nodes();

    // spatial embeddings per step, stacked l_hops deep with shared weights
    std::vector<std::vector<Tensor>> z(T);  // z[k][i]
    for (std::size_t k = 0; k < T; ++k) {
        const Graph& g = *w.graphs[k];
        std::vector<Tensor> current(n);
        for (std::size_t i = 0; i < n; ++i) current[i] = row(w.states[k], i);
        for (const SpatialHopParams& hop : p.hops) {
            std::vector<Tensor> next(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<std::pair<Tensor, double>> nb;
                for (std::size_t j : g.neighbors(i)) nb.emplace_back(current[j], g.at(i, j));
                next[i] = spatial_aggregate(current[i], nb, hop, cfg.d_z);
            }
            current = std::move(next);
        }
        z[k] = std::move(current);
    }

    std::vector<Tensor> q_rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Tensor> seq;
        seq.reserve(T);
        for (std::size_t k = 0; k < T; ++k) seq.push_back(z[k][i]);
        std::vector<Tensor> h = temporal_aggregate(seq, p, cfg.d_h);
        std::vector<Tensor> members = seq;
        members.insert(members.end(), h.begin(), h.end());
        q_rows[i] = fuse(members, p, cfg.d_z);
    }

    TopologyPrediction out;
    out.node_embeddings = stack_rows(q_rows);
    out.adjacency = decode_edges(out.node_embeddings, p);
    return out;
}

}  // namespace netresil
