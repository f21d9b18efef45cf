#pragma once

#include <stdexcept>

#include <json.hpp>

#include "netresil/graph.hpp"
#include "netresil/matrix.hpp"
#include "netresil/tensor.hpp"

namespace netresil {

// Gains of the node-dynamics equation
//   du_i/dt = alpha (u_i - u_i^0) + beta (L u)_i
//             + gamma sum_{j in N_i} sum_{k in N_j} A_jk / sqrt(d~_j d~_k) (u_k - u_j).
// beta < 0 diffuses toward neighbors under L = D - A; all three are signed,
// hand-tuned per dataset.
struct PhysicsParams {
    double alpha = -0.2;
    double beta = -0.5;
    double gamma = -0.1;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["alpha"] = alpha;
        j["beta"] = beta;
        j["gamma"] = gamma;
        return j;
    }
    static PhysicsParams from_json(const nlohmann::json& j) {
        PhysicsParams p;
        p.alpha = j.value("alpha", p.alpha);
        p.beta = j.value("beta", p.beta);
        p.gamma = j.value("gamma", p.gamma);
        return p;
    }
};

inline Tensor tensor_from_matrix(const Matrix& m, bool requires_grad = false) {
    return Tensor::from_data({m.rows, m.cols}, m.v, requires_grad);
}

inline Matrix matrix_from_tensor(const Tensor& t) {
    Matrix m(t.rows(), t.cols());
    m.v = t.values();
    return m;
}

inline Tensor adjacency_tensor(const Graph& g) {
    return Tensor::from_data({g.size(), g.size()}, g.adjacency());
}

// Right-hand side of the node-dynamics equation, differentiable in both the
// states and the (possibly predicted, dense) adjacency. The 2-hop sum is read
// as: for target i, over neighbors j of i and neighbors k of j, with
// self-loop-augmented degrees so zero-degree nodes stay defined.
inline Tensor node_dynamics_rhs(const Tensor& u_t, const Tensor& u_0, const Tensor& adjacency,
                                const PhysicsParams& p) {
    if (u_t.rank() != 2 || u_t.shape() != u_0.shape())
        throw std::invalid_argument("node_dynamics_rhs: state shapes disagree " +
                                    detail::shape_str(u_t.shape()) + " vs " +
                                    detail::shape_str(u_0.shape()));
    std::size_t n = u_t.rows();
    if (adjacency.rank() != 2 || adjacency.rows() != n || adjacency.cols() != n)
        throw std::invalid_argument("node_dynamics_rhs: adjacency must be " + std::to_string(n) +
                                    "-square, got " + detail::shape_str(adjacency.shape()));

    Tensor ones_col = Tensor::full({n, 1}, 1.0);
    Tensor deg = reshape(matmul(adjacency, ones_col), {n});

    // beta term: (L u) = D u - A u
    Tensor laplacian_u = sub(scale_rows(u_t, deg), matmul(adjacency, u_t));

    // gamma term: S_j = sum_k A^_jk (u_k - u_j); target i accumulates over
    // its neighbors, A-weighted.
    Tensor inv_sqrt_deg = divide(Tensor::full({n}, 1.0), sqrt(add_scalar(deg, 1.0)));
    Tensor norm_adj = scale_cols(scale_rows(adjacency, inv_sqrt_deg), inv_sqrt_deg);
    Tensor norm_rowsum = reshape(matmul(norm_adj, ones_col), {n});
    Tensor neighbor_diff = sub(matmul(norm_adj, u_t), scale_rows(u_t, norm_rowsum));
    Tensor two_hop = matmul(adjacency, neighbor_diff);

    Tensor out = mul_scalar(sub(u_t, u_0), p.alpha);
    out = add(out, mul_scalar(laplacian_u, p.beta));
    out = add(out, mul_scalar(two_hop, p.gamma));
    return out;
}

inline Matrix node_dynamics_rhs(const Matrix& u_t, const Matrix& u_0, const Graph& g,
                                const PhysicsParams& p) {
    Tensor out = node_dynamics_rhs(tensor_from_matrix(u_t), tensor_from_matrix(u_0),
                                   adjacency_tensor(g), p);
    return matrix_from_tensor(out);
}

// Mean squared forward-difference residual between two consecutive predicted
// snapshots: R = (u^{t+1} - u^t)/dt - rhs(u^t).
inline Tensor physics_loss(const Tensor& u_hat_t, const Tensor& u_hat_next, const Tensor& u_0,
                           const Tensor& adjacency, const PhysicsParams& p, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("physics_loss: dt must be positive");
    detail::check_same_shape("physics_loss", u_hat_t, u_hat_next);
    Tensor derivative = mul_scalar(sub(u_hat_next, u_hat_t), 1.0 / dt);
    Tensor residual = sub(derivative, node_dynamics_rhs(u_hat_t, u_0, adjacency, p));
    return mean(mul(residual, residual));
}

}  // namespace netresil
