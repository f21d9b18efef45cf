#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace netresil {

using Shape = std::vector<std::size_t>;

namespace detail {

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace detail

// One node of the dynamically built computation graph. Nodes are created in
// forward order; the graph doubles as the tape replayed by backward().
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily, only for tracked nodes
    bool requires_grad = false;
    bool consumed = false;  // backward() already replayed through this node
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void add_grad(std::size_t i, double g) {
        ensure_grad();
        grad[i] += g;
    }
};

// Value-semantics handle onto a graph node; copies alias the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (detail::shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + detail::shape_str(shape));
        auto n = std::make_shared<TensorNode>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> d(detail::shape_numel(shape), 0.0);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        std::vector<double> d(detail::shape_numel(shape), value);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    static Tensor identity(std::size_t n) {
        Tensor t = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = 1.0;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t rows() const { return node_->shape.at(0); }
    std::size_t cols() const { return node_->shape.at(1); }

    const std::vector<double>& values() const { return node_->data; }
    std::vector<double>& mutable_values() { return node_->data; }
    double value() const {
        if (numel() != 1)
            throw std::logic_error("value() called on non-scalar tensor " +
                                   detail::shape_str(shape()));
        return node_->data[0];
    }
    double at(std::size_t i) const { return node_->data.at(i); }
    double at(std::size_t i, std::size_t j) const { return node_->data.at(i * cols() + j); }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    const std::vector<double>& grad() const {
        if (!has_grad()) throw std::logic_error("gradient not populated");
        return node_->grad;
    }
    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
    }

    const char* op() const { return node_->op; }
    std::shared_ptr<TensorNode> node() const { return node_; }
    TensorNode* raw() const { return node_.get(); }

private:
    std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline Tensor make_node(const char* op, Shape shape, std::vector<double> data,
                        std::vector<Tensor> parents,
                        const std::function<void(TensorNode*)>& install_backprop) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = op;
    bool rg = false;
    for (const Tensor& p : parents) rg = rg || p.requires_grad();
    n->requires_grad = rg;
    if (rg) {
        n->parents.reserve(parents.size());
        for (const Tensor& p : parents) n->parents.push_back(p.node());
        install_backprop(n.get());
    }
    return Tensor(std::move(n));
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise operations

namespace detail {

template <typename Fwd, typename DfDa, typename DfDb>
Tensor binary_pointwise(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DfDa dfda,
                        DfDb dfdb) {
    check_same_shape(op, a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.at(i), b.at(i));
    return make_node(op, a.shape(), std::move(out), {a, b}, [=](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        TensorNode* pb = n->parents[1].get();
        n->backprop = [n, pa, pb, dfda, dfdb] {
            for (std::size_t i = 0; i < n->data.size(); ++i) {
                double g = n->grad[i];
                if (g == 0.0) continue;
                if (pa->requires_grad) pa->add_grad(i, g * dfda(pa->data[i], pb->data[i], n->data[i]));
                if (pb->requires_grad) pb->add_grad(i, g * dfdb(pa->data[i], pb->data[i], n->data[i]));
            }
        };
    });
}

template <typename Fwd, typename Df>
Tensor unary_pointwise(const char* op, const Tensor& a, Fwd fwd, Df df) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.at(i));
    return make_node(op, a.shape(), std::move(out), {a}, [=](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, df] {
            for (std::size_t i = 0; i < n->data.size(); ++i) {
                double g = n->grad[i];
                if (g != 0.0) pa->add_grad(i, g * df(pa->data[i], n->data[i]));
            }
        };
    });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

inline Tensor divide(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double x, double y, double) { return -x / (y * y); });
}

inline Tensor relu(const Tensor& a) {
    // subgradient at 0 defined as 0
    return detail::unary_pointwise(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_pointwise(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary_pointwise(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary_pointwise(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
    return detail::unary_pointwise(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor sqrt(const Tensor& a) {
    return detail::unary_pointwise(
        "sqrt", a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
    return detail::unary_pointwise(
        "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    return detail::unary_pointwise(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
    return detail::unary_pointwise(
        "mul_scalar", a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

inline Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

// Broadcast multiply by a scalar tensor (gradient flows to both operands).
inline Tensor smul(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1)
        throw std::invalid_argument("smul: scale must be scalar, got " +
                                    detail::shape_str(s.shape()));
    std::vector<double> out(a.numel());
    double sv = s.at(0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * sv;
    return detail::make_node("smul", a.shape(), std::move(out), {a, s}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        TensorNode* ps = n->parents[1].get();
        n->backprop = [n, pa, ps] {
            double sv = ps->data[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < n->data.size(); ++i) {
                double g = n->grad[i];
                if (pa->requires_grad && g != 0.0) pa->add_grad(i, g * sv);
                acc += g * pa->data[i];
            }
            if (ps->requires_grad) ps->add_grad(0, acc);
        };
    });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: shape mismatch " + detail::shape_str(a.shape()) +
                                    " vs " + detail::shape_str(b.shape()));
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double x = av[i * k + p];
            if (x == 0.0) continue;
            const double* brow = bv.data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
        }
    return detail::make_node("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](TensorNode* nd) {
        TensorNode* pa = nd->parents[0].get();
        TensorNode* pb = nd->parents[1].get();
        nd->backprop = [nd, pa, pb, m, k, n] {
            const auto& g = nd->grad;
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = g.data() + i * n;
                        const double* brow = pb->data.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        pa->grad[i * k + p] += acc;
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        double x = pa->data[i * k + p];
                        if (x == 0.0) continue;
                        const double* grow = g.data() + i * n;
                        double* brow = pb->grad.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) brow[j] += x * grow[j];
                    }
            }
        };
    });
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2)
        throw std::invalid_argument("transpose: expected rank-2, got " +
                                    detail::shape_str(a.shape()));
    std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.at(i, j);
    return detail::make_node("transpose", {c, r}, std::move(out), {a}, [r, c](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, r, c] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) pa->grad[i * c + j] += n->grad[j * r + i];
        };
    });
}

inline Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.numel())
        throw std::invalid_argument("matvec: shape mismatch " + detail::shape_str(w.shape()) +
                                    " vs " + detail::shape_str(x.shape()));
    std::size_t m = w.rows(), k = w.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += w.at(i, p) * x.at(p);
        out[i] = acc;
    }
    return detail::make_node("matvec", {m}, std::move(out), {w, x}, [m, k](TensorNode* n) {
        TensorNode* pw = n->parents[0].get();
        TensorNode* px = n->parents[1].get();
        n->backprop = [n, pw, px, m, k] {
            for (std::size_t i = 0; i < m; ++i) {
                double g = n->grad[i];
                if (g == 0.0) continue;
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    for (std::size_t p = 0; p < k; ++p) pw->grad[i * k + p] += g * px->data[p];
                }
                if (px->requires_grad) {
                    px->ensure_grad();
                    for (std::size_t p = 0; p < k; ++p) px->grad[p] += g * pw->data[i * k + p];
                }
            }
        };
    });
}

inline Tensor dot(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("dot", a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a.at(i) * b.at(i);
    return detail::make_node("dot", {1}, {acc}, {a, b}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        TensorNode* pb = n->parents[1].get();
        n->backprop = [n, pa, pb] {
            double g = n->grad[0];
            if (g == 0.0) return;
            for (std::size_t i = 0; i < pa->data.size(); ++i) {
                if (pa->requires_grad) pa->add_grad(i, g * pb->data[i]);
                if (pb->requires_grad) pb->add_grad(i, g * pa->data[i]);
            }
        };
    });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    return detail::make_node("sum", {1}, {acc}, {a}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa] {
            double g = n->grad[0];
            if (g == 0.0) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g;
        };
    });
}

inline Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    double inv = 1.0 / static_cast<double>(a.numel());
    return detail::make_node("mean", {1}, {acc * inv}, {a}, [inv](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, inv] {
            double g = n->grad[0] * inv;
            if (g == 0.0) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g;
        };
    });
}

// ---------------------------------------------------------------------------
// Softmax / layer norm

namespace detail {

inline void softmax_span(const double* x, double* y, std::size_t n) {
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        z += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= z;
}

inline void softmax_backward_span(const double* y, const double* g, double* gx, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += g[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - s);
}

}  // namespace detail

inline Tensor softmax(const Tensor& v) {
    if (v.rank() != 1 || v.numel() == 0)
        throw std::invalid_argument("softmax: expected non-empty vector, got " +
                                    detail::shape_str(v.shape()));
    std::vector<double> out(v.numel());
    detail::softmax_span(v.values().data(), out.data(), v.numel());
    return detail::make_node("softmax", v.shape(), std::move(out), {v}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa] {
            pa->ensure_grad();
            detail::softmax_backward_span(n->data.data(), n->grad.data(), pa->grad.data(),
                                          n->data.size());
        };
    });
}

inline Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2)
        throw std::invalid_argument("softmax_rows: expected rank-2, got " +
                                    detail::shape_str(x.shape()));
    std::size_t r = x.rows(), c = x.cols();
    if (c == 0) throw std::invalid_argument("softmax_rows: empty rows");
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        detail::softmax_span(x.values().data() + i * c, out.data() + i * c, c);
    return detail::make_node("softmax_rows", x.shape(), std::move(out), {x}, [r, c](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, r, c] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                detail::softmax_backward_span(n->data.data() + i * c, n->grad.data() + i * c,
                                              pa->grad.data() + i * c, c);
        };
    });
}

inline constexpr double kLayerNormEps = 1e-5;

namespace detail {

struct LayerNormSaved {
    std::vector<double> xhat;
    std::vector<double> inv_std;  // one per row
};

inline void layer_norm_rows_forward(const double* x, const double* gain, const double* bias,
                                    double eps, std::size_t r, std::size_t c, double* y,
                                    LayerNormSaved& saved) {
    saved.xhat.resize(r * c);
    saved.inv_std.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = x + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double d = row[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        double e = eps;
        if (var + e <= 0.0) e = kLayerNormEps;  // zero-variance guard
        double inv = 1.0 / std::sqrt(var + e);
        saved.inv_std[i] = inv;
        for (std::size_t j = 0; j < c; ++j) {
            double xh = (row[j] - mu) * inv;
            saved.xhat[i * c + j] = xh;
            y[i * c + j] = xh * gain[j] + bias[j];
        }
    }
}

}  // namespace detail

// Row-wise layer normalization with learnable gain/bias (length = columns).
inline Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                              double eps = kLayerNormEps) {
    if (x.rank() != 2)
        throw std::invalid_argument("layer_norm_rows: expected rank-2, got " +
                                    detail::shape_str(x.shape()));
    std::size_t r = x.rows(), c = x.cols();
    if (gain.numel() != c || bias.numel() != c)
        throw std::invalid_argument("layer_norm_rows: gain/bias length must equal columns");
    std::vector<double> out(r * c);
    auto saved = std::make_shared<detail::LayerNormSaved>();
    detail::layer_norm_rows_forward(x.values().data(), gain.values().data(), bias.values().data(),
                                    eps, r, c, out.data(), *saved);
    return detail::make_node(
        "layer_norm", x.shape(), std::move(out), {x, gain, bias}, [r, c, saved](TensorNode* n) {
            TensorNode* px = n->parents[0].get();
            TensorNode* pg = n->parents[1].get();
            TensorNode* pb = n->parents[2].get();
            n->backprop = [n, px, pg, pb, r, c, saved] {
                double cn = static_cast<double>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    const double* g = n->grad.data() + i * c;
                    const double* xh = saved->xhat.data() + i * c;
                    double inv = saved->inv_std[i];
                    double sum_gg = 0.0, sum_ggx = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        double gg = g[j] * pg->data[j];
                        sum_gg += gg;
                        sum_ggx += gg * xh[j];
                    }
                    for (std::size_t j = 0; j < c; ++j) {
                        double gg = g[j] * pg->data[j];
                        if (px->requires_grad)
                            px->add_grad(i * c + j,
                                         inv * (gg - sum_gg / cn - xh[j] * sum_ggx / cn));
                        if (pg->requires_grad) pg->add_grad(j, g[j] * xh[j]);
                        if (pb->requires_grad) pb->add_grad(j, g[j]);
                    }
                }
            };
        });
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = kLayerNormEps) {
    if (x.rank() != 1)
        throw std::invalid_argument("layer_norm: expected vector, got " +
                                    detail::shape_str(x.shape()));
    // reuse the row-wise kernel on a 1 x d view
    std::size_t d = x.numel();
    Tensor as_row = [&] {
        std::vector<double> copy = x.values();
        return detail::make_node("view", {1, d}, std::move(copy), {x}, [](TensorNode* n) {
            TensorNode* pa = n->parents[0].get();
            n->backprop = [n, pa] {
                pa->ensure_grad();
                for (std::size_t i = 0; i < n->data.size(); ++i) pa->grad[i] += n->grad[i];
            };
        });
    }();
    Tensor y = layer_norm_rows(as_row, gain, bias, eps);
    std::vector<double> copy = y.values();
    return detail::make_node("view", {d}, std::move(copy), {y}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n->data.size(); ++i) pa->grad[i] += n->grad[i];
        };
    });
}

// ---------------------------------------------------------------------------
// Shape surgery

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (detail::shape_numel(shape) != a.numel())
        throw std::invalid_argument("reshape: cannot view " + detail::shape_str(a.shape()) +
                                    " as " + detail::shape_str(shape));
    std::vector<double> copy = a.values();
    return detail::make_node("reshape", std::move(shape), std::move(copy), {a}, [](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n->data.size(); ++i) pa->grad[i] += n->grad[i];
        };
    });
}

inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() > 1)
            throw std::invalid_argument("concat: expected vectors, got " +
                                        detail::shape_str(p.shape()));
        total += p.numel();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return detail::make_node("concat", {total}, std::move(out), parts, [](TensorNode* n) {
        n->backprop = [n] {
            std::size_t off = 0;
            for (auto& p : n->parents) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->data.size(); ++i)
                        p->grad[i] += n->grad[off + i];
                }
                off += p->data.size();
            }
        };
    });
}

inline Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

inline Tensor slice(const Tensor& v, std::size_t start, std::size_t len) {
    if (v.rank() != 1 || start + len > v.numel())
        throw std::invalid_argument("slice: range out of bounds for " +
                                    detail::shape_str(v.shape()));
    std::vector<double> out(v.values().begin() + start, v.values().begin() + start + len);
    return detail::make_node("slice", {len}, std::move(out), {v}, [start](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, start] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n->data.size(); ++i) pa->grad[start + i] += n->grad[i];
        };
    });
}

inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
    std::size_t c = rows[0].numel();
    for (const Tensor& r : rows)
        if (r.rank() != 1 || r.numel() != c)
            throw std::invalid_argument("stack_rows: rows must be equal-length vectors");
    std::vector<double> out;
    out.reserve(rows.size() * c);
    for (const Tensor& r : rows) out.insert(out.end(), r.values().begin(), r.values().end());
    return detail::make_node("stack_rows", {rows.size(), c}, std::move(out), rows,
                             [c](TensorNode* n) {
                                 n->backprop = [n, c] {
                                     for (std::size_t r = 0; r < n->parents.size(); ++r) {
                                         auto& p = n->parents[r];
                                         if (!p->requires_grad) continue;
                                         p->ensure_grad();
                                         for (std::size_t j = 0; j < c; ++j)
                                             p->grad[j] += n->grad[r * c + j];
                                     }
                                 };
                             });
}

inline Tensor row(const Tensor& x, std::size_t i) {
    if (x.rank() != 2 || i >= x.rows())
        throw std::invalid_argument("row: index out of range for " +
                                    detail::shape_str(x.shape()));
    std::size_t c = x.cols();
    std::vector<double> out(x.values().begin() + i * c, x.values().begin() + (i + 1) * c);
    return detail::make_node("row", {c}, std::move(out), {x}, [i, c](TensorNode* n) {
        TensorNode* pa = n->parents[0].get();
        n->backprop = [n, pa, i, c] {
            pa->ensure_grad();
            for (std::size_t j = 0; j < c; ++j) pa->grad[i * c + j] += n->grad[j];
        };
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.rows() != r)
            throw std::invalid_argument("concat_cols: row counts differ");
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::size_t c = p.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * total + off + j] = p.at(i, j);
        off += c;
    }
    return detail::make_node("concat_cols", {r, total}, std::move(out), parts,
                             [r, total](TensorNode* n) {
                                 n->backprop = [n, r, total] {
                                     std::size_t off = 0;
                                     for (auto& p : n->parents) {
                                         std::size_t c = p->shape[1];
                                         if (p->requires_grad) {
                                             p->ensure_grad();
                                             for (std::size_t i = 0; i < r; ++i)
                                                 for (std::size_t j = 0; j < c; ++j)
                                                     p->grad[i * c + j] +=
                                                         n->grad[i * total + off + j];
                                         }
                                         off += c;
                                     }
                                 };
                             });
}

// Differentiable pick of arbitrary flat positions (scatter-add backward).
inline Tensor gather(const Tensor& x, const std::vector<std::size_t>& flat_indices) {
    std::vector<double> out(flat_indices.size());
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
        if (flat_indices[i] >= x.numel())
            throw std::invalid_argument("gather: index out of range for " +
                                        detail::shape_str(x.shape()));
        out[i] = x.at(flat_indices[i]);
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(flat_indices);
    return detail::make_node("gather", {flat_indices.size()}, std::move(out), {x},
                             [idx](TensorNode* n) {
                                 TensorNode* pa = n->parents[0].get();
                                 n->backprop = [n, pa, idx] {
                                     pa->ensure_grad();
                                     for (std::size_t i = 0; i < idx->size(); ++i)
                                         pa->grad[(*idx)[i]] += n->grad[i];
                                 };
                             });
}

// ---------------------------------------------------------------------------
// Row/column broadcasts

inline Tensor scale_rows(const Tensor& x, const Tensor& v) {
    if (x.rank() != 2 || v.rank() != 1 || v.numel() != x.rows())
        throw std::invalid_argument("scale_rows: shape mismatch " + detail::shape_str(x.shape()) +
                                    " vs " + detail::shape_str(v.shape()));
    std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) * v.at(i);
    return detail::make_node("scale_rows", x.shape(), std::move(out), {x, v},
                             [r, c](TensorNode* n) {
                                 TensorNode* px = n->parents[0].get();
                                 TensorNode* pv = n->parents[1].get();
                                 n->backprop = [n, px, pv, r, c] {
                                     for (std::size_t i = 0; i < r; ++i) {
                                         double acc = 0.0;
                                         for (std::size_t j = 0; j < c; ++j) {
                                             double g = n->grad[i * c + j];
                                             if (px->requires_grad && g != 0.0)
                                                 px->add_grad(i * c + j, g * pv->data[i]);
                                             acc += g * px->data[i * c + j];
                                         }
                                         if (pv->requires_grad) pv->add_grad(i, acc);
                                     }
                                 };
                             });
}

inline Tensor scale_cols(const Tensor& x, const Tensor& v) {
    if (x.rank() != 2 || v.rank() != 1 || v.numel() != x.cols())
        throw std::invalid_argument("scale_cols: shape mismatch " + detail::shape_str(x.shape()) +
                                    " vs " + detail::shape_str(v.shape()));
    std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) * v.at(j);
    return detail::make_node("scale_cols", x.shape(), std::move(out), {x, v},
                             [r, c](TensorNode* n) {
                                 TensorNode* px = n->parents[0].get();
                                 TensorNode* pv = n->parents[1].get();
                                 n->backprop = [n, px, pv, r, c] {
                                     for (std::size_t j = 0; j < c; ++j) {
                                         double acc = 0.0;
                                         for (std::size_t i = 0; i < r; ++i) {
                                             double g = n->grad[i * c + j];
                                             if (px->requires_grad && g != 0.0)
                                                 px->add_grad(i * c + j, g * pv->data[j]);
                                             acc += g * px->data[i * c + j];
                                         }
                                         if (pv->requires_grad) pv->add_grad(j, acc);
                                     }
                                 };
                             });
}

inline Tensor add_row_vector(const Tensor& x, const Tensor& b) {
    if (x.rank() != 2 || b.rank() != 1 || b.numel() != x.cols())
        throw std::invalid_argument("add_row_vector: shape mismatch " +
                                    detail::shape_str(x.shape()) + " vs " +
                                    detail::shape_str(b.shape()));
    std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) + b.at(j);
    return detail::make_node("add_row_vector", x.shape(), std::move(out), {x, b},
                             [r, c](TensorNode* n) {
                                 TensorNode* px = n->parents[0].get();
                                 TensorNode* pb = n->parents[1].get();
                                 n->backprop = [n, px, pb, r, c] {
                                     for (std::size_t i = 0; i < r; ++i)
                                         for (std::size_t j = 0; j < c; ++j) {
                                             double g = n->grad[i * c + j];
                                             if (g == 0.0) continue;
                                             if (px->requires_grad) px->add_grad(i * c + j, g);
                                             if (pb->requires_grad) pb->add_grad(j, g);
                                         }
                                 };
                             });
}

inline Tensor repeat_rows_each(const Tensor& x, std::size_t times) {
    if (x.rank() != 2) throw std::invalid_argument("repeat_rows_each: expected rank-2");
    std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * times * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t t = 0; t < times; ++t)
            std::copy_n(x.values().data() + i * c, c, out.data() + (i * times + t) * c);
    return detail::make_node("repeat_rows_each", {r * times, c}, std::move(out), {x},
                             [r, c, times](TensorNode* n) {
                                 TensorNode* pa = n->parents[0].get();
                                 n->backprop = [n, pa, r, c, times] {
                                     pa->ensure_grad();
                                     for (std::size_t i = 0; i < r; ++i)
                                         for (std::size_t t = 0; t < times; ++t)
                                             for (std::size_t j = 0; j < c; ++j)
                                                 pa->grad[i * c + j] +=
                                                     n->grad[(i * times + t) * c + j];
                                 };
                             });
}

inline Tensor tile_rows(const Tensor& x, std::size_t times) {
    if (x.rank() != 2) throw std::invalid_argument("tile_rows: expected rank-2");
    std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * times * c);
    for (std::size_t t = 0; t < times; ++t)
        std::copy_n(x.values().data(), r * c, out.data() + t * r * c);
    return detail::make_node("tile_rows", {r * times, c}, std::move(out), {x},
                             [r, c, times](TensorNode* n) {
                                 TensorNode* pa = n->parents[0].get();
                                 n->backprop = [n, pa, r, c, times] {
                                     pa->ensure_grad();
                                     for (std::size_t t = 0; t < times; ++t)
                                         for (std::size_t i = 0; i < r * c; ++i)
                                             pa->grad[i] += n->grad[t * r * c + i];
                                 };
                             });
}

// ---------------------------------------------------------------------------
// Backward pass

// Topologically ordered replay record, rebuilt per backward pass from the
// dynamically constructed graph.
struct ComputationTape {
    std::vector<TensorNode*> order;  // parents before children

    static ComputationTape build(TensorNode* root) {
        ComputationTape tape;
        tape.order = topo_order(root);
        return tape;
    }

private:
    static std::vector<TensorNode*> topo_order(TensorNode* root);
};

namespace detail {

struct VisitSet {
    // pointer set with amortised O(1) insert/find
    std::vector<TensorNode*> table;
    std::size_t mask = 0;
    std::size_t count = 0;

    explicit VisitSet(std::size_t expected = 1024) {
        std::size_t cap = 64;
        while (cap < expected * 2) cap <<= 1;
        table.assign(cap, nullptr);
        mask = cap - 1;
    }
    bool insert(TensorNode* p) {
        if ((count + 1) * 2 > table.size()) grow();
        std::size_t h = (reinterpret_cast<std::size_t>(p) >> 4) & mask;
        while (table[h] != nullptr) {
            if (table[h] == p) return false;
            h = (h + 1) & mask;
        }
        table[h] = p;
        ++count;
        return true;
    }
    void grow() {
        std::vector<TensorNode*> old = std::move(table);
        table.assign(old.size() * 2, nullptr);
        mask = table.size() - 1;
        count = 0;
        for (TensorNode* p : old)
            if (p) insert(p);
    }
};

}  // namespace detail

inline std::vector<TensorNode*> ComputationTape::topo_order(TensorNode* root) {
    std::vector<TensorNode*> order;
    detail::VisitSet visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    if (visited.insert(root)) stack.emplace_back(root, 0);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p)) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // parents before children
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively on
// every requires_grad ancestor; the tape is consumed (a second call throws).
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    detail::shape_str(loss.shape()));
    TensorNode* root = loss.raw();
    if (root->consumed) throw std::logic_error("backward: tape already consumed");
    if (!root->requires_grad) {
        root->consumed = true;
        return;  // nothing tracks gradients
    }
    ComputationTape tape = ComputationTape::build(root);
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        TensorNode* n = *it;
        n->ensure_grad();
        if (n->backprop) {
            n->backprop();
            n->backprop = nullptr;
        }
        n->consumed = true;
    }
}

}  // namespace netresil
