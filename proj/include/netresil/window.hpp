#pragma once

#include <stdexcept>
#include <vector>

#include "netresil/dataset.hpp"
#include "netresil/graph.hpp"
#include "netresil/tensor.hpp"

namespace netresil {

// A training/inference view over T consecutive snapshots plus the following
// target snapshot. State and normalized-adjacency tensors are constants
// (no gradient tracking), built once and reused across epochs.
struct Window {
    std::size_t start = 0;
    std::size_t length = 0;                // T
    std::size_t target_index = 0;          // start + length
    std::vector<const Graph*> graphs;      // per step
    std::vector<Tensor> states;            // per step, N x M
    std::vector<Tensor> sym_adj;           // per step, N x N
    std::vector<double> times;             // length + 1, includes target time

    std::size_t nodes() const { return states.empty() ? 0 : states[0].rows(); }
    std::size_t feature_dim() const { return states.empty() ? 0 : states[0].cols(); }
};

inline Window make_window(const TemporalGraphDataset& ds, std::size_t start, std::size_t length) {
    if (length < 1 || start + length >= ds.horizon())
        throw std::invalid_argument("make_window: dataset needs at least T+1 snapshots");
    Window w;
    w.start = start;
    w.length = length;
    w.target_index = start + length;
    for (std::size_t k = 0; k < length; ++k) {
        const Snapshot& s = ds.snapshots[start + k];
        w.graphs.push_back(&s.graph);
        w.states.push_back(Tensor::from_data({s.states.rows, s.states.cols}, s.states.v));
        LaplacianBundle b = laplacian(s.graph);
        w.sym_adj.push_back(Tensor::from_data({b.n, b.n}, std::move(b.sym_norm_adjacency.v)));
        w.times.push_back(s.time);
    }
    w.times.push_back(ds.snapshots[w.target_index].time);
    return w;
}

// Last window of the dataset, the default single-window training regime.
inline Window make_tail_window(const TemporalGraphDataset& ds, std::size_t length) {
    if (ds.horizon() < length + 1)
        throw std::invalid_argument("make_tail_window: dataset has " +
                                    std::to_string(ds.horizon()) + " snapshots, needs " +
                                    std::to_string(length + 1));
    return make_window(ds, ds.horizon() - length - 1, length);
}

}  // namespace netresil
