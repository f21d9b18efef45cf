#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netresil/graph.hpp"
#include "netresil/matrix.hpp"
#include "netresil/rng.hpp"

namespace netresil {

using ordered_json = nlohmann::ordered_json;

// Dynamics family identity plus its scalar parameters; stored in dataset
// metadata so simulations are reproducible from disk.
struct DynamicsDescriptor {
    std::string id = "mutualistic";
    std::map<std::string, double> params;  // ordered => deterministic JSON

    ordered_json to_json() const {
        ordered_json j;
        j["id"] = id;
        ordered_json p = ordered_json::object();
        for (const auto& [k, v] : params) p[k] = v;
        j["params"] = p;
        return j;
    }

    static DynamicsDescriptor from_json(const nlohmann::json& j) {
        DynamicsDescriptor d;
        d.id = j.at("id").get<std::string>();
        if (j.contains("params"))
            for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
                d.params[it.key()] = it.value().get<double>();
        return d;
    }
};

struct Snapshot {
    double time = 0.0;
    Graph graph;
    Matrix states;  // N x M
};

// Time-ordered sequence of (graph, node states) snapshots.
class TemporalGraphDataset {
public:
    std::string name;
    std::size_t n_nodes = 0;
    std::size_t feature_dim = 0;
    std::string generator;
    std::uint64_t seed = 0;
    DynamicsDescriptor dynamics;
    std::vector<Snapshot> snapshots;

    std::size_t horizon() const { return snapshots.size(); }

    std::vector<double> timestamps() const {
        std::vector<double> t;
        t.reserve(snapshots.size());
        for (const auto& s : snapshots) t.push_back(s.time);
        return t;
    }

    bool regular_timestamps(double rel_tol = 1e-9) const {
        if (snapshots.size() < 3) return true;
        double step = snapshots[1].time - snapshots[0].time;
        for (std::size_t k = 2; k < snapshots.size(); ++k) {
            double d = snapshots[k].time - snapshots[k - 1].time;
            if (std::abs(d - step) > rel_tol * std::max(1.0, std::abs(step))) return false;
        }
        return true;
    }

    void validate() const {
        if (snapshots.empty()) throw std::invalid_argument("dataset: no snapshots");
        double prev = -std::numeric_limits<double>::infinity();
        for (const auto& s : snapshots) {
            if (s.graph.size() != n_nodes || s.states.rows != n_nodes ||
                s.states.cols != feature_dim)
                throw std::invalid_argument("dataset: snapshot shape mismatch");
            if (!(s.time > prev))
                throw std::invalid_argument("dataset: timestamps must be strictly increasing");
            if (!s.states.all_finite())
                throw std::invalid_argument("dataset: non-finite state entries");
            prev = s.time;
        }
    }
};

using EdgePair = std::pair<std::size_t, std::size_t>;

struct EdgeSplit {
    std::vector<EdgePair> train;
    std::vector<EdgePair> test;
};

// Disjoint, exhaustive partition of a graph's edge set via a seeded shuffle.
inline EdgeSplit split_edges(const Graph& g, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split_edges: ratio must be in (0,1)");
    std::vector<EdgePair> pairs;
    for (const Edge& e : g.edges()) pairs.emplace_back(e.i, e.j);
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pairs.size())));
    if (pairs.size() < 2 || n_train == 0 || n_train == pairs.size())
        throw std::invalid_argument("split_edges: too few edges to split (" +
                                    std::to_string(pairs.size()) + ")");
    Rng rng = derive_rng(seed, "split");
    rng.shuffle(pairs);
    EdgeSplit s;
    s.train.assign(pairs.begin(), pairs.begin() + n_train);
    s.test.assign(pairs.begin() + n_train, pairs.end());
    return s;
}

// Partition of the edge set at the final snapshot (the prediction target).
inline EdgeSplit split(const TemporalGraphDataset& ds, double ratio, std::uint64_t seed) {
    if (ds.snapshots.empty()) throw std::invalid_argument("split: empty dataset");
    return split_edges(ds.snapshots.back().graph, ratio, seed);
}

// ---------------------------------------------------------------------------
// On-disk directory format: meta.json + snapshots.jsonl

inline void save_dataset(const TemporalGraphDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ordered_json meta;
    meta["name"] = ds.name;
    meta["n_nodes"] = ds.n_nodes;
    meta["feature_dim"] = ds.feature_dim;
    meta["horizon"] = ds.horizon();
    meta["generator"] = ds.generator;
    meta["seed"] = ds.seed;
    meta["dynamics"] = ds.dynamics.to_json();
    meta["timestamps"] = ds.timestamps();
    {
        std::ofstream f(dir / "meta.json", std::ios::binary);
        if (!f) throw std::runtime_error("save_dataset: cannot write " + (dir / "meta.json").string());
        f << meta.dump(2) << '\n';
    }
    std::ofstream f(dir / "snapshots.jsonl", std::ios::binary);
    if (!f)
        throw std::runtime_error("save_dataset: cannot write " + (dir / "snapshots.jsonl").string());
    for (std::size_t k = 0; k < ds.snapshots.size(); ++k) {
        const Snapshot& s = ds.snapshots[k];
        ordered_json line;
        line["t"] = k;
        ordered_json edges = ordered_json::array();
        for (const Edge& e : s.graph.edges()) edges.push_back({e.i, e.j, e.w});
        line["edges"] = std::move(edges);
        ordered_json states = ordered_json::array();
        for (std::size_t i = 0; i < s.states.rows; ++i) {
            ordered_json rowv = ordered_json::array();
            for (std::size_t m = 0; m < s.states.cols; ++m) rowv.push_back(s.states.at(i, m));
            states.push_back(std::move(rowv));
        }
        line["states"] = std::move(states);
        f << line.dump() << '\n';
    }
}

inline TemporalGraphDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "meta.json");
    if (!mf) throw std::runtime_error("load_dataset: cannot open " + (dir / "meta.json").string());
    nlohmann::json meta = nlohmann::json::parse(mf);

    TemporalGraphDataset ds;
    ds.name = meta.at("name").get<std::string>();
    ds.n_nodes = meta.at("n_nodes").get<std::size_t>();
    ds.feature_dim = meta.at("feature_dim").get<std::size_t>();
    ds.generator = meta.at("generator").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.dynamics = DynamicsDescriptor::from_json(meta.at("dynamics"));
    std::vector<double> times = meta.at("timestamps").get<std::vector<double>>();

    std::ifstream sf(dir / "snapshots.jsonl");
    if (!sf)
        throw std::runtime_error("load_dataset: cannot open " + (dir / "snapshots.jsonl").string());
    std::string linebuf;
    while (std::getline(sf, linebuf)) {
        if (linebuf.empty()) continue;
        nlohmann::json line = nlohmann::json::parse(linebuf);
        Snapshot s;
        std::size_t k = line.at("t").get<std::size_t>();
        if (k >= times.size()) throw std::runtime_error("load_dataset: snapshot index out of range");
        s.time = times[k];
        s.graph = Graph(ds.n_nodes);
        for (const auto& e : line.at("edges"))
            s.graph.set_edge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(),
                             e.at(2).get<double>());
        s.states = Matrix(ds.n_nodes, ds.feature_dim);
        const auto& st = line.at("states");
        for (std::size_t i = 0; i < ds.n_nodes; ++i)
            for (std::size_t m = 0; m < ds.feature_dim; ++m)
                s.states.at(i, m) = st.at(i).at(m).get<double>();
        ds.snapshots.push_back(std::move(s));
    }
    std::size_t expected = meta.at("horizon").get<std::size_t>();
    if (ds.snapshots.size() != expected)
        throw std::runtime_error("load_dataset: snapshot count " +
                                 std::to_string(ds.snapshots.size()) + " != horizon " +
                                 std::to_string(expected));
    ds.validate();
    return ds;
}

}  // namespace netresil
