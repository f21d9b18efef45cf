#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "netresil/rng.hpp"
#include "netresil/tensor.hpp"

namespace netresil {

enum class Init { Xavier, Zeros, Ones };

// Named trainable tensors in creation order. Creation order drives the init
// stream, so model construction is deterministic per seed; acquire() re-binds
// to values loaded from a checkpoint.
class ParamStore {
public:
    Tensor acquire(const std::string& name, Shape shape, Init init, Rng& rng) {
        auto it = index_.find(name);
        if (it != index_.end()) {
            Tensor& t = items_[it->second].second;
            if (t.shape() != shape)
                throw std::invalid_argument("param " + name + " has shape " +
                                            detail::shape_str(t.shape()) + ", expected " +
                                            detail::shape_str(shape));
            consume_init(shape, init, rng);  // keep the stream aligned with fresh construction
            return t;
        }
        Tensor t = Tensor::from_data(shape, init_values(shape, init, rng), true);
        index_[name] = items_.size();
        items_.emplace_back(name, t);
        return t;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown param: " + name);
        return items_[it->second].second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(items_.size());
        for (const auto& [n, t] : items_) out.push_back(n);
        return out;
    }

    std::size_t size() const { return items_.size(); }
    const std::pair<std::string, Tensor>& item(std::size_t i) const { return items_[i]; }

    std::size_t parameter_count() const {
        std::size_t c = 0;
        for (const auto& [n, t] : items_) c += t.numel();
        return c;
    }

    void zero_grads() {
        for (auto& [n, t] : items_) t.zero_grad();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [name, t] : items_) {
            nlohmann::ordered_json p;
            p["shape"] = t.shape();
            p["data"] = t.values();
            j[name] = std::move(p);
        }
        return j;
    }

    // Preload values; later acquire() calls bind to these tensors.
    void load_json(const nlohmann::json& j) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            Shape shape = it.value().at("shape").get<Shape>();
            std::vector<double> data = it.value().at("data").get<std::vector<double>>();
            Tensor t = Tensor::from_data(std::move(shape), std::move(data), true);
            auto found = index_.find(it.key());
            if (found != index_.end()) {
                items_[found->second].second = t;
            } else {
                index_[it.key()] = items_.size();
                items_.emplace_back(it.key(), t);
            }
        }
    }

private:
    static std::vector<double> init_values(const Shape& shape, Init init, Rng& rng) {
        std::size_t n = detail::shape_numel(shape);
        std::vector<double> v(n, init == Init::Ones ? 1.0 : 0.0);
        if (init == Init::Xavier) {
            double fan_in = static_cast<double>(shape.size() >= 2 ? shape[0] : 1);
            double fan_out = static_cast<double>(shape.size() >= 2 ? shape[1] : shape[0]);
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& x : v) x = rng.uniform(-bound, bound);
        }
        return v;
    }

    static void consume_init(const Shape& shape, Init init, Rng& rng) {
        if (init != Init::Xavier) return;
        for (std::size_t i = 0; i < detail::shape_numel(shape); ++i) rng.uniform01();
    }

    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace netresil
