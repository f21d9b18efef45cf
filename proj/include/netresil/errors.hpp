#pragma once

#include <stdexcept>
#include <string>

namespace netresil {

// Numerical failure during integration or training (maps to CLI exit code 2).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct divergence_error : numerical_error {
    divergence_error(double time, std::size_t node)
        : numerical_error("non-finite state at t=" + std::to_string(time) + " node=" +
                          std::to_string(node)),
          time(time),
          node(node) {}
    double time;
    std::size_t node;
};

}  // namespace netresil
