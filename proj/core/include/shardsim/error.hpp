#pragma once

#include <stdexcept>
#include <string>

namespace shardsim {

// Thrown on contract violations (bad arguments, invalid state transitions).
// Recoverable conditions are reported as data, not exceptions.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shardsim
