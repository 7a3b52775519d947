#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace shardsim::sim {

// Append-only JSON-lines run log: one event or decision per line. Kept
// vendor-free at the interface; lines are serialized JSON strings.
class Transcript {
  public:
    Transcript() = default;

    void open_file(const std::string& path);  // throws Error on failure
    void set_keep_in_memory(bool keep) { keep_in_memory_ = keep; }

    void emit(std::string line);

    const std::vector<std::string>& lines() const { return lines_; }
    size_t count() const { return count_; }

    static std::vector<std::string> read_file(const std::string& path);

  private:
    bool keep_in_memory_ = true;
    size_t count_ = 0;
    std::vector<std::string> lines_;
    std::ofstream file_;
};

}  // namespace shardsim::sim
