#include "shardsim/transcript.hpp"

#include "shardsim/error.hpp"

namespace shardsim::sim {

void Transcript::open_file(const std::string& path) {
    file_.open(path, std::ios::out | std::ios::trunc);
    if (!file_) throw Error("transcript: cannot open " + path);
}

void Transcript::emit(std::string line) {
    ++count_;
    if (file_.is_open()) file_ << line << '\n';
    if (keep_in_memory_) lines_.push_back(std::move(line));
}

std::vector<std::string> Transcript::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("transcript: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(std::move(line));
        line.clear();
    }
    if (in.bad()) throw Error("transcript: read error on " + path);
    return lines;
}

}  // namespace shardsim::sim
