#include "usps/log.hpp"

#include <nlohmann/json.hpp>

#include <iostream>

namespace usps {

RunLog::RunLog(const std::filesystem::path& jsonl_path, bool echo_stderr) : echo_(echo_stderr) {
    if (jsonl_path.has_parent_path()) std::filesystem::create_directories(jsonl_path.parent_path());
    file_.open(jsonl_path, std::ios::app);
}

void RunLog::event(const std::string& type, const std::map<std::string, std::string>& fields) {
    if (!file_) return;
    nlohmann::json j;
    j["seq"] = seq_++;
    j["event"] = type;
    for (const auto& [k, v] : fields) j[k] = v;
    file_ << j.dump() << "\n";
    file_.flush();
}

void RunLog::progress(const std::string& message) {
    if (echo_) std::cerr << message << std::endl;
}

}  // namespace usps
