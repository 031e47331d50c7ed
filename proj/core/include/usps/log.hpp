#ifndef USPS_LOG_HPP
#define USPS_LOG_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace usps {

/// Structured run log: one JSON object per event appended to a .jsonl file,
/// plus human-readable progress on stderr.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::filesystem::path& jsonl_path, bool echo_stderr = true);

    void event(const std::string& type, const std::map<std::string, std::string>& fields = {});
    void progress(const std::string& message);

    bool enabled() const { return static_cast<bool>(file_); }

private:
    std::ofstream file_;
    bool echo_ = true;
    int seq_ = 0;
};

}  // namespace usps

#endif
