#ifndef USPS_UTIL_HPP
#define USPS_UTIL_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace usps {

inline float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

/// FNV-1a 64-bit; used for content hashes in run manifests.
uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s);
std::string hex64(uint64_t v);

uint64_t hash_file(const std::filesystem::path& p);

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string read_text_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& content);

/// Mean/stddev over doubles; sequential accumulation, fixed order.
double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);

/// Spearman rank correlation (average ranks on ties).
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace usps

#endif
