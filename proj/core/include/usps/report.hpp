#ifndef USPS_REPORT_HPP
#define USPS_REPORT_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "usps/evalsuite.hpp"
#include "usps/types.hpp"

namespace usps {

/// Per-method label-quality trajectory across pipeline stages.
struct CurveSeries {
    std::string method;
    std::vector<MetricsRow> stages;  // index 0 = handcrafted, then stage A, iterations
};

/// Per-image metric pairs of two models (x vs y).
struct ScatterData {
    std::string x_name;
    std::string y_name;
    std::vector<std::tuple<std::string, double, double>> points;  // id, x, y
};

struct FailureCase {
    std::string id;
    double mae = 0.0;
    Image image;
    BinaryMask gt;
    SaliencyMap pred;
};

struct ReportFiles {
    std::vector<std::filesystem::path> written;
};

/// Writes report.md, metrics.json, curves.svg (when curves exist),
/// scatter.svg (when scatter data exists) and failures/<rank>_<id>.png for
/// the worst-k cases.
ReportFiles emit_report(const MetricsReport& report, const std::vector<CurveSeries>& curves,
                        const std::optional<ScatterData>& scatter,
                        std::vector<FailureCase> failures, const std::filesystem::path& out_dir,
                        int worst_k = 8);

/// Machine-readable dump used by both emit_report and the evaluate command.
std::string metrics_to_json(const MetricsReport& report, const std::vector<CurveSeries>& curves,
                            const std::optional<ScatterData>& scatter);

}  // namespace usps

#endif
