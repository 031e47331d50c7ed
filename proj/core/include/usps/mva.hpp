#ifndef USPS_MVA_HPP
#define USPS_MVA_HPP

#include <map>
#include <string>

#include "usps/types.hpp"

namespace usps {

/// Per-sample exponential moving average of CRF-smoothed predictions:
/// mva <- (1-alpha) * crf_out + alpha * mva, seeded with the first update.
struct MvaState {
    struct Entry {
        SaliencyMap map;
        int update_count = 0;
    };

    double alpha = 0.7;
    std::map<std::string, Entry> entries;

    bool empty() const { return entries.empty(); }
    void clear() { entries.clear(); }
};

enum class MvaInit : uint8_t {
    first_crf,    // first CRF output seeds the average (default)
    stage_input,  // the stage's input pseudo-label seeds it
};

/// Applies the recurrence for one sample; inserts on first sight.
void update_mva(MvaState& state, const std::string& id, const SaliencyMap& crf_out);

/// Seeds an entry before the first update (used with MvaInit::stage_input).
void seed_mva(MvaState& state, const std::string& id, const SaliencyMap& initial);

/// Threshold every entry's map (strict >) into a pseudo-label mask.
std::map<std::string, BinaryMask> snapshot_labels(const MvaState& state, float threshold = 0.5f);

/// Mean over samples of the mean per-pixel |difference| of the two states.
/// Id sets must match.
double stability_delta(const MvaState& prev, const MvaState& curr);

}  // namespace usps

#endif
