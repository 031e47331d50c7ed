#include "usps/mva.hpp"

#include <cmath>

#include "usps/transforms.hpp"

namespace usps {

void update_mva(MvaState& state, const std::string& id, const SaliencyMap& crf_out) {
    auto it = state.entries.find(id);
    if (it == state.entries.end()) {
        MvaState::Entry e;
        e.map = crf_out;
        e.map.source = MapSource::mva;
        e.update_count = 1;
        state.entries.emplace(id, std::move(e));
        return;
    }
    MvaState::Entry& e = it->second;
    if (e.map.width != crf_out.width || e.map.height != crf_out.height)
        throw InvalidArgumentError("update_mva: dimension mismatch for sample '" + id + "'");
    const float a = static_cast<float>(state.alpha);
    const float b = 1.f - a;
    for (size_t i = 0; i < e.map.values.size(); ++i)
        e.map.values[i] = b * crf_out.values[i] + a * e.map.values[i];
    e.update_count += 1;
}

void seed_mva(MvaState& state, const std::string& id, const SaliencyMap& initial) {
    MvaState::Entry e;
    e.map = initial;
    e.map.source = MapSource::mva;
    e.update_count = 1;
    state.entries.insert_or_assign(id, std::move(e));
}

std::map<std::string, BinaryMask> snapshot_labels(const MvaState& state, float threshold) {
    if (state.empty()) throw InvalidArgumentError("snapshot_labels: empty MVA state");
    std::map<std::string, BinaryMask> out;
    for (const auto& [id, entry] : state.entries)
        out.emplace(id, threshold_mask(entry.map, threshold));
    return out;
}

double stability_delta(const MvaState& prev, const MvaState& curr) {
    if (prev.entries.size() != curr.entries.size())
        throw InvalidArgumentError("stability_delta: id sets differ in size");
    double total = 0.0;
    auto pit = prev.entries.begin();
    auto cit = curr.entries.begin();
    for (; pit != prev.entries.end(); ++pit, ++cit) {
        if (pit->first != cit->first)
            throw InvalidArgumentError("stability_delta: id sets differ ('" + pit->first + "' vs '" +
                                       cit->first + "')");
        const auto& a = pit->second.map;
        const auto& b = cit->second.map;
        if (a.values.size() != b.values.size())
            throw InvalidArgumentError("stability_delta: dimension mismatch for '" + pit->first + "'");
        double s = 0.0;
        for (size_t i = 0; i < a.values.size(); ++i)
            s += std::abs(static_cast<double>(a.values[i]) - b.values[i]);
        total += s / static_cast<double>(a.values.size());
    }
    return total / static_cast<double>(prev.entries.size());
}

}  // namespace usps
