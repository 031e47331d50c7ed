#include "usps/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace usps {

int default_superpixel_count(int width, int height) {
    const long long n = static_cast<long long>(width) * height;
    const int k = static_cast<int>(std::llround(static_cast<double>(n) / 1000.0));
    return std::clamp(k, 16, 400);
}

float region_color_distance(const SuperpixelRegion& a, const SuperpixelRegion& b) {
    const float dl = a.lab_l - b.lab_l;
    const float da = a.lab_a - b.lab_a;
    const float db = a.lab_b - b.lab_b;
    return std::sqrt(dl * dl + da * da + db * db);
}

namespace {

struct Cluster {
    double l = 0, a = 0, b = 0, x = 0, y = 0;
};

}  // namespace

SuperpixelSegmentation segment_superpixels(const Image& image, int K, double compactness) {
    const int w = image.width, h = image.height;
    const long long n = static_cast<long long>(w) * h;
    if (K < 4 || static_cast<long long>(K) > n / 16)
        throw InvalidArgumentError("segment_superpixels: K out of range [4, w*h/16]");

    const LabImage lab = image_to_lab(image);

    // grid seeding; nx*ny <= K so the final region count stays <= K
    int nx = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(K) * w / h))));
    nx = std::min(nx, K);
    int ny = std::max(1, K / nx);
    while (nx * ny > K) --ny;

    std::vector<Cluster> clusters;
    clusters.reserve(static_cast<size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            Cluster c;
            c.x = (i + 0.5) * w / nx;
            c.y = (j + 0.5) * h / ny;
            const int px = std::min(static_cast<int>(c.x), w - 1);
            const int py = std::min(static_cast<int>(c.y), h - 1);
            const size_t idx = static_cast<size_t>(py) * w + px;
            c.l = lab.L[idx];
            c.a = lab.a[idx];
            c.b = lab.b[idx];
            clusters.push_back(c);
        }
    }

    const double S = std::sqrt(static_cast<double>(n) / clusters.size());
    const double spatial_w = (compactness * compactness) / (S * S);
    const int search = static_cast<int>(std::ceil(2.0 * S));

    std::vector<int> labels(static_cast<size_t>(n), -1);
    std::vector<double> best(static_cast<size_t>(n), std::numeric_limits<double>::max());

    for (int iter = 0; iter < 10; ++iter) {
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::max());
        for (size_t ci = 0; ci < clusters.size(); ++ci) {
            const Cluster& c = clusters[ci];
            const int x0 = std::max(0, static_cast<int>(c.x) - search);
            const int x1 = std::min(w - 1, static_cast<int>(c.x) + search);
            const int y0 = std::max(0, static_cast<int>(c.y) - search);
            const int y1 = std::min(h - 1, static_cast<int>(c.y) + search);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const size_t idx = static_cast<size_t>(y) * w + x;
                    const double dl = lab.L[idx] - c.l;
                    const double da = lab.a[idx] - c.a;
                    const double db = lab.b[idx] - c.b;
                    const double dx = (x + 0.5) - c.x;
                    const double dy = (y + 0.5) - c.y;
                    const double d = dl * dl + da * da + db * db + spatial_w * (dx * dx + dy * dy);
                    if (d < best[idx]) {
                        best[idx] = d;
                        labels[idx] = static_cast<int>(ci);
                    }
                }
            }
        }
        // recompute cluster means
        std::vector<Cluster> sums(clusters.size());
        std::vector<int> counts(clusters.size(), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t idx = static_cast<size_t>(y) * w + x;
                const int li = labels[idx];
                if (li < 0) continue;
                sums[li].l += lab.L[idx];
                sums[li].a += lab.a[idx];
                sums[li].b += lab.b[idx];
                sums[li].x += x + 0.5;
                sums[li].y += y + 0.5;
                counts[li] += 1;
            }
        }
        for (size_t ci = 0; ci < clusters.size(); ++ci) {
            if (counts[ci] == 0) continue;  // keep stale center
            const double inv = 1.0 / counts[ci];
            clusters[ci] = {sums[ci].l * inv, sums[ci].a * inv, sums[ci].b * inv,
                            sums[ci].x * inv, sums[ci].y * inv};
        }
    }

    // any pixel missed by every search window joins its left/top neighbor
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            if (labels[idx] < 0) labels[idx] = x > 0 ? labels[idx - 1] : (y > 0 ? labels[idx - w] : 0);
        }

    // connectivity: components per label, raster order; only the largest
    // component keeps its label, fragments merge into the first-seen neighbor
    std::vector<int> comp(static_cast<size_t>(n), -1);
    struct CompInfo {
        int label;
        int size;
        size_t first_pixel;
        int neighbor_comp;  // first distinct component seen adjacent
    };
    std::vector<CompInfo> comps;
    std::deque<size_t> queue;
    for (size_t start = 0; start < static_cast<size_t>(n); ++start) {
        if (comp[start] >= 0) continue;
        const int cid = static_cast<int>(comps.size());
        const int lbl = labels[start];
        comps.push_back({lbl, 0, start, -1});
        comp[start] = cid;
        queue.clear();
        queue.push_back(start);
        while (!queue.empty()) {
            const size_t p = queue.front();
            queue.pop_front();
            comps[cid].size += 1;
            const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
            const int nbs[4][2] = {{y, x - 1}, {y - 1, x}, {y, x + 1}, {y + 1, x}};
            for (const auto& nb : nbs) {
                if (nb[0] < 0 || nb[0] >= h || nb[1] < 0 || nb[1] >= w) continue;
                const size_t q = static_cast<size_t>(nb[0]) * w + nb[1];
                if (labels[q] == lbl) {
                    if (comp[q] < 0) {
                        comp[q] = cid;
                        queue.push_back(q);
                    }
                } else if (comps[cid].neighbor_comp < 0 && comp[q] >= 0) {
                    comps[cid].neighbor_comp = comp[q];
                }
            }
        }
    }

    // pick the largest component per label (ties: earliest)
    std::vector<int> main_comp_of_label(clusters.size(), -1);
    for (int cid = 0; cid < static_cast<int>(comps.size()); ++cid) {
        const int lbl = comps[cid].label;
        const int cur = main_comp_of_label[lbl];
        if (cur < 0 || comps[cid].size > comps[cur].size) main_comp_of_label[lbl] = cid;
    }
    // resolve merge target per component (follow chains into surviving comps)
    std::vector<int> target(comps.size());
    for (int cid = 0; cid < static_cast<int>(comps.size()); ++cid)
        target[cid] = main_comp_of_label[comps[cid].label] == cid ? cid
                      : comps[cid].neighbor_comp >= 0              ? comps[cid].neighbor_comp
                                                                   : cid;
    for (int cid = 0; cid < static_cast<int>(comps.size()); ++cid) {
        int t = cid;
        for (int hops = 0; hops < static_cast<int>(comps.size()); ++hops) {
            if (target[t] == t) break;
            t = target[t];
        }
        target[cid] = t;
    }

    // compact final region ids in raster order of first occurrence
    std::vector<int> final_id(comps.size(), -1);
    int next_id = 0;
    std::vector<int> out_labels(static_cast<size_t>(n));
    for (size_t p = 0; p < static_cast<size_t>(n); ++p) {
        const int t = target[comp[p]];
        if (final_id[t] < 0) final_id[t] = next_id++;
        out_labels[p] = final_id[t];
    }

    SuperpixelSegmentation seg;
    seg.width = w;
    seg.height = h;
    seg.label_map = std::move(out_labels);
    seg.regions.resize(static_cast<size_t>(next_id));
    std::vector<double> sl(next_id, 0), sa(next_id, 0), sb(next_id, 0), sx(next_id, 0), sy(next_id, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            const int r = seg.label_map[idx];
            sl[r] += lab.L[idx];
            sa[r] += lab.a[idx];
            sb[r] += lab.b[idx];
            sx[r] += (x + 0.5) / w;
            sy[r] += (y + 0.5) / h;
            seg.regions[r].pixel_count += 1;
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) seg.regions[r].touches_border = true;
        }
    }
    for (int r = 0; r < next_id; ++r) {
        const double inv = 1.0 / seg.regions[r].pixel_count;
        seg.regions[r].lab_l = static_cast<float>(sl[r] * inv);
        seg.regions[r].lab_a = static_cast<float>(sa[r] * inv);
        seg.regions[r].lab_b = static_cast<float>(sb[r] * inv);
        seg.regions[r].pos_x = static_cast<float>(sx[r] * inv);
        seg.regions[r].pos_y = static_cast<float>(sy[r] * inv);
    }
    return seg;
}

std::vector<std::vector<int>> region_adjacency(const SuperpixelSegmentation& seg) {
    const int w = seg.width, h = seg.height;
    std::vector<std::set<int>> adj(seg.regions.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int r = seg.label(y, x);
            if (x + 1 < w) {
                const int q = seg.label(y, x + 1);
                if (q != r) {
                    adj[r].insert(q);
                    adj[q].insert(r);
                }
            }
            if (y + 1 < h) {
                const int q = seg.label(y + 1, x);
                if (q != r) {
                    adj[r].insert(q);
                    adj[q].insert(r);
                }
            }
        }
    }
    std::vector<std::vector<int>> out(adj.size());
    for (size_t r = 0; r < adj.size(); ++r) out[r].assign(adj[r].begin(), adj[r].end());
    return out;
}

}  // namespace usps
