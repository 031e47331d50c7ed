#include "usps/handcrafted.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "usps/dataio.hpp"
#include "usps/transforms.hpp"

namespace usps {

namespace {

void require_min_size(const Image& image, const char* method) {
    if (image.width < 32 || image.height < 32)
        throw InvalidArgumentError(std::string(method) + ": image must be at least 32x32");
}

int pick_k(int requested, const Image& image) {
    return requested > 0 ? requested : default_superpixel_count(image.width, image.height);
}

SaliencyMap rasterize(const SuperpixelSegmentation& seg, const std::vector<double>& region_values,
                      const std::string& method_name) {
    SaliencyMap map(seg.width, seg.height);
    map.source = MapSource::handcrafted;
    map.source_name = method_name;
    for (size_t i = 0; i < map.values.size(); ++i)
        map.values[i] = static_cast<float>(region_values[seg.label_map[i]]);
    SaliencyMap normed = normalize_minmax(map);
    return normed;
}

/// All-pairs geodesic color distances over the region adjacency graph
/// (Dijkstra, edge cost = Lab distance between adjacent means).
std::vector<std::vector<double>> geodesic_color_distances(const SuperpixelSegmentation& seg,
                                                          const std::vector<std::vector<int>>& adj) {
    const int K = seg.region_count();
    std::vector<std::vector<double>> dist(K, std::vector<double>(K, std::numeric_limits<double>::max()));
    using Item = std::pair<double, int>;
    for (int src = 0; src < K; ++src) {
        auto& d = dist[src];
        d[src] = 0.0;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        pq.push({0.0, src});
        while (!pq.empty()) {
            const auto [cd, r] = pq.top();
            pq.pop();
            if (cd > d[r]) continue;
            for (int q : adj[r]) {
                const double nd = cd + region_color_distance(seg.regions[r], seg.regions[q]);
                if (nd < d[q]) {
                    d[q] = nd;
                    pq.push({nd, q});
                }
            }
        }
    }
    return dist;
}

inline double spatial_weight(const SuperpixelRegion& a, const SuperpixelRegion& b, double sigma) {
    const double dx = a.pos_x - b.pos_x;
    const double dy = a.pos_y - b.pos_y;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

}  // namespace

SaliencyMap rbd_saliency(const Image& image, const RbdParams& p) {
    require_min_size(image, "rbd_saliency");
    const auto seg = segment_superpixels(image, pick_k(p.superpixel_k, image), p.compactness);
    const int K = seg.region_count();
    const auto adj = region_adjacency(seg);
    const auto geo = geodesic_color_distances(seg, adj);

    const double inv2sc2 = 1.0 / (2.0 * p.sigma_clr * p.sigma_clr);
    std::vector<double> bg_weight(K, 0.0);
    for (int r = 0; r < K; ++r) {
        double area = 0.0, boundary_len = 0.0;
        for (int q = 0; q < K; ++q) {
            const double span = std::exp(-geo[r][q] * geo[r][q] * inv2sc2);
            area += span;
            if (seg.regions[q].touches_border) boundary_len += span;
        }
        const double connectivity = boundary_len / std::sqrt(area);
        bg_weight[r] = 1.0 - std::exp(-connectivity * connectivity / (2.0 * p.sigma_b * p.sigma_b));
    }

    std::vector<double> sal(K, 0.0);
    for (int r = 0; r < K; ++r) {
        double s = 0.0;
        for (int q = 0; q < K; ++q)
            s += region_color_distance(seg.regions[r], seg.regions[q]) *
                 spatial_weight(seg.regions[r], seg.regions[q], p.sigma_spatial) * bg_weight[q];
        sal[r] = s;
    }
    return rasterize(seg, sal, "rbd");
}

Eigen::VectorXd absorption_times(const Eigen::MatrixXd& Q) {
    const auto n = Q.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - Q;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const Eigen::VectorXd t = lu.solve(Eigen::VectorXd::Ones(n));
    if (!t.allFinite() || (M * t - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() > 1e-6)
        throw SolverError("absorption_times: (I - Q) is singular; improper absorbing chain");
    return t;
}

SaliencyMap mc_saliency(const Image& image, const McParams& p) {
    require_min_size(image, "mc_saliency");
    const auto seg = segment_superpixels(image, pick_k(p.superpixel_k, image), p.compactness);
    const int K = seg.region_count();
    const auto adj = region_adjacency(seg);

    std::vector<int> transient, region_to_transient(K, -1);
    for (int r = 0; r < K; ++r) {
        if (!seg.regions[r].touches_border) {
            region_to_transient[r] = static_cast<int>(transient.size());
            transient.push_back(r);
        }
    }
    if (transient.empty() || transient.size() == static_cast<size_t>(K))
        throw InvalidArgumentError("mc_saliency: needs at least one border and one interior region");

    // adjacency plus 2-hop neighbors
    std::vector<std::vector<int>> links(K);
    for (int r = 0; r < K; ++r) {
        std::vector<int> s = adj[r];
        for (int q : adj[r])
            for (int q2 : adj[q])
                if (q2 != r) s.push_back(q2);
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        links[r] = std::move(s);
    }

    const int T = static_cast<int>(transient.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(T, T);
    for (int ti = 0; ti < T; ++ti) {
        const int r = transient[ti];
        double total = 0.0;
        for (int q : links[r])
            total += std::exp(-region_color_distance(seg.regions[r], seg.regions[q]) / p.sigma);
        if (total <= 0.0) continue;
        for (int q : links[r]) {
            const int tq = region_to_transient[q];
            if (tq >= 0)
                Q(ti, tq) =
                    std::exp(-region_color_distance(seg.regions[r], seg.regions[q]) / p.sigma) / total;
        }
    }

    const Eigen::VectorXd t = absorption_times(Q);
    const double t_min = t.minCoeff();
    std::vector<double> sal(K, t_min);
    for (int ti = 0; ti < T; ++ti) sal[transient[ti]] = t[ti];
    return rasterize(seg, sal, "mc");
}

double ridge_reconstruct_residual(const Eigen::MatrixXd& D, const Eigen::VectorXd& f, double lambda) {
    const auto m = D.cols();
    Eigen::MatrixXd G = D.transpose() * D;
    G.diagonal().array() += lambda;
    const Eigen::VectorXd w = G.ldlt().solve(D.transpose() * f);
    return (D * w - f).norm();
}

SaliencyMap dsr_like_saliency(const Image& image, const DsrParams& p) {
    require_min_size(image, "dsr_like_saliency");
    const auto seg = segment_superpixels(image, pick_k(p.superpixel_k, image), p.compactness);
    const int K = seg.region_count();

    std::vector<int> border;
    for (int r = 0; r < K; ++r)
        if (seg.regions[r].touches_border) border.push_back(r);
    if (border.size() < 4)
        throw InvalidArgumentError("dsr_like_saliency: needs at least 4 border regions");

    // degenerate color field: no reconstruction signal
    double max_clr = 0.0;
    for (int r = 0; r < K; ++r)
        for (int q = r + 1; q < K; ++q)
            max_clr = std::max(max_clr, static_cast<double>(region_color_distance(seg.regions[r], seg.regions[q])));
    if (max_clr < 1e-9) {
        SaliencyMap out(seg.width, seg.height);
        out.source = MapSource::handcrafted;
        out.source_name = "dsr_like";
        out.degenerate = true;
        return out;
    }

    auto feature = [&](int r) {
        Eigen::VectorXd f(5);
        f << seg.regions[r].lab_l, seg.regions[r].lab_a, seg.regions[r].lab_b,
            seg.regions[r].pos_x, seg.regions[r].pos_y;
        return f;
    };

    Eigen::MatrixXd D(5, static_cast<Eigen::Index>(border.size()));
    for (size_t i = 0; i < border.size(); ++i) D.col(static_cast<Eigen::Index>(i)) = feature(border[i]);

    const double lambda = p.ridge_scale * (D.transpose() * D).trace() / static_cast<double>(border.size());
    Eigen::MatrixXd G = D.transpose() * D;
    G.diagonal().array() += lambda;
    const Eigen::LDLT<Eigen::MatrixXd> solver(G);

    std::vector<double> sal(K, 0.0);
    for (int r = 0; r < K; ++r) {
        const Eigen::VectorXd f = feature(r);
        const Eigen::VectorXd w = solver.solve(D.transpose() * f);
        sal[r] = (D * w - f).norm();
    }
    return rasterize(seg, sal, "dsr_like");
}

SaliencyMap contrast_center_saliency(const Image& image, const ContrastCenterParams& p) {
    require_min_size(image, "contrast_center_saliency");
    const auto seg = segment_superpixels(image, pick_k(p.superpixel_k, image), p.compactness);
    const int K = seg.region_count();

    std::vector<double> sal(K, 0.0);
    for (int r = 0; r < K; ++r) {
        double contrast = 0.0;
        for (int q = 0; q < K; ++q)
            contrast += seg.regions[q].pixel_count *
                        static_cast<double>(region_color_distance(seg.regions[r], seg.regions[q]));
        const double dx = seg.regions[r].pos_x - 0.5;
        const double dy = seg.regions[r].pos_y - 0.5;
        sal[r] = contrast * std::exp(-(dx * dx + dy * dy) / (2.0 * p.center_sigma * p.center_sigma));
    }
    return rasterize(seg, sal, "contrast_center");
}

std::vector<MethodDescriptor> default_methods() {
    return {{"rbd", {}}, {"mc", {}}, {"dsr_like", {}}, {"contrast_center", {}}};
}

namespace {

double param_or(const std::map<std::string, double>& params, const std::string& key, double dflt,
                std::vector<std::string>& unknown) {
    (void)unknown;
    auto it = params.find(key);
    return it == params.end() ? dflt : it->second;
}

void reject_unknown(const MethodDescriptor& m, std::initializer_list<const char*> known) {
    for (const auto& [key, _] : m.params) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok)
            throw InvalidArgumentError("apply_method: unknown parameter '" + key + "' for method '" +
                                       m.name + "'");
    }
}

}  // namespace

SaliencyMap apply_method(const MethodDescriptor& m, const Image& image) {
    std::vector<std::string> unknown;
    if (m.name == "rbd") {
        reject_unknown(m, {"superpixel_k", "compactness", "sigma_clr", "sigma_b", "sigma_spatial"});
        RbdParams p;
        p.superpixel_k = static_cast<int>(param_or(m.params, "superpixel_k", 0, unknown));
        p.compactness = param_or(m.params, "compactness", p.compactness, unknown);
        p.sigma_clr = param_or(m.params, "sigma_clr", p.sigma_clr, unknown);
        p.sigma_b = param_or(m.params, "sigma_b", p.sigma_b, unknown);
        p.sigma_spatial = param_or(m.params, "sigma_spatial", p.sigma_spatial, unknown);
        return rbd_saliency(image, p);
    }
    if (m.name == "mc") {
        reject_unknown(m, {"superpixel_k", "compactness", "sigma"});
        McParams p;
        p.superpixel_k = static_cast<int>(param_or(m.params, "superpixel_k", 0, unknown));
        p.compactness = param_or(m.params, "compactness", p.compactness, unknown);
        p.sigma = param_or(m.params, "sigma", p.sigma, unknown);
        return mc_saliency(image, p);
    }
    if (m.name == "dsr_like") {
        reject_unknown(m, {"superpixel_k", "compactness", "ridge_scale"});
        DsrParams p;
        p.superpixel_k = static_cast<int>(param_or(m.params, "superpixel_k", 0, unknown));
        p.compactness = param_or(m.params, "compactness", p.compactness, unknown);
        p.ridge_scale = param_or(m.params, "ridge_scale", p.ridge_scale, unknown);
        return dsr_like_saliency(image, p);
    }
    if (m.name == "contrast_center") {
        reject_unknown(m, {"superpixel_k", "compactness", "center_sigma"});
        ContrastCenterParams p;
        p.superpixel_k = static_cast<int>(param_or(m.params, "superpixel_k", 0, unknown));
        p.compactness = param_or(m.params, "compactness", p.compactness, unknown);
        p.center_sigma = param_or(m.params, "center_sigma", p.center_sigma, unknown);
        return contrast_center_saliency(image, p);
    }
    throw InvalidArgumentError("apply_method: unknown method '" + m.name + "'");
}

MethodRunResult run_methods(const Dataset& dataset, const std::vector<MethodDescriptor>& methods,
                            const ArtifactLayout& layout, bool persist, bool dataset_wide_gamma) {
    if (methods.empty()) throw InvalidArgumentError("run_methods: methods list is empty");
    MethodRunResult result;
    for (const auto& method : methods) {
        auto& maps = result.maps[method.name];
        auto& labels = result.labels[method.name];
        for (const auto& sample : dataset.samples) {
            try {
                SaliencyMap map = apply_method(method, sample.image);
                maps.emplace(sample.id, std::move(map));
            } catch (const std::exception& e) {
                result.failures.push_back({method.name, sample.id, e.what()});
            }
        }
        float dataset_gamma = 0.f;
        if (dataset_wide_gamma && !maps.empty()) {
            double sum = 0.0;
            size_t count = 0;
            for (const auto& [id, map] : maps) {
                for (float v : map.values) sum += v;
                count += map.values.size();
            }
            dataset_gamma = 1.5f * static_cast<float>(sum / static_cast<double>(count));
        }
        for (const auto& [id, map] : maps) {
            BinaryMask label = dataset_wide_gamma ? binarize_with_gamma(map, dataset_gamma)
                                                  : binarize_pseudo_label(map);
            if (persist) {
                save_map(map, layout.raw_map(method.name, id));
                save_mask(label, layout.raw_label(method.name, id));
            }
            labels.emplace(id, std::move(label));
        }
    }
    return result;
}

}  // namespace usps
