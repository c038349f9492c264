#include "ssg/scene.hpp"

#include "ssg/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ssg {

using nlohmann::json;

int Scene::index_of(int instance_id) const {
    for (std::size_t i = 0; i < instances.size(); ++i)
        if (instances[i].id == instance_id) return static_cast<int>(i);
    return -1;
}

void Scene::validate() const {
    std::set<int> ids;
    for (const auto& inst : instances) {
        if (!ids.insert(inst.id).second) throw std::invalid_argument("scene " + id + ": duplicate instance id");
        if (inst.points.rank() != 2 || inst.points.cols() != 3)
            throw std::invalid_argument("scene " + id + ": points must be Kx3");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& e : edges) {
        if (e.sub == e.obj) throw std::invalid_argument("scene " + id + ": self edge");
        if (!ids.count(e.sub) || !ids.count(e.obj))
            throw std::invalid_argument("scene " + id + ": edge endpoint missing");
        if (!seen.insert({e.sub, e.obj}).second)
            throw std::invalid_argument("scene " + id + ": duplicate edge entry");
    }
}

InstanceStats compute_instance_stats(const Tensor& points) {
    if (points.rank() != 2 || points.cols() != 3) throw std::invalid_argument("stats: points must be Kx3");
    const int k = points.rows();
    if (k < 2) throw std::invalid_argument("stats: need at least 2 points");
    InstanceStats s;
    double lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
        lo[a] = points.at(0, a);
        hi[a] = points.at(0, a);
    }
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < 3; ++a) {
            const double v = points.at(i, a);
            s.mu[a] += v;
            lo[a] = std::min(lo[a], v);
            hi[a] = std::max(hi[a], v);
        }
    for (int a = 0; a < 3; ++a) s.mu[a] /= k;
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < 3; ++a) {
            const double d = points.at(i, a) - s.mu[a];
            s.sigma[a] += d * d;
        }
    s.volume = 1.0;
    for (int a = 0; a < 3; ++a) {
        s.sigma[a] = std::sqrt(s.sigma[a] / k);
        s.bbox[a] = std::max(hi[a] - lo[a], 1e-6); // degenerate axis clamp
        s.volume *= s.bbox[a];
        s.max_len = std::max(s.max_len, s.bbox[a]);
    }
    return s;
}

Tensor geometric_descriptor(const InstanceStats& si, const InstanceStats& sj) {
    if (si.volume <= 0.0 || sj.volume <= 0.0 || si.max_len <= 0.0 || sj.max_len <= 0.0)
        throw std::invalid_argument("geometric_descriptor: non-positive volume or max side length");
    Tensor g({11});
    for (int a = 0; a < 3; ++a) {
        g.at(a) = si.mu[a] - sj.mu[a];
        g.at(3 + a) = si.sigma[a] - sj.sigma[a];
        g.at(6 + a) = si.bbox[a] - sj.bbox[a];
    }
    g.at(9) = std::log(si.volume / sj.volume);
    g.at(10) = std::log(si.max_len / sj.max_len);
    return g;
}

Tensor distance_matrix(const std::vector<InstanceStats>& stats) {
    const int n = static_cast<int>(stats.size());
    if (n < 1) throw std::invalid_argument("distance_matrix: need at least one instance");
    Tensor d({n, n}, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double diff = stats[static_cast<std::size_t>(i)].mu[a] - stats[static_cast<std::size_t>(j)].mu[a];
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            d.at(i, j) = dist;
            d.at(j, i) = dist;
        }
    return d;
}

Tensor downsample(const Tensor& points, int n, Rng& rng) {
    if (points.rank() != 2 || points.cols() != 3) throw std::invalid_argument("downsample: points must be Kx3");
    const int k = points.rows();
    if (k < 1) throw std::invalid_argument("downsample: empty cloud");
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(n));
    if (k >= n) {
        std::vector<int> perm(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        idx.assign(perm.begin(), perm.begin() + n);
    } else {
        for (int i = 0; i < n; ++i) idx.push_back(rng.uniform_int(0, k - 1));
    }
    Tensor out({n, 3});
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) out.at(i, a) = points.at(idx[static_cast<std::size_t>(i)], a);
    return out;
}

Tensor rotate_z(const Tensor& points, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Tensor out = points;
    for (int i = 0; i < points.rows(); ++i) {
        const double x = points.at(i, 0), y = points.at(i, 1);
        out.at(i, 0) = c * x - s * y;
        out.at(i, 1) = s * x + c * y;
    }
    return out;
}

Tensor random_z_rotation(const Tensor& points, Rng& rng) {
    return rotate_z(points, rng.uniform(0.0, 2.0 * 3.14159265358979323846));
}

Tensor translate_to_origin(const Tensor& points) {
    const int k = points.rows();
    double mu[3] = {0, 0, 0};
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < 3; ++a) mu[a] += points.at(i, a);
    for (double& m : mu) m /= k;
    Tensor out = points;
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < 3; ++a) out.at(i, a) -= mu[a];
    return out;
}

// ---------------------------------------------------------------------------
// JSONL persistence. Serialization is hand-rolled so the float formatting
// (9 significant digits) and key order are byte-stable across runs.
// ---------------------------------------------------------------------------

std::string scene_to_json(const Scene& s) {
    std::ostringstream os;
    os << "{\"id\":\"" << s.id << "\",\"instances\":[";
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
        const auto& inst = s.instances[i];
        if (i) os << ',';
        os << "{\"id\":" << inst.id << ",\"label\":" << inst.label << ",\"points\":[";
        for (int p = 0; p < inst.points.rows(); ++p) {
            if (p) os << ',';
            os << '[' << fmt_g9(inst.points.at(p, 0)) << ',' << fmt_g9(inst.points.at(p, 1)) << ','
               << fmt_g9(inst.points.at(p, 2)) << ']';
        }
        os << "]}";
    }
    os << "],\"edges\":[";
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        const auto& e = s.edges[i];
        if (i) os << ',';
        os << "{\"sub\":" << e.sub << ",\"obj\":" << e.obj << ",\"preds\":[";
        for (std::size_t p = 0; p < e.preds.size(); ++p) {
            if (p) os << ',';
            os << e.preds[p];
        }
        os << "]}";
    }
    os << "],\"split\":\"" << s.split << "\"}";
    return os.str();
}

Scene scene_from_json(const std::string& line) {
    const json j = json::parse(line);
    Scene s;
    s.id = j.at("id").get<std::string>();
    s.split = j.at("split").get<std::string>();
    for (const auto& ji : j.at("instances")) {
        Instance inst;
        inst.id = ji.at("id").get<int>();
        inst.label = ji.at("label").get<int>();
        const auto& pts = ji.at("points");
        Tensor p({static_cast<int>(pts.size()), 3});
        int r = 0;
        for (const auto& row : pts) {
            if (row.size() != 3) throw std::invalid_argument("point is not a 3-vector");
            for (int a = 0; a < 3; ++a) p.at(r, a) = row[static_cast<std::size_t>(a)].get<double>();
            ++r;
        }
        inst.points = std::move(p);
        s.instances.push_back(std::move(inst));
    }
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.sub = je.at("sub").get<int>();
        e.obj = je.at("obj").get<int>();
        for (const auto& p : je.at("preds")) e.preds.push_back(p.get<int>());
        s.edges.push_back(std::move(e));
    }
    s.validate();
    return s;
}

void save_scenes(const std::string& path, const std::vector<Scene>& scenes) {
    std::ostringstream os;
    for (const auto& s : scenes) os << scene_to_json(s) << '\n';
    write_file(path, os.str());
}

std::vector<Scene> load_scenes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    std::vector<Scene> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(scene_from_json(line));
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

} // namespace ssg
