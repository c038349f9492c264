#include "ssg/dump.hpp"

#include "ssg/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssg {

using nlohmann::json;

void ScenePrediction::validate() const {
    const int nn = n();
    if (obj_probs.rank() != 2) throw std::invalid_argument("dump: obj_probs must be rank 2");
    if (pred_scores.rank() != 3 || pred_scores.dim(0) != nn || pred_scores.dim(1) != nn)
        throw std::invalid_argument("dump: pred_scores must be NxNxP");
    if (static_cast<int>(gt_labels.size()) != nn) throw std::invalid_argument("dump: gt_labels size mismatch");
    for (int i = 0; i < nn; ++i) {
        double row = 0.0;
        for (int c = 0; c < n_obj(); ++c) row += obj_probs.at(i, c);
        if (std::abs(row - 1.0) > 1e-5)
            throw std::invalid_argument("dump: object probability row " + std::to_string(i) + " does not sum to 1");
    }
    for (const auto& e : gt_edges) {
        if (e.sub < 0 || e.sub >= nn || e.obj < 0 || e.obj >= nn || e.sub == e.obj)
            throw std::invalid_argument("dump: bad ground-truth edge");
        for (int p : e.preds)
            if (p < 0 || p >= n_pred()) throw std::invalid_argument("dump: ground-truth predicate out of range");
    }
}

std::string prediction_to_json(const ScenePrediction& p) {
    std::ostringstream os;
    os << "{\"id\":\"" << p.id << "\",\"n\":" << p.n() << ",\"n_obj\":" << p.n_obj() << ",\"n_pred\":" << p.n_pred()
       << ",\"objects\":\"" << f32_base64(p.obj_probs.data) << "\",\"predicates\":\"" << f32_base64(p.pred_scores.data)
       << "\",\"gt_labels\":[";
    for (std::size_t i = 0; i < p.gt_labels.size(); ++i) {
        if (i) os << ',';
        os << p.gt_labels[i];
    }
    os << "],\"gt_edges\":[";
    for (std::size_t i = 0; i < p.gt_edges.size(); ++i) {
        const auto& e = p.gt_edges[i];
        if (i) os << ',';
        os << "{\"sub\":" << e.sub << ",\"obj\":" << e.obj << ",\"preds\":[";
        for (std::size_t k = 0; k < e.preds.size(); ++k) {
            if (k) os << ',';
            os << e.preds[k];
        }
        os << "]}";
    }
    os << "]}";
    return os.str();
}

ScenePrediction prediction_from_json(const std::string& line) {
    const json j = json::parse(line);
    ScenePrediction p;
    p.id = j.at("id").get<std::string>();
    const int n = j.at("n").get<int>();
    const int n_obj = j.at("n_obj").get<int>();
    const int n_pred = j.at("n_pred").get<int>();
    p.obj_probs = Tensor({n, n_obj}, f32_from_base64(j.at("objects").get<std::string>(),
                                                     static_cast<std::size_t>(n) * static_cast<std::size_t>(n_obj)));
    p.pred_scores = Tensor({n, n, n_pred},
                           f32_from_base64(j.at("predicates").get<std::string>(),
                                           static_cast<std::size_t>(n) * static_cast<std::size_t>(n) *
                                               static_cast<std::size_t>(n_pred)));
    for (const auto& v : j.at("gt_labels")) p.gt_labels.push_back(v.get<int>());
    for (const auto& je : j.at("gt_edges")) {
        Edge e;
        e.sub = je.at("sub").get<int>();
        e.obj = je.at("obj").get<int>();
        for (const auto& q : je.at("preds")) e.preds.push_back(q.get<int>());
        p.gt_edges.push_back(std::move(e));
    }
    // f32 round-trip can nudge row sums; renormalize within tolerance
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int c = 0; c < n_obj; ++c) row += p.obj_probs.at(i, c);
        if (std::abs(row - 1.0) > 1e-3) throw std::invalid_argument("dump row does not sum to 1");
        for (int c = 0; c < n_obj; ++c) p.obj_probs.at(i, c) /= row;
    }
    p.validate();
    return p;
}

void save_dump(const std::string& path, const PredictionDump& dump) {
    std::ostringstream os;
    for (const auto& p : dump) os << prediction_to_json(p) << '\n';
    write_file(path, os.str());
}

PredictionDump load_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dump file: " + path);
    PredictionDump out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(prediction_from_json(line));
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

} // namespace ssg
