#include "ssg/metrics.hpp"

#include "ssg/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ssg {

namespace {

// argmax with lowest-index tie break
int argmax_row(const Tensor& m, int row) {
    int best = 0;
    for (int c = 1; c < m.cols(); ++c)
        if (m.at(row, c) > m.at(row, best)) best = c;
    return best;
}

std::vector<int> topk_classes(const Tensor& m, int row, int k) {
    std::vector<int> order(static_cast<std::size_t>(m.cols()));
    for (int c = 0; c < m.cols(); ++c) order[static_cast<std::size_t>(c)] = c;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return m.at(row, a) > m.at(row, b); });
    order.resize(static_cast<std::size_t>(std::min(k, m.cols())));
    return order;
}

struct Candidate {
    int sub, obj, pred;
    int sub_class, obj_class; // top-1 (or the enumerated pair in exhaustive mode)
    double score;
};

// Per-scene ranked candidate triplets. PredCls pins classes to ground truth
// with probability one and ranks on the predicate score alone.
std::vector<Candidate> ranked_candidates(const ScenePrediction& p, bool use_gt_classes, const TripletOptions& opt) {
    const int n = p.n();
    const int np = p.n_pred();
    std::vector<Candidate> cands;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            std::vector<int> preds;
            if (opt.graph_constraint) {
                int best = 0;
                for (int q = 1; q < np; ++q)
                    if (p.pred_scores.at(i, j, q) > p.pred_scores.at(i, j, best)) best = q;
                preds.push_back(best);
            } else {
                for (int q = 0; q < np; ++q) preds.push_back(q);
            }
            for (int q : preds) {
                const double sp = p.pred_scores.at(i, j, q);
                if (use_gt_classes) {
                    cands.push_back({i, j, q, p.gt_labels[static_cast<std::size_t>(i)],
                                     p.gt_labels[static_cast<std::size_t>(j)], sp});
                } else if (opt.exhaustive_class_pairs) {
                    for (int ci = 0; ci < p.n_obj(); ++ci)
                        for (int cj = 0; cj < p.n_obj(); ++cj)
                            cands.push_back({i, j, q, ci, cj, p.obj_probs.at(i, ci) * sp * p.obj_probs.at(j, cj)});
                } else {
                    const int ci = argmax_row(p.obj_probs, i);
                    const int cj = argmax_row(p.obj_probs, j);
                    cands.push_back({i, j, q, ci, cj, p.obj_probs.at(i, ci) * sp * p.obj_probs.at(j, cj)});
                }
            }
        }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.sub != b.sub) return a.sub < b.sub;
        if (a.obj != b.obj) return a.obj < b.obj;
        if (a.pred != b.pred) return a.pred < b.pred;
        if (a.sub_class != b.sub_class) return a.sub_class < b.sub_class;
        return a.obj_class < b.obj_class;
    });
    return cands;
}

struct GtTriplet {
    int sub, obj, pred;
    int sub_class, obj_class;
};

std::vector<GtTriplet> gt_triplets(const ScenePrediction& p) {
    std::vector<GtTriplet> out;
    for (const auto& e : p.gt_edges)
        for (int q : e.preds)
            out.push_back({e.sub, e.obj, q, p.gt_labels[static_cast<std::size_t>(e.sub)],
                           p.gt_labels[static_cast<std::size_t>(e.obj)]});
    return out;
}

// Generic tallies keyed by predicate class: (total, recalled).
struct Tally {
    std::map<int, std::pair<long long, long long>> per_pred;
    long long total = 0, recalled = 0;
    void count(int pred, bool hit) {
        total += 1;
        auto& e = per_pred[pred];
        e.first += 1;
        if (hit) {
            recalled += 1;
            e.second += 1;
        }
    }
    double pooled() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(recalled) / static_cast<double>(total); }
    double mean(const std::vector<int>* class_filter = nullptr) const {
        double acc = 0.0;
        int n = 0;
        for (const auto& [cls, e] : per_pred) {
            if (class_filter && std::find(class_filter->begin(), class_filter->end(), cls) == class_filter->end())
                continue;
            acc += 100.0 * static_cast<double>(e.second) / static_cast<double>(e.first);
            n += 1;
        }
        return n == 0 ? 0.0 : acc / n;
    }
    bool any(const std::vector<int>* class_filter = nullptr) const {
        if (!class_filter) return total > 0;
        for (const auto& [cls, e] : per_pred)
            if (std::find(class_filter->begin(), class_filter->end(), cls) != class_filter->end()) return true;
        return false;
    }
};

Tally triplet_tally(const PredictionDump& dump, int k, bool use_gt_classes, const TripletOptions& opt,
                    const std::set<TripletKey>* keep_keys = nullptr, bool keep_in_set = true) {
    Tally tally;
    for (const auto& p : dump) {
        auto cands = ranked_candidates(p, use_gt_classes, opt);
        const std::size_t top = std::min(cands.size(), static_cast<std::size_t>(k));
        for (const auto& gt : gt_triplets(p)) {
            if (keep_keys) {
                const bool seen = keep_keys->count({gt.sub_class, gt.pred, gt.obj_class}) > 0;
                if (seen != keep_in_set) continue;
            }
            bool hit = false;
            for (std::size_t c = 0; c < top && !hit; ++c) {
                const auto& cd = cands[c];
                hit = cd.sub == gt.sub && cd.obj == gt.obj && cd.pred == gt.pred && cd.sub_class == gt.sub_class &&
                      cd.obj_class == gt.obj_class;
            }
            tally.count(gt.pred, hit);
        }
    }
    return tally;
}

} // namespace

double object_recall_at_k(const PredictionDump& dump, int k) {
    if (k < 1) throw std::invalid_argument("object_recall_at_k: k >= 1 required");
    long long total = 0, hit = 0;
    for (const auto& p : dump)
        for (int i = 0; i < p.n(); ++i) {
            const auto top = topk_classes(p.obj_probs, i, k);
            total += 1;
            if (std::find(top.begin(), top.end(), p.gt_labels[static_cast<std::size_t>(i)]) != top.end()) hit += 1;
        }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

double object_mean_recall_at_k(const PredictionDump& dump, int k) {
    if (k < 1) throw std::invalid_argument("object_mean_recall_at_k: k >= 1 required");
    std::map<int, std::pair<long long, long long>> per_class;
    for (const auto& p : dump)
        for (int i = 0; i < p.n(); ++i) {
            const int gt = p.gt_labels[static_cast<std::size_t>(i)];
            const auto top = topk_classes(p.obj_probs, i, k);
            auto& e = per_class[gt];
            e.first += 1;
            if (std::find(top.begin(), top.end(), gt) != top.end()) e.second += 1;
        }
    if (per_class.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [cls, e] : per_class) acc += 100.0 * static_cast<double>(e.second) / static_cast<double>(e.first);
    return acc / static_cast<double>(per_class.size());
}

namespace {
Tally predicate_tally(const PredictionDump& dump, int k) {
    Tally tally;
    for (const auto& p : dump)
        for (const auto& e : p.gt_edges) {
            if (e.preds.empty()) continue;
            std::vector<int> order(static_cast<std::size_t>(p.n_pred()));
            for (int q = 0; q < p.n_pred(); ++q) order[static_cast<std::size_t>(q)] = q;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return p.pred_scores.at(e.sub, e.obj, a) > p.pred_scores.at(e.sub, e.obj, b);
            });
            order.resize(static_cast<std::size_t>(std::min(k, p.n_pred())));
            for (int q : e.preds)
                tally.count(q, std::find(order.begin(), order.end(), q) != order.end());
        }
    return tally;
}
} // namespace

double predicate_recall_at_k(const PredictionDump& dump, int k) {
    if (k < 1) throw std::invalid_argument("predicate_recall_at_k: k >= 1 required");
    return predicate_tally(dump, k).pooled();
}

double predicate_mean_recall_at_k(const PredictionDump& dump, int k) {
    if (k < 1) throw std::invalid_argument("predicate_mean_recall_at_k: k >= 1 required");
    return predicate_tally(dump, k).mean();
}

double triplet_recall_at_k(const PredictionDump& dump, int k, const TripletOptions& opt) {
    return triplet_tally(dump, k, false, opt).pooled();
}

double triplet_mean_recall_at_k(const PredictionDump& dump, int k, const TripletOptions& opt) {
    return triplet_tally(dump, k, false, opt).mean();
}

double task_recall_at_k(const PredictionDump& dump, RankTask task, int k, bool graph_constraint) {
    TripletOptions opt;
    opt.graph_constraint = graph_constraint;
    return triplet_tally(dump, k, task == RankTask::PredCls, opt).pooled();
}

double task_mean_recall_at_k(const PredictionDump& dump, RankTask task, int k, bool graph_constraint) {
    TripletOptions opt;
    opt.graph_constraint = graph_constraint;
    return triplet_tally(dump, k, task == RankTask::PredCls, opt).mean();
}

TercilePartition predicate_terciles(const std::vector<long long>& train_pred_freqs) {
    const int p = static_cast<int>(train_pred_freqs.size());
    std::vector<int> order(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return train_pred_freqs[static_cast<std::size_t>(a)] > train_pred_freqs[static_cast<std::size_t>(b)];
    });
    TercilePartition part;
    const int n_head = (p + 2) / 3;
    const int n_body = (p - n_head + 1) / 2;
    for (int i = 0; i < p; ++i) {
        if (i < n_head)
            part.head.push_back(order[static_cast<std::size_t>(i)]);
        else if (i < n_head + n_body)
            part.body.push_back(order[static_cast<std::size_t>(i)]);
        else
            part.tail.push_back(order[static_cast<std::size_t>(i)]);
    }
    return part;
}

SplitMetrics split_metrics(const PredictionDump& dump, const std::vector<long long>& train_pred_freqs,
                           const std::set<TripletKey>& train_triplets, int pred_k, int triplet_k,
                           const TripletOptions& opt) {
    SplitMetrics out;
    const auto part = predicate_terciles(train_pred_freqs);
    const Tally ptally = predicate_tally(dump, pred_k);
    auto group_mr = [&](const std::vector<int>& cls) -> std::optional<double> {
        if (cls.empty() || !ptally.any(&cls)) return std::nullopt;
        return ptally.mean(&cls);
    };
    out.head_mr = group_mr(part.head);
    out.body_mr = group_mr(part.body);
    out.tail_mr = group_mr(part.tail);

    const Tally seen = triplet_tally(dump, triplet_k, false, opt, &train_triplets, true);
    const Tally unseen = triplet_tally(dump, triplet_k, false, opt, &train_triplets, false);
    if (seen.total > 0) out.seen_r = seen.pooled();
    if (unseen.total > 0) out.unseen_r = unseen.pooled();
    return out;
}

double entropy(const std::vector<double>& dist) {
    double sum = 0.0;
    for (double p : dist) sum += p;
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("entropy: distribution does not sum to 1");
    double h = 0.0;
    for (double p : dist) {
        if (p < 0.0) throw std::invalid_argument("entropy: negative probability");
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

namespace {
double row_entropy(const Tensor& m, int row) {
    double h = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
        const double p = m.at(row, c);
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}
} // namespace

EntropyAnalysis entropy_error_histogram(const PredictionDump& dump, int n_bins) {
    if (n_bins < 2) throw std::invalid_argument("entropy_error_histogram: n_bins >= 2 required");
    EntropyAnalysis out;
    for (const auto& p : dump)
        for (const auto& e : p.gt_edges) {
            if (e.preds.empty()) continue;
            // (i): keep only pairs with both endpoints correct at top-1
            if (argmax_row(p.obj_probs, e.sub) != p.gt_labels[static_cast<std::size_t>(e.sub)]) continue;
            if (argmax_row(p.obj_probs, e.obj) != p.gt_labels[static_cast<std::size_t>(e.obj)]) continue;
            // (ii): accumulated entropy
            const double acc = 0.5 * (row_entropy(p.obj_probs, e.sub) + row_entropy(p.obj_probs, e.obj));
            // (iii): top-1 predicate error indicator (multi-label: error iff
            // the argmax predicate is not in the ground-truth set)
            int best = 0;
            for (int q = 1; q < p.n_pred(); ++q)
                if (p.pred_scores.at(e.sub, e.obj, q) > p.pred_scores.at(e.sub, e.obj, best)) best = q;
            const int err = std::find(e.preds.begin(), e.preds.end(), best) == e.preds.end() ? 1 : 0;
            out.samples.emplace_back(acc, err);
        }
    out.retained = static_cast<int>(out.samples.size());
    out.counts.assign(static_cast<std::size_t>(n_bins), 0);
    out.error_rates.assign(static_cast<std::size_t>(n_bins), std::nullopt);
    if (out.samples.empty()) return out;
    out.lo = out.hi = out.samples[0].first;
    for (const auto& [v, e] : out.samples) {
        out.lo = std::min(out.lo, v);
        out.hi = std::max(out.hi, v);
    }
    std::vector<int> errs(static_cast<std::size_t>(n_bins), 0);
    const double width = out.hi - out.lo;
    for (const auto& [v, e] : out.samples) {
        int idx = width <= 0.0 ? 0 : static_cast<int>((v - out.lo) / width * n_bins);
        idx = std::clamp(idx, 0, n_bins - 1);
        out.counts[static_cast<std::size_t>(idx)] += 1;
        errs[static_cast<std::size_t>(idx)] += e;
    }
    for (int b = 0; b < n_bins; ++b)
        if (out.counts[static_cast<std::size_t>(b)] > 0)
            out.error_rates[static_cast<std::size_t>(b)] =
                static_cast<double>(errs[static_cast<std::size_t>(b)]) / out.counts[static_cast<std::size_t>(b)];
    return out;
}

ErrorCategoryTable error_category_table(const PredictionDump& dump) {
    ErrorCategoryTable out;
    long long err_both = 0, err_one = 0, err_wrong = 0;
    for (const auto& p : dump)
        for (const auto& e : p.gt_edges) {
            if (e.preds.empty()) continue;
            const bool sub_ok = argmax_row(p.obj_probs, e.sub) == p.gt_labels[static_cast<std::size_t>(e.sub)];
            const bool obj_ok = argmax_row(p.obj_probs, e.obj) == p.gt_labels[static_cast<std::size_t>(e.obj)];
            int best = 0;
            for (int q = 1; q < p.n_pred(); ++q)
                if (p.pred_scores.at(e.sub, e.obj, q) > p.pred_scores.at(e.sub, e.obj, best)) best = q;
            const bool err = std::find(e.preds.begin(), e.preds.end(), best) == e.preds.end();
            if (sub_ok && obj_ok) {
                out.n_both += 1;
                err_both += err;
            } else if (sub_ok || obj_ok) {
                out.n_one += 1;
                err_one += err;
            } else {
                out.n_wrong += 1;
                err_wrong += err;
            }
        }
    if (out.n_both > 0) out.both_correct = 100.0 * static_cast<double>(err_both) / out.n_both;
    if (out.n_one > 0) out.one_correct = 100.0 * static_cast<double>(err_one) / out.n_one;
    if (out.n_wrong > 0) out.both_wrong = 100.0 * static_cast<double>(err_wrong) / out.n_wrong;
    return out;
}

Tensor factorization_mixture(const Tensor& cond, const std::vector<double>& post_i,
                             const std::vector<double>& post_j) {
    if (cond.rank() != 3) throw std::invalid_argument("factorization: table must be CxCxE");
    const int c = cond.dim(0);
    const int ne = cond.dim(2);
    if (cond.dim(1) != c) throw std::invalid_argument("factorization: table must be square in classes");
    if (static_cast<int>(post_i.size()) != c || static_cast<int>(post_j.size()) != c)
        throw std::invalid_argument("factorization: posterior size mismatch");
    auto check_dist = [](const std::vector<double>& d, const char* what) {
        double s = 0.0;
        for (double v : d) {
            if (v < -1e-12) throw std::invalid_argument(std::string("factorization: negative entry in ") + what);
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(std::string("factorization: ") + what + " not normalized");
    };
    check_dist(post_i, "posterior i");
    check_dist(post_j, "posterior j");
    for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b) {
            double s = 0.0;
            for (int e = 0; e < ne; ++e) s += cond.at(a, b, e);
            if (std::abs(s - 1.0) > 1e-9)
                throw std::invalid_argument("factorization: conditional table row not normalized");
        }
    Tensor mix({ne}, 0.0);
    for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b) {
            const double w = post_i[static_cast<std::size_t>(a)] * post_j[static_cast<std::size_t>(b)];
            if (w == 0.0) continue;
            for (int e = 0; e < ne; ++e) mix.at(e) += cond.at(a, b, e) * w;
        }
    return mix;
}

double factorization_check(const Tensor& cond, const std::vector<double>& post_i,
                           const std::vector<double>& post_j, const std::vector<double>& direct) {
    const Tensor mix = factorization_mixture(cond, post_i, post_j);
    if (direct.size() != mix.data.size()) throw std::invalid_argument("factorization: direct distribution size mismatch");
    double s = 0.0;
    for (double v : direct) s += v;
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("factorization: direct distribution not normalized");
    double dev = 0.0;
    for (std::size_t e = 0; e < direct.size(); ++e) dev = std::max(dev, std::abs(mix.data[e] - direct[e]));
    return dev;
}

Tensor embedding_class_cosine(const Tensor& embeddings, const std::vector<int>& labels, int n_classes) {
    if (embeddings.rank() != 2) throw std::invalid_argument("embedding diagnostics: rank-2 embeddings expected");
    if (static_cast<int>(labels.size()) != embeddings.rows())
        throw std::invalid_argument("embedding diagnostics: label count mismatch");
    if (n_classes < 2) throw std::invalid_argument("embedding diagnostics: need >= 2 classes");
    const int m = embeddings.rows(), d = embeddings.cols();
    auto cos = [&](int a, int b) {
        double num = 0.0, na = 0.0, nb = 0.0;
        for (int j = 0; j < d; ++j) {
            num += embeddings.at(a, j) * embeddings.at(b, j);
            na += embeddings.at(a, j) * embeddings.at(a, j);
            nb += embeddings.at(b, j) * embeddings.at(b, j);
        }
        return num / (std::sqrt(na) * std::sqrt(nb));
    };
    Tensor sums({n_classes, n_classes}, 0.0);
    Tensor counts({n_classes, n_classes}, 0.0);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            if (a == b) continue;
            const int ca = labels[static_cast<std::size_t>(a)];
            const int cb = labels[static_cast<std::size_t>(b)];
            sums.at(ca, cb) += cos(a, b);
            counts.at(ca, cb) += 1.0;
        }
    Tensor out({n_classes, n_classes}, std::numeric_limits<double>::quiet_NaN());
    for (int a = 0; a < n_classes; ++a)
        for (int b = 0; b < n_classes; ++b)
            if (counts.at(a, b) > 0.0) out.at(a, b) = sums.at(a, b) / counts.at(a, b);
    return out;
}

std::string class_cosine_csv(const Tensor& matrix) {
    std::ostringstream os;
    os << "class";
    for (int b = 0; b < matrix.cols(); ++b) os << ",c" << b;
    os << '\n';
    for (int a = 0; a < matrix.rows(); ++a) {
        os << 'c' << a;
        for (int b = 0; b < matrix.cols(); ++b) {
            os << ',';
            if (!std::isnan(matrix.at(a, b))) os << fmt_full(matrix.at(a, b));
        }
        os << '\n';
    }
    return os.str();
}

void MetricsReport::add(const std::string& metric, int k, const std::string& constraint, double value) {
    rows.emplace_back(metric, k, constraint, value);
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "metric,k,constraint,value\n";
    for (const auto& [m, k, c, v] : rows) os << m << ',' << k << ',' << c << ',' << fmt_full(v) << '\n';
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [m, k, c, v] : rows) {
        nlohmann::json row;
        row["metric"] = m;
        row["k"] = k;
        row["constraint"] = c;
        row["value"] = v;
        arr.push_back(std::move(row));
    }
    return arr.dump(2) + "\n";
}

MetricsReport standard_report(const PredictionDump& dump) {
    MetricsReport rep;
    for (int k : {1, 5, 10}) {
        rep.add("object_recall", k, "-", object_recall_at_k(dump, k));
        rep.add("object_mean_recall", k, "-", object_mean_recall_at_k(dump, k));
    }
    for (int k : {1, 3, 5}) {
        rep.add("predicate_recall", k, "-", predicate_recall_at_k(dump, k));
        rep.add("predicate_mean_recall", k, "-", predicate_mean_recall_at_k(dump, k));
    }
    for (int k : {50, 100}) {
        for (bool gc : {false, true}) {
            TripletOptions opt;
            opt.graph_constraint = gc;
            rep.add("triplet_recall", k, gc ? "gc" : "nogc", triplet_recall_at_k(dump, k, opt));
            rep.add("triplet_mean_recall", k, gc ? "gc" : "nogc", triplet_mean_recall_at_k(dump, k, opt));
        }
    }
    for (int k : {20, 50, 100}) {
        for (bool gc : {false, true}) {
            const char* tag = gc ? "gc" : "nogc";
            rep.add("sgcls_recall", k, tag, task_recall_at_k(dump, RankTask::SGCls, k, gc));
            rep.add("sgcls_mean_recall", k, tag, task_mean_recall_at_k(dump, RankTask::SGCls, k, gc));
            rep.add("predcls_recall", k, tag, task_recall_at_k(dump, RankTask::PredCls, k, gc));
            rep.add("predcls_mean_recall", k, tag, task_mean_recall_at_k(dump, RankTask::PredCls, k, gc));
        }
    }
    return rep;
}

} // namespace ssg
