#pragma once

#include "ssg/dump.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace ssg {

// ---- recall over objects / predicates ----
double object_recall_at_k(const PredictionDump& dump, int k);
double object_mean_recall_at_k(const PredictionDump& dump, int k);

// Evaluated over ground-truth-annotated edges only; pooled counting.
double predicate_recall_at_k(const PredictionDump& dump, int k);
double predicate_mean_recall_at_k(const PredictionDump& dump, int k);

// ---- ranked triplets ----
struct TripletOptions {
    bool graph_constraint = false;       // at most the argmax predicate per ordered pair
    bool exhaustive_class_pairs = false; // rank over all class pairs rather than top-1
};

double triplet_recall_at_k(const PredictionDump& dump, int k, const TripletOptions& opt = {});
double triplet_mean_recall_at_k(const PredictionDump& dump, int k, const TripletOptions& opt = {});

enum class RankTask { SGCls, PredCls };
double task_recall_at_k(const PredictionDump& dump, RankTask task, int k, bool graph_constraint);
double task_mean_recall_at_k(const PredictionDump& dump, RankTask task, int k, bool graph_constraint);

// ---- long-tail / generalization splits ----
struct TercilePartition {
    std::vector<int> head, body, tail; // predicate ids, frequency-descending
};
// Ties broken by index order so equal frequencies split deterministically.
TercilePartition predicate_terciles(const std::vector<long long>& train_pred_freqs);

using TripletKey = std::tuple<int, int, int>; // (subject class, predicate, object class)

struct SplitMetrics {
    std::optional<double> head_mr, body_mr, tail_mr; // predicate mR@K per tercile
    std::optional<double> seen_r, unseen_r;          // triplet R@K
};
SplitMetrics split_metrics(const PredictionDump& dump, const std::vector<long long>& train_pred_freqs,
                           const std::set<TripletKey>& train_triplets, int pred_k, int triplet_k,
                           const TripletOptions& opt = {});

// ---- diagnostics ----
double entropy(const std::vector<double>& dist); // natural log, 0 log 0 = 0

struct EntropyAnalysis {
    int retained = 0;
    double lo = 0.0, hi = 0.0;
    std::vector<int> counts;                        // n_bins
    std::vector<std::optional<double>> error_rates; // per bin; absent when empty
    std::vector<std::pair<double, int>> samples;    // (accumulated entropy, error indicator)
};
EntropyAnalysis entropy_error_histogram(const PredictionDump& dump, int n_bins);

struct ErrorCategoryTable {
    std::optional<double> both_correct;  // percent predicate errors, subject and object right
    std::optional<double> one_correct;   // exactly one endpoint right
    std::optional<double> both_wrong;
    int n_both = 0, n_one = 0, n_wrong = 0;
};
ErrorCategoryTable error_category_table(const PredictionDump& dump);

// Eq-1 style factorization: mixture over class pairs vs the directly
// specified conditional. Tables must be normalized; returns max abs deviation.
Tensor factorization_mixture(const Tensor& cond_pred_table, const std::vector<double>& post_i,
                             const std::vector<double>& post_j);
double factorization_check(const Tensor& cond_pred_table, const std::vector<double>& post_i,
                           const std::vector<double>& post_j, const std::vector<double>& direct);

// Mean pairwise cosine per class pair; NaN where undefined (intra with a
// single instance). embeddings: [M, d]; labels: size M.
Tensor embedding_class_cosine(const Tensor& embeddings, const std::vector<int>& labels, int n_classes);
std::string class_cosine_csv(const Tensor& matrix);

// ---- standard report ----
struct MetricsReport {
    // rows: (metric family, K, constraint tag) -> percent
    std::vector<std::tuple<std::string, int, std::string, double>> rows;
    void add(const std::string& metric, int k, const std::string& constraint, double value);
    std::string to_csv() const;
    std::string to_json() const;
};
MetricsReport standard_report(const PredictionDump& dump);

} // namespace ssg
