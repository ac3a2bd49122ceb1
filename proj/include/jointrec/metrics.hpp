#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointrec/tensor.hpp"

namespace jointrec {

/// Scores and binary relevance for one instance, both flattened row-major
/// (label 3*j + k for cell (j,k) when built from 3x3 matrices).
///
/// Rank convention for every metric here: rank(l) counts labels scoring
/// >= score(l), so ties count against a label. This keeps all metrics
/// deterministic without random tie-breaking.
struct ScoredInstance {
    Vec scores;
    Vec truth;  // 0/1 relevance

    static ScoredInstance from_matrices(const Mat& scores3x3, const Mat& truth3x3);
};

/// Mann-Whitney AUROC with midrank tie handling over the pooled
/// (score, label) pairs of all instances.
double micro_auroc(const std::vector<ScoredInstance>& instances);

/// Mean over instances of the worst rank among relevant labels.
double coverage_error(const std::vector<ScoredInstance>& instances);

/// Label-ranking average precision.
double rank_precision(const std::vector<ScoredInstance>& instances);

/// Binary-gain NDCG truncated at k, discount log2(position + 1).
double ndcg_at_k(const std::vector<ScoredInstance>& instances, int k);

/// Observed counts of an r x c cross-classification.
struct ContingencyTable {
    Eigen::MatrixXi counts;

    static ContingencyTable from_pairs(const std::vector<std::pair<int, int>>& pairs,
                                       int rows = 3, int cols = 3);
    long total() const { return counts.cast<long>().sum(); }
};

struct IndependenceTest {
    double stat;
    int df;
    double p;
};

/// Pearson chi-squared test of independence, no continuity correction.
IndependenceTest chi_squared_test(const ContingencyTable& table);

/// Likelihood-ratio (G) test: 2 * sum over nonzero cells of O*ln(O/E).
IndependenceTest g_test(const ContingencyTable& table);

/// Upper tail P(X > x) of the chi-squared distribution with df degrees of
/// freedom, via the regularized upper incomplete gamma Q(df/2, x/2).
double chi2_sf(double x, int df);

inline constexpr std::array<const char*, 4> kMetricNames = {"AUROC", "Coverage Error",
                                                            "Rank Precision", "NDCG@5"};
inline constexpr std::array<const char*, 4> kModelNames = {"Random", "Most Popular", "Standard",
                                                           "Tensor"};

/// Per-(metric, model) values across splits, reported as mean and
/// population standard deviation in a fixed row order.
class MetricsReport {
public:
    void add(int metric, int model, double value);

    double mean(int metric, int model) const;
    double stddev(int metric, int model) const;
    const std::vector<double>& values(int metric, int model) const;

    /// CSV with header metric,model,mean,std and 16 data rows ordered
    /// (AUROC, Coverage Error, Rank Precision, NDCG@5) x
    /// (Random, Most Popular, Standard, Tensor).
    std::string to_csv() const;

private:
    std::array<std::array<std::vector<double>, 4>, 4> values_{};
};

}  // namespace jointrec
