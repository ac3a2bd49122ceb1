#include "jointrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "jointrec/errors.hpp"

namespace jointrec {

ScoredInstance ScoredInstance::from_matrices(const Mat& scores3x3, const Mat& truth3x3) {
    if (scores3x3.rows() != 3 || scores3x3.cols() != 3 || truth3x3.rows() != 3 ||
        truth3x3.cols() != 3)
        throw ShapeError("ScoredInstance: expected 3x3 matrices");
    ScoredInstance inst;
    inst.scores.resize(9);
    inst.truth.resize(9);
    for (Index j = 0; j < 3; ++j)
        for (Index k = 0; k < 3; ++k) {
            inst.scores[3 * j + k] = scores3x3(j, k);
            inst.truth[3 * j + k] = truth3x3(j, k);
        }
    return inst;
}

namespace {

void require_consistent(const ScoredInstance& inst) {
    if (inst.scores.size() != inst.truth.size() || inst.scores.size() == 0)
        throw ShapeError("ScoredInstance: scores/truth lengths differ");
}

/// rank[l] = number of labels with score >= score[l] (ties count against)
std::vector<int> pessimistic_ranks(const Vec& scores) {
    const auto n = static_cast<std::size_t>(scores.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return scores[a] > scores[b]; });
    std::vector<int> rank(n);
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos;
        while (end + 1 < n && scores[order[end + 1]] == scores[order[pos]]) ++end;
        for (std::size_t i = pos; i <= end; ++i) rank[static_cast<std::size_t>(order[i])] =
            static_cast<int>(end) + 1;
        pos = end + 1;
    }
    return rank;
}

int count_relevant(const ScoredInstance& inst) {
    int n = 0;
    for (Index l = 0; l < inst.truth.size(); ++l)
        if (inst.truth[l] != 0.0) ++n;
    return n;
}

}  // namespace

double micro_auroc(const std::vector<ScoredInstance>& instances) {
    std::vector<std::pair<double, int>> pool;  // (score, label)
    for (const auto& inst : instances) {
        require_consistent(inst);
        for (Index l = 0; l < inst.scores.size(); ++l)
            pool.emplace_back(inst.scores[l], inst.truth[l] != 0.0 ? 1 : 0);
    }
    long positives = 0;
    for (const auto& [s, y] : pool) positives += y;
    const long negatives = static_cast<long>(pool.size()) - positives;
    if (positives == 0 || negatives == 0)
        throw ValidationError("micro_auroc: pooled labels contain a single class");

    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double positive_rank_sum = 0.0;
    std::size_t pos = 0;
    while (pos < pool.size()) {
        std::size_t end = pos;
        while (end + 1 < pool.size() && pool[end + 1].first == pool[pos].first) ++end;
        const double midrank = 0.5 * (static_cast<double>(pos + 1) + static_cast<double>(end + 1));
        for (std::size_t i = pos; i <= end; ++i)
            if (pool[i].second) positive_rank_sum += midrank;
        pos = end + 1;
    }
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double coverage_error(const std::vector<ScoredInstance>& instances) {
    if (instances.empty()) throw ValidationError("coverage_error: no instances");
    double total = 0.0;
    for (const auto& inst : instances) {
        require_consistent(inst);
        if (count_relevant(inst) == 0)
            throw ValidationError("coverage_error: instance without relevant labels");
        const auto ranks = pessimistic_ranks(inst.scores);
        int worst = 0;
        for (Index l = 0; l < inst.truth.size(); ++l)
            if (inst.truth[l] != 0.0) worst = std::max(worst, ranks[static_cast<std::size_t>(l)]);
        total += worst;
    }
    return total / static_cast<double>(instances.size());
}

double rank_precision(const std::vector<ScoredInstance>& instances) {
    if (instances.empty()) throw ValidationError("rank_precision: no instances");
    double total = 0.0;
    for (const auto& inst : instances) {
        require_consistent(inst);
        const int n_rel = count_relevant(inst);
        if (n_rel == 0)
            throw ValidationError("rank_precision: instance without relevant labels");
        const auto ranks = pessimistic_ranks(inst.scores);

        std::vector<int> relevant_ranks;
        relevant_ranks.reserve(static_cast<std::size_t>(n_rel));
        for (Index l = 0; l < inst.truth.size(); ++l)
            if (inst.truth[l] != 0.0) relevant_ranks.push_back(ranks[static_cast<std::size_t>(l)]);
        std::sort(relevant_ranks.begin(), relevant_ranks.end());

        double acc = 0.0;
        for (int r : relevant_ranks) {
            const auto at_or_above = std::upper_bound(relevant_ranks.begin(),
                                                      relevant_ranks.end(), r) -
                                     relevant_ranks.begin();
            acc += static_cast<double>(at_or_above) / static_cast<double>(r);
        }
        total += acc / static_cast<double>(n_rel);
    }
    return total / static_cast<double>(instances.size());
}

double ndcg_at_k(const std::vector<ScoredInstance>& instances, int k) {
    if (k < 1) throw ValidationError("ndcg_at_k: k must be positive");
    if (instances.empty()) throw ValidationError("ndcg_at_k: no instances");
    double total = 0.0;
    for (const auto& inst : instances) {
        require_consistent(inst);
        const int n_rel = count_relevant(inst);
        if (n_rel == 0) throw ValidationError("ndcg_at_k: instance without relevant labels");
        if (k > inst.scores.size())
            throw ValidationError("ndcg_at_k: k exceeds the label count");
        const auto ranks = pessimistic_ranks(inst.scores);
        double dcg = 0.0;
        for (Index l = 0; l < inst.truth.size(); ++l) {
            if (inst.truth[l] == 0.0) continue;
            const int r = ranks[static_cast<std::size_t>(l)];
            if (r <= k) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
        }
        double idcg = 0.0;
        for (int i = 1; i <= std::min(k, n_rel); ++i)
            idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
        total += dcg / idcg;
    }
    return total / static_cast<double>(instances.size());
}

ContingencyTable ContingencyTable::from_pairs(const std::vector<std::pair<int, int>>& pairs,
                                              int rows, int cols) {
    ContingencyTable t;
    t.counts = Eigen::MatrixXi::Zero(rows, cols);
    for (const auto& [j, k] : pairs) {
        if (j < 0 || j >= rows || k < 0 || k >= cols)
            throw ValidationError("ContingencyTable: pair index out of range");
        ++t.counts(j, k);
    }
    return t;
}

namespace {

struct Margins {
    Vec row, col;
    double total;
};

Margins table_margins(const ContingencyTable& table) {
    if (table.counts.rows() < 2 || table.counts.cols() < 2)
        throw ValidationError("independence test: table must be at least 2x2");
    if (table.counts.minCoeff() < 0)
        throw ValidationError("independence test: negative count");
    Margins m;
    const Mat obs = table.counts.cast<double>();
    m.row = obs.rowwise().sum();
    m.col = obs.colwise().sum().transpose();
    m.total = obs.sum();
    if (m.total < 1.0) throw ValidationError("independence test: empty table");
    if (m.row.minCoeff() <= 0.0 || m.col.minCoeff() <= 0.0)
        throw DataError("independence test: zero marginal row or column (degenerate table)");
    return m;
}

}  // namespace

IndependenceTest chi_squared_test(const ContingencyTable& table) {
    const Margins m = table_margins(table);
    const Mat obs = table.counts.cast<double>();
    double stat = 0.0;
    for (Index j = 0; j < obs.rows(); ++j)
        for (Index k = 0; k < obs.cols(); ++k) {
            const double expected = m.row[j] * m.col[k] / m.total;
            const double d = obs(j, k) - expected;
            stat += d * d / expected;
        }
    const int df = static_cast<int>((obs.rows() - 1) * (obs.cols() - 1));
    return {stat, df, chi2_sf(stat, df)};
}

IndependenceTest g_test(const ContingencyTable& table) {
    const Margins m = table_margins(table);
    const Mat obs = table.counts.cast<double>();
    double stat = 0.0;
    for (Index j = 0; j < obs.rows(); ++j)
        for (Index k = 0; k < obs.cols(); ++k) {
            const double o = obs(j, k);
            if (o <= 0.0) continue;
            const double expected = m.row[j] * m.col[k] / m.total;
            stat += o * std::log(o / expected);
        }
    stat *= 2.0;
    const int df = static_cast<int>((obs.rows() - 1) * (obs.cols() - 1));
    return {stat, df, chi2_sf(stat, df)};
}

namespace {

constexpr int kGammaMaxIter = 500;
constexpr double kGammaEps = 1e-16;

/// Lower regularized incomplete gamma P(a,x) by series, for x < a+1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kGammaMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Upper regularized incomplete gamma Q(a,x) by continued fraction
/// (modified Lentz), for x >= a+1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double frac = d;
    for (int i = 1; i <= kGammaMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        frac *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * frac;
}

}  // namespace

double chi2_sf(double x, int df) {
    if (df < 1) throw ValidationError("chi2_sf: df must be at least 1");
    if (x < 0.0) throw ValidationError("chi2_sf: x must be non-negative");
    if (x == 0.0) return 1.0;
    const double a = 0.5 * static_cast<double>(df);
    const double half_x = 0.5 * x;
    if (half_x < a + 1.0) return 1.0 - gamma_p_series(a, half_x);
    return gamma_q_cf(a, half_x);
}

void MetricsReport::add(int metric, int model, double value) {
    values_.at(static_cast<std::size_t>(metric)).at(static_cast<std::size_t>(model))
        .push_back(value);
}

const std::vector<double>& MetricsReport::values(int metric, int model) const {
    return values_.at(static_cast<std::size_t>(metric)).at(static_cast<std::size_t>(model));
}

double MetricsReport::mean(int metric, int model) const {
    const auto& v = values(metric, model);
    if (v.empty()) throw ValidationError("MetricsReport: no values recorded");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double MetricsReport::stddev(int metric, int model) const {
    const auto& v = values(metric, model);
    const double mu = mean(metric, model);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

std::string MetricsReport::to_csv() const {
    std::string out = "metric,model,mean,std\n";
    char buf[128];
    for (std::size_t metric = 0; metric < kMetricNames.size(); ++metric)
        for (std::size_t model = 0; model < kModelNames.size(); ++model) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f\n", kMetricNames[metric],
                          kModelNames[model], mean(static_cast<int>(metric),
                          static_cast<int>(model)),
                          stddev(static_cast<int>(metric), static_cast<int>(model)));
            out += buf;
        }
    return out;
}

}  // namespace jointrec
