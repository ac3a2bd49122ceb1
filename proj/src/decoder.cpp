#include "jointrec/decoder.hpp"

#include <algorithm>

#include "jointrec/encoder.hpp"
#include "jointrec/errors.hpp"

namespace jointrec {

JointTarget::JointTarget(int intention, int type) : intention_(intention), type_(type) {
    if (intention < 0 || intention >= kNumClasses || type < 0 || type >= kNumClasses)
        throw ValidationError("JointTarget: class index out of range");
}

Mat JointTarget::matrix() const {
    Mat u = Mat::Zero(kNumClasses, kNumClasses);
    u(intention_, type_) = 1.0;
    return u;
}

namespace {

int one_hot_index(const Vec& v, const char* which) {
    if (v.size() != kNumClasses)
        throw ValidationError(std::string("build_joint_target: ") + which +
                              " must have 3 entries");
    int hot = -1;
    for (Index i = 0; i < v.size(); ++i) {
        if (v[i] == 1.0) {
            if (hot >= 0)
                throw ValidationError(std::string("build_joint_target: ") + which +
                                      " has more than one hot entry");
            hot = static_cast<int>(i);
        } else if (v[i] != 0.0) {
            throw ValidationError(std::string("build_joint_target: ") + which +
                                  " is not a 0/1 vector");
        }
    }
    if (hot < 0)
        throw ValidationError(std::string("build_joint_target: ") + which + " has no hot entry");
    return hot;
}

}  // namespace

JointTarget build_joint_target(const Vec& y, const Vec& z) {
    return JointTarget(one_hot_index(y, "y"), one_hot_index(z, "z"));
}

TuckerParams TuckerParams::zeros(Index latent_dim, Index rank) {
    TuckerParams p;
    p.G = Tensor3(latent_dim, rank, rank);
    p.B = Mat::Zero(kNumClasses, rank);
    p.C = Mat::Zero(kNumClasses, rank);
    return p;
}

MarginalParams MarginalParams::zeros(Index latent_dim) {
    return MarginalParams{Mat::Zero(latent_dim, kNumClasses), Mat::Zero(latent_dim, kNumClasses)};
}

Mat joint_logits(const Vec& a, const TuckerParams& p) {
    if (a.size() != p.latent_dim())
        throw ShapeError("joint_logits: representation length does not match latent_dim");
    const Index rank = p.rank();
    // M(q,r) = sum_p a(p) G(p,q,r); the unfolding's columns are (q, r) with
    // q fastest, so the contracted vector reshapes straight into M.
    const Vec w = p.G.unfold1().transpose() * a;
    const Eigen::Map<const Mat> M(w.data(), rank, rank);
    return p.B * M * p.C.transpose();
}

Mat score_joint(const Vec& a, const TuckerParams& p) {
    return joint_logits(a, p).unaryExpr([](double x) { return sigmoid(x); });
}

MarginalScores score_marginal(const Vec& a, const MarginalParams& p) {
    if (a.size() != p.latent_dim())
        throw ShapeError("score_marginal: representation length does not match latent_dim");
    MarginalScores s;
    s.logit_y = p.W_y.transpose() * a;
    s.logit_z = p.W_z.transpose() * a;
    s.p_y = sigmoid(s.logit_y);
    s.p_z = sigmoid(s.logit_z);
    return s;
}

Mat pseudo_joint(const Vec& p_y, const Vec& p_z) {
    if (p_y.size() != kNumClasses || p_z.size() != kNumClasses)
        throw ShapeError("pseudo_joint: marginal vectors must have 3 entries");
    return p_y * p_z.transpose();
}

std::vector<RankedPair> top_n_pairs(const Mat& scores, int n) {
    if (scores.rows() != kNumClasses || scores.cols() != kNumClasses)
        throw ShapeError("top_n_pairs: scores must be 3x3");
    if (n < 1 || n > kNumClasses * kNumClasses)
        throw ValidationError("top_n_pairs: n must be between 1 and 9");

    std::vector<RankedPair> all;
    all.reserve(9);
    for (int j = 0; j < kNumClasses; ++j)
        for (int k = 0; k < kNumClasses; ++k) all.push_back({j, k, scores(j, k)});
    std::sort(all.begin(), all.end(), [](const RankedPair& a, const RankedPair& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.intention != b.intention) return a.intention < b.intention;
        return a.type < b.type;
    });
    all.resize(static_cast<std::size_t>(n));
    return all;
}

JointGrads joint_backward(const Vec& a, const TuckerParams& p, const Mat& E) {
    const Index rank = p.rank();
    const Vec w = p.G.unfold1().transpose() * a;
    const Eigen::Map<const Mat> M(w.data(), rank, rank);

    JointGrads g;
    const Mat dM = p.B.transpose() * E * p.C;  // rank x rank
    const Eigen::Map<const Vec> dM_vec(dM.data(), dM.size());

    const Mat dG_unfolded = a * dM_vec.transpose();  // latent x rank^2
    g.dG = Tensor3::from_data(Eigen::Map<const Vec>(dG_unfolded.data(), dG_unfolded.size()),
                              p.latent_dim(), rank, rank);
    g.da = p.G.unfold1() * dM_vec;
    g.dB = E * p.C * M.transpose();
    g.dC = E.transpose() * p.B * M;
    return g;
}

MarginalGrads marginal_backward(const Vec& a, const MarginalParams& p, const Vec& e_y,
                                const Vec& e_z) {
    MarginalGrads g;
    g.dW_y = a * e_y.transpose();
    g.dW_z = a * e_z.transpose();
    g.da = p.W_y * e_y + p.W_z * e_z;
    return g;
}

TuckerParams tucker_glorot(Index latent_dim, Index rank, Rng& rng) {
    TuckerParams p = TuckerParams::zeros(latent_dim, rank);
    // fan of the core follows its mode-1 unfolding
    const Mat g = glorot_matrix(latent_dim, rank * rank, rng);
    p.G = Tensor3::from_data(Eigen::Map<const Vec>(g.data(), g.size()), latent_dim, rank, rank);
    p.B = glorot_matrix(kNumClasses, rank, rng);
    p.C = glorot_matrix(kNumClasses, rank, rng);
    return p;
}

MarginalParams marginal_glorot(Index latent_dim, Rng& rng) {
    MarginalParams p;
    p.W_y = glorot_matrix(latent_dim, kNumClasses, rng);
    p.W_z = glorot_matrix(latent_dim, kNumClasses, rng);
    return p;
}

}  // namespace jointrec
