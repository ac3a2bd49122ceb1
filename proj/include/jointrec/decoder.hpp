#pragma once

#include <array>
#include <utility>
#include <vector>

#include "jointrec/rng.hpp"
#include "jointrec/tensor.hpp"

namespace jointrec {

inline constexpr int kNumClasses = 3;  // per target feature
inline constexpr std::array<const char*, 3> kIntentionNames = {"curative", "palliative",
                                                               "unknown"};
inline constexpr std::array<const char*, 3> kTypeNames = {"percutaneous", "brachytherapy",
                                                          "unknown"};

/// One observed decision: the 3x3 indicator matrix U = y (outer) z with a
/// single hot cell at (intention, type).
class JointTarget {
public:
    JointTarget(int intention, int type);

    int intention() const { return intention_; }
    int type() const { return type_; }

    /// 3x3 matrix with a single 1 at (intention, type).
    Mat matrix() const;

    /// Row-major flat label index of the hot cell: 3*intention + type.
    int flat_index() const { return 3 * intention_ + type_; }

    bool operator==(const JointTarget& other) const = default;

private:
    int intention_;
    int type_;
};

/// U = y (outer) z for one-hot 3-vectors; rejects anything not one-hot.
JointTarget build_joint_target(const Vec& y, const Vec& z);

/// Tucker-3 scoring parameters. The latent representation acts directly as
/// the mode-1 factor, so only modes 2 and 3 carry factor matrices.
struct TuckerParams {
    Tensor3 G;  // latent_dim x rank x rank
    Mat B;      // 3 x rank, row j is b_j
    Mat C;      // 3 x rank, row k is c_k

    Index latent_dim() const { return G.dim1(); }
    Index rank() const { return G.dim2(); }

    static TuckerParams zeros(Index latent_dim, Index rank);
};

/// Log-linear marginal heads, one per target feature, no bias.
struct MarginalParams {
    Mat W_y;  // latent_dim x 3
    Mat W_z;  // latent_dim x 3

    Index latent_dim() const { return W_y.rows(); }

    static MarginalParams zeros(Index latent_dim);
};

/// Pre-sigmoid scores: logit(j,k) = [[G; a, b_j, c_k]].
Mat joint_logits(const Vec& a, const TuckerParams& p);

/// 3x3 matrix of sigmoid(joint logit); every entry in (0,1).
Mat score_joint(const Vec& a, const TuckerParams& p);

struct MarginalScores {
    Vec p_y, p_z;        // sigmoid outputs
    Vec logit_y, logit_z;
};

MarginalScores score_marginal(const Vec& a, const MarginalParams& p);

/// Outer product of two marginal score vectors; the rank-1 stand-in for a
/// joint distribution.
Mat pseudo_joint(const Vec& p_y, const Vec& p_z);

struct RankedPair {
    int intention;
    int type;
    double score;
};

/// The n best-scoring (intention, type) pairs, descending by score, ties
/// broken by ascending (intention, type).
std::vector<RankedPair> top_n_pairs(const Mat& scores, int n);

// ---- gradients -----------------------------------------------------------

struct JointGrads {
    Tensor3 dG;
    Mat dB, dC;
    Vec da;
};

/// Backward through the Tucker contraction given E = dLoss/dlogits (3x3).
JointGrads joint_backward(const Vec& a, const TuckerParams& p, const Mat& E);

struct MarginalGrads {
    Mat dW_y, dW_z;
    Vec da;
};

/// Backward through the marginal heads given e_y/e_z = dLoss/dlogit vectors.
MarginalGrads marginal_backward(const Vec& a, const MarginalParams& p, const Vec& e_y,
                                const Vec& e_z);

TuckerParams tucker_glorot(Index latent_dim, Index rank, Rng& rng);
MarginalParams marginal_glorot(Index latent_dim, Rng& rng);

}  // namespace jointrec
