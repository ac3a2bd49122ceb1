#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jointrec/decoder.hpp"
#include "jointrec/rng.hpp"
#include "oracles.hpp"

using namespace jointrec;

namespace {

Vec random_vec(Index n, Rng& rng) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

TuckerParams random_tucker(Index latent, Index rank, Rng& rng) {
    TuckerParams p = TuckerParams::zeros(latent, rank);
    for (Index i = 0; i < p.G.size(); ++i) p.G.data()[i] = rng.uniform(-1.0, 1.0);
    for (Index j = 0; j < rank; ++j)
        for (Index i = 0; i < 3; ++i) {
            p.B(i, j) = rng.uniform(-1.0, 1.0);
            p.C(i, j) = rng.uniform(-1.0, 1.0);
        }
    return p;
}

Vec unit(int i) {
    Vec v = Vec::Zero(3);
    v[i] = 1.0;
    return v;
}

}  // namespace

TEST_CASE("build_joint_target") {
    JointTarget t = build_joint_target(unit(0), unit(0));
    CHECK(t.matrix()(0, 0) == 1.0);
    CHECK(t.matrix().sum() == 1.0);

    JointTarget uu = build_joint_target(unit(2), unit(2));
    CHECK(uu.matrix()(2, 2) == 1.0);

    // all 9 one-hot pairs give the 9 distinct unit matrices
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            JointTarget jt = build_joint_target(unit(j), unit(k));
            Mat u = jt.matrix();
            CHECK(u.sum() == 1.0);
            CHECK(u(j, k) == 1.0);
            CHECK(jt.flat_index() == 3 * j + k);
        }

    Vec two_hot(3), half(3);
    two_hot << 1, 1, 0;
    half << 0.5, 0.5, 0;
    CHECK_THROWS_AS(build_joint_target(two_hot, unit(0)), ValidationError);
    CHECK_THROWS_AS(build_joint_target(unit(0), half), ValidationError);
    CHECK_THROWS_AS(build_joint_target(Vec::Zero(3), unit(0)), ValidationError);
}

TEST_CASE("score_joint on the zero core gives 0.5 everywhere") {
    TuckerParams p = TuckerParams::zeros(5, 2);
    Rng rng(79);
    Mat s = score_joint(random_vec(5, rng), p);
    CHECK(s.isConstant(0.5));
}

TEST_CASE("score_joint with a rank-1 core matches the factorized closed form") {
    Rng rng(83);
    const Index latent = 6, rank = 3;
    Vec u = random_vec(latent, rng), v = random_vec(rank, rng), w = random_vec(rank, rng);
    TuckerParams p = random_tucker(latent, rank, rng);
    for (Index i = 0; i < latent; ++i)
        for (Index q = 0; q < rank; ++q)
            for (Index r = 0; r < rank; ++r) p.G(i, q, r) = u[i] * v[q] * w[r];

    Vec a = random_vec(latent, rng);
    Mat s = score_joint(a, p);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            const double expected =
                sigmoid((u.dot(a)) * (v.dot(p.B.row(j))) * (w.dot(p.C.row(k))));
            CHECK(s(j, k) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("score_joint equals nine brute-force contractions") {
    Rng rng(89);
    TuckerParams p = random_tucker(7, 4, rng);
    Vec a = random_vec(7, rng);
    Mat s = score_joint(a, p);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            const double logit =
                oracle::tucker_triple_sum(p.G, a, p.B.row(j).transpose(), p.C.row(k).transpose());
            CHECK(std::abs(s(j, k) - sigmoid(logit)) < 1e-10);
            CHECK(s(j, k) > 0.0);
            CHECK(s(j, k) < 1.0);
        }

    CHECK_THROWS_AS(score_joint(random_vec(3, rng), p), ShapeError);
}

TEST_CASE("score_joint matches the unfolded-matrix formulation entry for entry") {
    Rng rng(97);
    TuckerParams p = random_tucker(8, 5, rng);
    Vec a = random_vec(8, rng);
    Mat s = score_joint(a, p);
    const Mat g1 = mode1_unfold(p.G);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            const Vec b = p.B.row(j).transpose();
            const Vec c = p.C.row(k).transpose();
            const double logit = a.dot(g1 * vec_colstack(outer_product(c, b).transpose()));
            CHECK(std::abs(s(j, k) - sigmoid(logit)) < 1e-10);
        }
}

TEST_CASE("a full-rank logit matrix is reachable; pseudo_joint never is") {
    // construct params whose logit matrix is the identity-like full-rank target
    TuckerParams p = TuckerParams::zeros(4, 3);
    p.B = Mat::Identity(3, 3);
    p.C = Mat::Identity(3, 3);
    Vec a = Vec::Zero(4);
    a[0] = 1.0;
    Mat want(3, 3);
    want << 2, 0, 0, 0, 3, 0, 0, 0, 5;
    for (Index q = 0; q < 3; ++q)
        for (Index r = 0; r < 3; ++r) p.G(0, q, r) = want(q, r);

    Mat logits = joint_logits(a, p);
    CHECK(logits == want);
    Eigen::FullPivLU<Mat> lu(logits);
    CHECK(lu.rank() == 3);

    // pseudo joint is rank <= 1: every 2x2 minor vanishes
    Rng rng(101);
    Vec py(3), pz(3);
    for (Index i = 0; i < 3; ++i) {
        py[i] = rng.uniform();
        pz[i] = rng.uniform();
    }
    Mat pj = pseudo_joint(py, pz);
    for (int i = 0; i < 2; ++i)
        for (int j = i + 1; j < 3; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = k + 1; l < 3; ++l)
                    CHECK(std::abs(pj(i, k) * pj(j, l) - pj(i, l) * pj(j, k)) < 1e-12);
}

TEST_CASE("score_marginal") {
    MarginalParams zero = MarginalParams::zeros(5);
    Rng rng(103);
    Vec a = random_vec(5, rng);
    MarginalScores s = score_marginal(a, zero);
    CHECK(s.p_y.isConstant(0.5));
    CHECK(s.p_z.isConstant(0.5));

    MarginalParams p = MarginalParams::zeros(5);
    for (Index j = 0; j < 3; ++j)
        for (Index i = 0; i < 5; ++i) {
            p.W_y(i, j) = rng.uniform(-1.0, 1.0);
            p.W_z(i, j) = rng.uniform(-1.0, 1.0);
        }
    MarginalScores sr = score_marginal(a, p);
    for (Index j = 0; j < 3; ++j) {
        double logit = 0;
        for (Index i = 0; i < 5; ++i) logit += p.W_y(i, j) * a[i];
        CHECK(sr.p_y[j] == doctest::Approx(sigmoid(logit)).epsilon(1e-14));
    }

    // extreme weights stay strictly inside (0,1)
    MarginalParams extreme{Mat::Constant(5, 3, 1e3), Mat::Constant(5, 3, -1e3)};
    MarginalScores se = score_marginal(Vec::Ones(5), extreme);
    for (Index j = 0; j < 3; ++j) {
        CHECK(se.p_y[j] <= 1.0);
        CHECK(se.p_z[j] >= 0.0);
        CHECK(std::isfinite(se.p_y[j]));
        CHECK(std::isfinite(se.p_z[j]));
    }

    CHECK_THROWS_AS(score_marginal(Vec::Zero(4), p), ShapeError);
}

TEST_CASE("pseudo_joint") {
    Vec py = unit(0), pz = unit(1);
    Mat pj = pseudo_joint(py, pz);
    CHECK(pj(0, 1) == 1.0);
    CHECK(pj.sum() == 1.0);

    Vec uy = Vec::Constant(3, 1.0 / 3), uz = Vec::Constant(3, 1.0 / 3);
    CHECK(pseudo_joint(uy, uz).isConstant(1.0 / 9, 1e-15));

    Rng rng(107);
    Vec sy(3), sz(3);
    double ty = 0, tz = 0;
    for (Index i = 0; i < 3; ++i) {
        sy[i] = rng.uniform();
        sz[i] = rng.uniform();
        ty += sy[i];
        tz += sz[i];
    }
    sy /= ty;
    sz /= tz;
    CHECK(pseudo_joint(sy, sz).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("top_n_pairs ordering and tie-breaking") {
    Mat s = Mat::Zero(3, 3);
    s(1, 2) = 0.9;
    auto top1 = top_n_pairs(s, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].intention == 1);
    CHECK(top1[0].type == 2);
    CHECK(top1[0].score == 0.9);

    // all equal: lexicographic tie-break
    Mat eq = Mat::Constant(3, 3, 0.25);
    auto top2 = top_n_pairs(eq, 2);
    CHECK(top2[0].intention == 0);
    CHECK(top2[0].type == 0);
    CHECK(top2[1].intention == 0);
    CHECK(top2[1].type == 1);

    // full sort against a comparison-sort oracle
    Rng rng(109);
    Mat r(3, 3);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) r(i, j) = rng.uniform();
    auto all = top_n_pairs(r, 9);
    REQUIRE(all.size() == 9);
    for (std::size_t i = 0; i + 1 < all.size(); ++i) CHECK(all[i].score >= all[i + 1].score);
    double total = 0;
    for (const auto& rp : all) total += rp.score;
    CHECK(total == doctest::Approx(r.sum()).epsilon(1e-12));

    CHECK_THROWS_AS(top_n_pairs(r, 0), ValidationError);
    CHECK_THROWS_AS(top_n_pairs(r, 10), ValidationError);
}

TEST_CASE("top_n_pairs is invariant under strictly increasing transforms") {
    Rng rng(113);
    Mat r(3, 3);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) r(i, j) = rng.uniform(-2.0, 2.0);
    Mat transformed = r.unaryExpr([](double x) { return std::exp(0.7 * x) + 3.0; });

    auto base = top_n_pairs(r, 9);
    auto mapped = top_n_pairs(transformed, 9);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].intention == mapped[i].intention);
        CHECK(base[i].type == mapped[i].type);
    }
}

TEST_CASE("joint_backward matches finite differences of a scalar functional") {
    Rng rng(127);
    const Index latent = 5, rank = 2;
    TuckerParams p = random_tucker(latent, rank, rng);
    Vec a = random_vec(latent, rng);
    Mat E(3, 3);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) E(i, j) = rng.uniform(-1.0, 1.0);

    // objective = sum_{jk} E(j,k) * logit(j,k); gradient of logits is exactly E
    auto objective = [&](const TuckerParams& q, const Vec& rep) {
        return (E.array() * joint_logits(rep, q).array()).sum();
    };

    JointGrads g = joint_backward(a, p, E);
    const double step = 1e-6;
    double worst = 0.0;

    for (Index i = 0; i < p.G.size(); ++i) {
        const double saved = p.G.data()[i];
        p.G.data()[i] = saved + step;
        const double fp = objective(p, a);
        p.G.data()[i] = saved - step;
        const double fm = objective(p, a);
        p.G.data()[i] = saved;
        worst = std::max(worst, oracle::rel_err(g.dG.data()[i], (fp - fm) / (2 * step)));
    }
    for (Mat* mp : {&p.B, &p.C}) {
        Mat& grad = (mp == &p.B) ? g.dB : g.dC;
        for (Index i = 0; i < mp->size(); ++i) {
            const double saved = mp->data()[i];
            mp->data()[i] = saved + step;
            const double fp = objective(p, a);
            mp->data()[i] = saved - step;
            const double fm = objective(p, a);
            mp->data()[i] = saved;
            worst = std::max(worst, oracle::rel_err(grad.data()[i], (fp - fm) / (2 * step)));
        }
    }
    for (Index i = 0; i < a.size(); ++i) {
        const double saved = a[i];
        a[i] = saved + step;
        const double fp = objective(p, a);
        a[i] = saved - step;
        const double fm = objective(p, a);
        a[i] = saved;
        worst = std::max(worst, oracle::rel_err(g.da[i], (fp - fm) / (2 * step)));
    }
    CHECK(worst < 1e-6);
}
