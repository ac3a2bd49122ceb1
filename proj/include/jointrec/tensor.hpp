#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "jointrec/errors.hpp"

namespace jointrec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense order-3 tensor of doubles.
///
/// Element (p, q, r) lives at flat offset p + d1*(q + d2*r), i.e. the data
/// buffer is exactly the column-major mode-1 unfolding with column index
/// q + d2*r (mode 2 varies fastest, Kolda's convention).
class Tensor3 {
public:
    Tensor3() = default;

    Tensor3(Index d1, Index d2, Index d3) : d1_(d1), d2_(d2), d3_(d3) {
        if (d1 < 1 || d2 < 1 || d3 < 1)
            throw ShapeError("Tensor3: dimensions must be positive");
        data_ = Vec::Zero(d1 * d2 * d3);
    }

    static Tensor3 from_data(Vec data, Index d1, Index d2, Index d3) {
        if (data.size() != d1 * d2 * d3)
            throw ShapeError("Tensor3::from_data: data length does not match dims");
        Tensor3 t(d1, d2, d3);
        t.data_ = std::move(data);
        return t;
    }

    double operator()(Index p, Index q, Index r) const { return data_[offset(p, q, r)]; }
    double& operator()(Index p, Index q, Index r) { return data_[offset(p, q, r)]; }

    Index dim1() const { return d1_; }
    Index dim2() const { return d2_; }
    Index dim3() const { return d3_; }
    Index size() const { return data_.size(); }

    const Vec& data() const { return data_; }
    Vec& data() { return data_; }

    /// Zero-copy view of the mode-1 unfolding, dims (d1, d2*d3).
    Eigen::Map<const Mat> unfold1() const {
        return Eigen::Map<const Mat>(data_.data(), d1_, d2_ * d3_);
    }

private:
    Index offset(Index p, Index q, Index r) const {
        eigen_assert(p >= 0 && p < d1_ && q >= 0 && q < d2_ && r >= 0 && r < d3_);
        return p + d1_ * (q + d2_ * r);
    }

    Vec data_;
    Index d1_ = 0, d2_ = 0, d3_ = 0;
};

/// result(j, k) = y(j) * z(k)
inline Mat outer_product(const Vec& y, const Vec& z) {
    if (y.size() == 0 || z.size() == 0)
        throw ShapeError("outer_product: operands must be non-empty");
    return y * z.transpose();
}

/// Mode-1 unfolding: element (p, q + d2*r) = G(p, q, r).
inline Mat mode1_unfold(const Tensor3& G) { return G.unfold1(); }

/// Columns of M stacked top to bottom into one vector.
inline Vec vec_colstack(const Mat& M) {
    return Eigen::Map<const Vec>(M.data(), M.size());
}

/// Tucker contraction sum_{p,q,r} G(p,q,r) a(p) b(q) c(r).
///
/// Deliberately written as the literal triple sum so it stays an
/// independent route against the unfolded matrix formulation.
inline double contract_tucker(const Tensor3& G, const Vec& a, const Vec& b, const Vec& c) {
    if (a.size() != G.dim1() || b.size() != G.dim2() || c.size() != G.dim3())
        throw ShapeError("contract_tucker: factor lengths must match tensor dims");
    double total = 0.0;
    for (Index r = 0; r < G.dim3(); ++r)
        for (Index q = 0; q < G.dim2(); ++q) {
            const double bc = b[q] * c[r];
            double inner = 0.0;
            for (Index p = 0; p < G.dim1(); ++p) inner += G(p, q, r) * a[p];
            total += inner * bc;
        }
    return total;
}

/// Numerically stable logistic function; never overflows.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double tanh_act(double x) { return std::tanh(x); }

inline Vec sigmoid(const Vec& v) {
    return v.unaryExpr([](double x) { return sigmoid(x); });
}

inline Vec tanh_act(const Vec& v) {
    return v.unaryExpr([](double x) { return std::tanh(x); });
}

}  // namespace jointrec
