#include "jointrec/encoder.hpp"

#include <cmath>

namespace jointrec {

LstmParams LstmParams::zeros(Index input_dim, Index hidden_dim) {
    LstmParams p;
    p.W_i = Mat::Zero(hidden_dim, input_dim);
    p.W_f = Mat::Zero(hidden_dim, input_dim);
    p.W_o = Mat::Zero(hidden_dim, input_dim);
    p.W_g = Mat::Zero(hidden_dim, input_dim);
    p.R_i = Mat::Zero(hidden_dim, hidden_dim);
    p.R_f = Mat::Zero(hidden_dim, hidden_dim);
    p.R_o = Mat::Zero(hidden_dim, hidden_dim);
    p.R_g = Mat::Zero(hidden_dim, hidden_dim);
    p.b_i = Vec::Zero(hidden_dim);
    p.b_f = Vec::Zero(hidden_dim);
    p.b_o = Vec::Zero(hidden_dim);
    p.b_g = Vec::Zero(hidden_dim);
    return p;
}

StaticParams StaticParams::zeros(Index static_dim, Index latent_dim) {
    return StaticParams{Mat::Zero(static_dim, latent_dim)};
}

void LstmTrace::clear() {
    x.clear();
    i.clear();
    f.clear();
    o.clear();
    g.clear();
    c.clear();
    tanh_c.clear();
    h.clear();
}

LstmState lstm_step(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmParams& p) {
    if (x.size() != p.input_dim())
        throw ShapeError("lstm_step: input length does not match input_dim");
    if (h_prev.size() != p.hidden_dim() || c_prev.size() != p.hidden_dim())
        throw ShapeError("lstm_step: state length does not match hidden_dim");

    const Vec i = sigmoid(Vec(p.W_i * x + p.R_i * h_prev + p.b_i));
    const Vec f = sigmoid(Vec(p.W_f * x + p.R_f * h_prev + p.b_f));
    const Vec o = sigmoid(Vec(p.W_o * x + p.R_o * h_prev + p.b_o));
    const Vec g = tanh_act(Vec(p.W_g * x + p.R_g * h_prev + p.b_g));

    LstmState out;
    out.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    out.h = o.cwiseProduct(tanh_act(out.c));
    return out;
}

Vec encode_sequence(const std::vector<Vec>& xs, const LstmParams& p) {
    LstmState s{Vec::Zero(p.hidden_dim()), Vec::Zero(p.hidden_dim())};
    for (const Vec& x : xs) s = lstm_step(x, s.h, s.c, p);
    return s.h;
}

Vec encode_static(const Vec& m, const StaticParams& p) {
    if (m.size() != p.static_dim())
        throw ShapeError("encode_static: feature length does not match static_dim");
    return sigmoid(Vec(p.H.transpose() * m));
}

LatentRep build_representation(const std::vector<Vec>& history, const Vec& m,
                               const LstmParams& lstm, const StaticParams& st) {
    const Vec h = encode_sequence(history, lstm);
    const Vec s = encode_static(m, st);
    LatentRep rep;
    rep.values.resize(h.size() + s.size());
    rep.values << h, s;
    return rep;
}

Vec encode_sequence_traced(const std::vector<Vec>& xs, const LstmParams& p, LstmTrace& trace) {
    trace.clear();
    const Index n = p.hidden_dim();
    Vec h = Vec::Zero(n), c = Vec::Zero(n);
    for (const Vec& x : xs) {
        if (x.size() != p.input_dim())
            throw ShapeError("encode_sequence_traced: input length does not match input_dim");
        Vec i = sigmoid(Vec(p.W_i * x + p.R_i * h + p.b_i));
        Vec f = sigmoid(Vec(p.W_f * x + p.R_f * h + p.b_f));
        Vec o = sigmoid(Vec(p.W_o * x + p.R_o * h + p.b_o));
        Vec g = tanh_act(Vec(p.W_g * x + p.R_g * h + p.b_g));
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        Vec tc = tanh_act(c);
        h = o.cwiseProduct(tc);

        trace.x.push_back(x);
        trace.i.push_back(std::move(i));
        trace.f.push_back(std::move(f));
        trace.o.push_back(std::move(o));
        trace.g.push_back(std::move(g));
        trace.c.push_back(c);
        trace.tanh_c.push_back(std::move(tc));
        trace.h.push_back(h);
    }
    return h;
}

void lstm_backward(const LstmTrace& trace, const LstmParams& p, const Vec& d_h_last,
                   LstmParams& grads, std::vector<Vec>* dx) {
    const Index T = trace.steps();
    const Index n = p.hidden_dim();
    if (d_h_last.size() != n) throw ShapeError("lstm_backward: d_h_last length mismatch");
    if (dx) dx->assign(static_cast<std::size_t>(T), Vec());

    Vec dh = d_h_last;
    Vec dc = Vec::Zero(n);
    for (Index t = T - 1; t >= 0; --t) {
        const auto st = static_cast<std::size_t>(t);
        const Vec& i = trace.i[st];
        const Vec& f = trace.f[st];
        const Vec& o = trace.o[st];
        const Vec& g = trace.g[st];
        const Vec& tc = trace.tanh_c[st];

        const Vec d_o = dh.cwiseProduct(tc);
        dc.array() += dh.array() * o.array() * (1.0 - tc.array().square());

        const Vec d_i = dc.cwiseProduct(g);
        const Vec d_g = dc.cwiseProduct(i);
        Vec d_f = Vec::Zero(n);
        if (t > 0) d_f = dc.cwiseProduct(trace.c[st - 1]);

        // pre-activation gradients
        const Vec zi = d_i.array() * i.array() * (1.0 - i.array());
        const Vec zf = d_f.array() * f.array() * (1.0 - f.array());
        const Vec zo = d_o.array() * o.array() * (1.0 - o.array());
        const Vec zg = d_g.array() * (1.0 - g.array().square());

        const Vec& x = trace.x[st];
        grads.W_i.noalias() += zi * x.transpose();
        grads.W_f.noalias() += zf * x.transpose();
        grads.W_o.noalias() += zo * x.transpose();
        grads.W_g.noalias() += zg * x.transpose();
        grads.b_i += zi;
        grads.b_f += zf;
        grads.b_o += zo;
        grads.b_g += zg;
        if (t > 0) {
            const Vec& h_prev = trace.h[st - 1];
            grads.R_i.noalias() += zi * h_prev.transpose();
            grads.R_f.noalias() += zf * h_prev.transpose();
            grads.R_o.noalias() += zo * h_prev.transpose();
            grads.R_g.noalias() += zg * h_prev.transpose();
        }

        if (dx)
            (*dx)[st] = p.W_i.transpose() * zi + p.W_f.transpose() * zf +
                        p.W_o.transpose() * zo + p.W_g.transpose() * zg;

        dh = p.R_i.transpose() * zi + p.R_f.transpose() * zf + p.R_o.transpose() * zo +
             p.R_g.transpose() * zg;
        dc = dc.cwiseProduct(f);
    }
}

Mat static_backward(const Vec& m, const Vec& s, const Vec& ds) {
    const Vec du = ds.array() * s.array() * (1.0 - s.array());
    return m * du.transpose();
}

Mat glorot_matrix(Index rows, Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
    return m;
}

LstmParams lstm_glorot(Index input_dim, Index hidden_dim, Rng& rng) {
    LstmParams p = LstmParams::zeros(input_dim, hidden_dim);
    p.W_i = glorot_matrix(hidden_dim, input_dim, rng);
    p.W_f = glorot_matrix(hidden_dim, input_dim, rng);
    p.W_o = glorot_matrix(hidden_dim, input_dim, rng);
    p.W_g = glorot_matrix(hidden_dim, input_dim, rng);
    p.R_i = glorot_matrix(hidden_dim, hidden_dim, rng);
    p.R_f = glorot_matrix(hidden_dim, hidden_dim, rng);
    p.R_o = glorot_matrix(hidden_dim, hidden_dim, rng);
    p.R_g = glorot_matrix(hidden_dim, hidden_dim, rng);
    p.b_f = Vec::Ones(hidden_dim);  // open forget gates early in training
    return p;
}

StaticParams static_glorot(Index static_dim, Index latent_dim, Rng& rng) {
    return StaticParams{glorot_matrix(static_dim, latent_dim, rng)};
}

}  // namespace jointrec
