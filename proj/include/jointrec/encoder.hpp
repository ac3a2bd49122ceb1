#pragma once

#include <string>
#include <vector>

#include "jointrec/rng.hpp"
#include "jointrec/tensor.hpp"

namespace jointrec {

/// Standard LSTM cell parameters (forget gate, no peephole connections).
struct LstmParams {
    Mat W_i, W_f, W_o, W_g;  // input weights, hidden x input
    Mat R_i, R_f, R_o, R_g;  // recurrent weights, hidden x hidden
    Vec b_i, b_f, b_o, b_g;  // biases, hidden

    static LstmParams zeros(Index input_dim, Index hidden_dim);

    Index hidden_dim() const { return W_i.rows(); }
    Index input_dim() const { return W_i.cols(); }
};

/// Log-linear map for static features: s = sigmoid(H^T m), no bias.
struct StaticParams {
    Mat H;  // static_dim x latent_static_dim

    static StaticParams zeros(Index static_dim, Index latent_dim);

    Index static_dim() const { return H.rows(); }
    Index latent_dim() const { return H.cols(); }
};

/// Concatenated representation: last LSTM hidden state followed by the
/// sigmoid-encoded static features. First hidden_dim entries lie in (-1,1),
/// the remainder in (0,1).
struct LatentRep {
    Vec values;
    std::string patient_id;
    int t = 0;
};

struct LstmState {
    Vec h, c;
};

/// One LSTM cell update.
LstmState lstm_step(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmParams& p);

/// Runs the cell over the sequence from a zero state and returns the last
/// hidden state. An empty sequence encodes to the zero vector.
Vec encode_sequence(const std::vector<Vec>& xs, const LstmParams& p);

/// Elementwise sigmoid(H^T m).
Vec encode_static(const Vec& m, const StaticParams& p);

/// [ encode_sequence(history) ; encode_static(m) ]
LatentRep build_representation(const std::vector<Vec>& history, const Vec& m,
                               const LstmParams& lstm, const StaticParams& st);

/// Per-step activations recorded during a forward pass, consumed by
/// lstm_backward. `x` holds the inputs as the cell saw them (after any
/// dropout masking).
struct LstmTrace {
    std::vector<Vec> x;
    std::vector<Vec> i, f, o, g;
    std::vector<Vec> c, tanh_c, h;

    Index steps() const { return static_cast<Index>(x.size()); }
    void clear();
};

Vec encode_sequence_traced(const std::vector<Vec>& xs, const LstmParams& p, LstmTrace& trace);

/// Backpropagation through time given d_h_last = dLoss/dh_T. Accumulates
/// parameter gradients into `grads` (same shapes as `p`, caller-zeroed) and,
/// when `dx` is non-null, writes dLoss/dx_t for every step.
void lstm_backward(const LstmTrace& trace, const LstmParams& p, const Vec& d_h_last,
                   LstmParams& grads, std::vector<Vec>* dx = nullptr);

/// dLoss/dH for s = sigmoid(H^T m) given ds = dLoss/ds.
Mat static_backward(const Vec& m, const Vec& s, const Vec& ds);

/// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases
/// except the forget-gate bias at 1.0.
LstmParams lstm_glorot(Index input_dim, Index hidden_dim, Rng& rng);
StaticParams static_glorot(Index static_dim, Index latent_dim, Rng& rng);

/// Glorot-uniform matrix, entries drawn in column-major order.
Mat glorot_matrix(Index rows, Index cols, Rng& rng);

}  // namespace jointrec
