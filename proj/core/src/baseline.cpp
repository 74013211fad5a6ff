#include "scdiff/baseline.hpp"

#include <cmath>

#include "scdiff/error.hpp"

namespace scdiff {

void BaselineBlockParams::validate() const {
    const int d = Wq.rows();
    if (heads < 1) throw ShapeError("baseline: head count must be >= 1");
    if (d % heads != 0) throw ShapeError("baseline: hidden dim must be divisible by heads");
    auto square = [&](const Matrix& w) { return w.rows() == d && w.cols() == d; };
    if (!square(Wq) || !square(Wk) || !square(Wv) || !square(Wo))
        throw ShapeError("baseline: projection matrices must be d x d");
    if (W1.rows() != 4 * d || W1.cols() != d) throw ShapeError("baseline: W1 must be 4d x d");
    if (W2.rows() != d || W2.cols() != 4 * d) throw ShapeError("baseline: W2 must be d x 4d");
}

Matrix baseline_layer(const Matrix& z, const BaselineBlockParams& params) {
    params.validate();
    const int d = params.Wq.rows();
    if (z.rows() != d) throw ShapeError("baseline: feature dim mismatch");
    const int n = z.cols();
    const int dh = d / params.heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    const Matrix q = matmul(params.Wq, z);
    const Matrix k = matmul(params.Wk, z);
    const Matrix v = matmul(params.Wv, z);

    auto rows = [](const Matrix& m, int r0, int r1) {
        Matrix out(r1 - r0, m.cols());
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < m.cols(); ++j) out(i - r0, j) = m(i, j);
        return out;
    };

    Matrix heads_out(d, n);
    for (int h = 0; h < params.heads; ++h) {
        const int r0 = h * dh, r1 = (h + 1) * dh;
        const Matrix qh = rows(q, r0, r1);
        const Matrix kh = rows(k, r0, r1);
        const Matrix vh = rows(v, r0, r1);
        // scores[i][j] = <k_i, q_j> / sqrt(dh); column j mixes over tokens i.
        const Matrix attn = softmax_columns(scale(matmul(transpose(kh), qh), inv_sqrt_dh));
        const Matrix out = matmul(vh, attn);
        for (int i = 0; i < dh; ++i)
            for (int j = 0; j < n; ++j) heads_out(r0 + i, j) = out(i, j);
    }

    const Matrix z1 = add(z, matmul(params.Wo, heads_out));
    const Matrix ffn = matmul(params.W2, relu(matmul(params.W1, z1)));
    return add(z1, ffn);
}

int64_t parameter_count(const BaselineBlockParams& params) {
    return static_cast<int64_t>(params.Wq.size()) + params.Wk.size() + params.Wv.size() +
           params.Wo.size() + params.W1.size() + params.W2.size();
}

int64_t parameter_count(const WhiteBoxBlockParams& params) {
    int64_t total = params.D.size();
    for (const auto& u_k : params.U) total += u_k.size();
    return total;
}

Tape::NodeId baseline_layer_on_tape(Tape& tape, Tape::NodeId z, const BaselineBlockNodes& nodes) {
    const int d = tape.value(nodes.Wq).rows();
    const int dh = d / nodes.heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tape::NodeId q = tape.matmul(nodes.Wq, z);
    const Tape::NodeId k = tape.matmul(nodes.Wk, z);
    const Tape::NodeId v = tape.matmul(nodes.Wv, z);

    Tape::NodeId stacked = -1;
    for (int h = 0; h < nodes.heads; ++h) {
        const int r0 = h * dh, r1 = (h + 1) * dh;
        const Tape::NodeId qh = tape.slice_rows(q, r0, r1);
        const Tape::NodeId kh = tape.slice_rows(k, r0, r1);
        const Tape::NodeId vh = tape.slice_rows(v, r0, r1);
        const Tape::NodeId attn =
            tape.softmax_columns(tape.scale(tape.matmul(tape.transpose(kh), qh), inv_sqrt_dh));
        const Tape::NodeId out = tape.matmul(vh, attn);
        stacked = h == 0 ? out : tape.vstack(stacked, out);
    }

    const Tape::NodeId z1 = tape.add(z, tape.matmul(nodes.Wo, stacked));
    const Tape::NodeId ffn = tape.matmul(nodes.W2, tape.relu(tape.matmul(nodes.W1, z1)));
    return tape.add(z1, ffn);
}

}  // namespace scdiff
