#include "scdiff/whitebox.hpp"

#include <string>

#include "scdiff/error.hpp"

namespace scdiff {

void WhiteBoxBlockParams::validate() const {
    if (U.empty()) throw ShapeError("whitebox: at least one subspace basis required");
    const int d = U.front().rows();
    const int p_sub = U.front().cols();
    if (p_sub < 1) throw ShapeError("whitebox: subspace dimension must be >= 1");
    for (const auto& u_k : U) {
        if (u_k.rows() != d || u_k.cols() != p_sub)
            throw ShapeError("whitebox: all subspace bases must share one d x p_sub shape");
    }
    if (D.rows() != d || D.cols() != d) throw ShapeError("whitebox: dictionary must be d x d");
    if (eta <= 0.0) throw ConfigError("whitebox: eta must be > 0");
    if (lambda < 0.0) throw ConfigError("whitebox: lambda must be >= 0");
}

double coding_rate(const Matrix& z, const CodingRateConfig& cfg) {
    if (!is_finite(z)) throw NumericError("coding_rate: non-finite input");
    const int n = z.cols();
    const double alpha = cfg.alpha_coef(z.rows(), n);
    Matrix gram = matmul(transpose(z), z);
    Matrix arg = add(Matrix::identity(n), scale(gram, alpha));
    return 0.5 * logdet_psd(arg);
}

double conditional_coding_rate(const Matrix& z, const std::vector<Matrix>& u,
                               const CodingRateConfig& cfg) {
    if (u.empty()) throw ShapeError("conditional_coding_rate: no subspaces");
    const int n = z.cols();
    const int p_sub = u.front().cols();
    const double beta = cfg.beta_coef(p_sub, n);
    double total = 0.0;
    for (const auto& u_k : u) {
        if (u_k.rows() != z.rows() || u_k.cols() != p_sub)
            throw ShapeError("conditional_coding_rate: basis shape mismatch");
        Matrix p = matmul(transpose(u_k), z);
        Matrix gram = matmul(transpose(p), p);
        Matrix arg = add(Matrix::identity(n), scale(gram, beta));
        total += 0.5 * logdet_psd(arg);
    }
    return total;
}

Matrix ssa(const Matrix& z, const Matrix& u_k) {
    if (u_k.rows() != z.rows()) throw ShapeError("ssa: basis rows must match feature dim");
    Matrix p = matmul(transpose(u_k), z);
    Matrix attn = softmax_columns(matmul(transpose(p), p));
    return matmul(p, attn);
}

Matrix mssa(const Matrix& z, const WhiteBoxBlockParams& params, const CodingRateConfig& cfg) {
    params.validate();
    const double beta = cfg.beta_coef(params.subspace_dim(), z.cols());
    Matrix out(z.rows(), z.cols());
    for (const auto& u_k : params.U) {
        out = add(out, matmul(u_k, ssa(z, u_k)));
    }
    return scale(out, beta);
}

Matrix mssa_residual(const Matrix& z, const WhiteBoxBlockParams& params,
                     const CodingRateConfig& cfg) {
    return add(z, mssa(z, params, cfg));
}

Matrix ista_step(const Matrix& z_half, const WhiteBoxBlockParams& params) {
    params.validate();
    if (params.D.cols() != z_half.rows()) throw ShapeError("ista_step: dictionary/features mismatch");
    Matrix residual = sub(matmul(params.D, z_half), z_half);
    Matrix pre = sub(z_half, scale(matmul(transpose(params.D), residual), params.eta));
    return relu(add_scalar(pre, -params.eta * params.lambda));
}

Matrix whitebox_layer(const Matrix& z, const WhiteBoxBlockParams& params,
                      const CodingRateConfig& cfg) {
    return ista_step(mssa_residual(z, params, cfg), params);
}

double sparse_rate_objective(const Matrix& z, const std::vector<Matrix>& u,
                             const CodingRateConfig& cfg, double lambda) {
    const double r = coding_rate(z, cfg);
    const double rc = conditional_coding_rate(z, u, cfg);
    const int nnz = count_nonzero(z, 1e-12);
    return r - rc - lambda * nnz;
}

Tape::NodeId mssa_on_tape(Tape& tape, Tape::NodeId z, const WhiteBoxBlockNodes& nodes,
                          const CodingRateConfig& cfg) {
    const int n = tape.value(z).cols();
    const int p_sub = tape.value(nodes.U.front()).cols();
    const double beta = cfg.beta_coef(p_sub, n);
    Tape::NodeId acc = -1;
    for (Tape::NodeId u_k : nodes.U) {
        const Tape::NodeId p = tape.matmul(tape.transpose(u_k), z);
        const Tape::NodeId attn = tape.softmax_columns(tape.matmul(tape.transpose(p), p));
        const Tape::NodeId head = tape.matmul(u_k, tape.matmul(p, attn));
        acc = acc < 0 ? head : tape.add(acc, head);
    }
    return tape.scale(acc, beta);
}

Tape::NodeId ista_on_tape(Tape& tape, Tape::NodeId z_half, const WhiteBoxBlockNodes& nodes,
                          double eta, double lambda) {
    const Tape::NodeId residual = tape.sub(tape.matmul(nodes.D, z_half), z_half);
    const Tape::NodeId step = tape.matmul(tape.transpose(nodes.D), residual);
    const Tape::NodeId pre = tape.sub(z_half, tape.scale(step, eta));
    return tape.relu(tape.add_scalar(pre, -eta * lambda));
}

Tape::NodeId whitebox_layer_on_tape(Tape& tape, Tape::NodeId z, const WhiteBoxBlockNodes& nodes,
                                    const CodingRateConfig& cfg, double eta, double lambda) {
    const Tape::NodeId z_half = tape.add(z, mssa_on_tape(tape, z, nodes, cfg));
    return ista_on_tape(tape, z_half, nodes, eta, lambda);
}

}  // namespace scdiff
