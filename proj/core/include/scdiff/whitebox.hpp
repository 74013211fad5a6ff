#pragma once

#include <vector>

#include "scdiff/matrix.hpp"
#include "scdiff/tape.hpp"

namespace scdiff {

/// Rate-distortion setting for the coding-rate functionals. The alpha/beta
/// scale factors are recomputed from the actual (d, n, p_sub) of every call.
struct CodingRateConfig {
    double eps_distortion = 0.5;

    double alpha_coef(int d, int n) const {
        return static_cast<double>(d) / (n * eps_distortion * eps_distortion);
    }
    double beta_coef(int p_sub, int n) const {
        return static_cast<double>(p_sub) / (n * eps_distortion * eps_distortion);
    }
};

/// Learned parameters of one white-box layer: K subspace bases (each
/// d x p_sub), a d x d dictionary, and the fixed step size / sparsity weight.
struct WhiteBoxBlockParams {
    std::vector<Matrix> U;
    Matrix D;
    double eta = 0.1;
    double lambda = 0.1;

    int head_count() const { return static_cast<int>(U.size()); }
    int subspace_dim() const { return U.empty() ? 0 : U.front().cols(); }
    void validate() const;
};

/// Coding rate R(Z) = 1/2 logdet(I + alpha Z^T Z), alpha = d / (n eps^2).
double coding_rate(const Matrix& z, const CodingRateConfig& cfg);

/// Conditional coding rate against the subspaces:
/// sum_k 1/2 logdet(I + beta (U_k^T Z)^T (U_k^T Z)), beta = p_sub / (n eps^2).
double conditional_coding_rate(const Matrix& z, const std::vector<Matrix>& u,
                               const CodingRateConfig& cfg);

/// Subspace self-attention for one head: P softmax_columns(P^T P), P = U_k^T Z.
Matrix ssa(const Matrix& z, const Matrix& u_k);

/// Multi-head aggregation: beta * sum_k U_k SSA(Z | U_k).
Matrix mssa(const Matrix& z, const WhiteBoxBlockParams& params, const CodingRateConfig& cfg);

/// Compression half-step Z + MSSA(Z).
Matrix mssa_residual(const Matrix& z, const WhiteBoxBlockParams& params,
                     const CodingRateConfig& cfg);

/// Sparsification step ReLU(Z - eta D^T (D Z - Z) - eta lambda).
Matrix ista_step(const Matrix& z_half, const WhiteBoxBlockParams& params);

/// One full layer: ista_step(mssa_residual(Z)).
Matrix whitebox_layer(const Matrix& z, const WhiteBoxBlockParams& params,
                      const CodingRateConfig& cfg);

/// Diagnostic sparse-rate-reduction value R(Z) - R^c(Z|U) - lambda ||Z||_0,
/// where ||Z||_0 counts entries with |z| > 1e-12.
double sparse_rate_objective(const Matrix& z, const std::vector<Matrix>& u,
                             const CodingRateConfig& cfg, double lambda);

// ---- tape (differentiable) variants ----

struct WhiteBoxBlockNodes {
    std::vector<Tape::NodeId> U;
    Tape::NodeId D;
};

Tape::NodeId mssa_on_tape(Tape& tape, Tape::NodeId z, const WhiteBoxBlockNodes& nodes,
                          const CodingRateConfig& cfg);
Tape::NodeId ista_on_tape(Tape& tape, Tape::NodeId z_half, const WhiteBoxBlockNodes& nodes,
                          double eta, double lambda);
Tape::NodeId whitebox_layer_on_tape(Tape& tape, Tape::NodeId z, const WhiteBoxBlockNodes& nodes,
                                    const CodingRateConfig& cfg, double eta, double lambda);

}  // namespace scdiff
