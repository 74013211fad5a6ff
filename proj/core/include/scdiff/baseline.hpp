#pragma once

#include <cstdint>

#include "scdiff/matrix.hpp"
#include "scdiff/tape.hpp"
#include "scdiff/whitebox.hpp"

namespace scdiff {

/// Standard transformer block parameters: multi-head self-attention
/// projections plus a two-layer pointwise feedforward (expansion 4, no
/// biases so parameter comparisons against the white-box block stay clean).
struct BaselineBlockParams {
    Matrix Wq, Wk, Wv, Wo;  // d x d
    Matrix W1;              // 4d x d
    Matrix W2;              // d x 4d
    int heads = 1;

    void validate() const;
};

/// Z + MHSA(Z), then + FFN(.). Attention is scaled dot-product with
/// 1/sqrt(d/K) inside the softmax, column convention matching ssa.
Matrix baseline_layer(const Matrix& z, const BaselineBlockParams& params);

int64_t parameter_count(const BaselineBlockParams& params);
int64_t parameter_count(const WhiteBoxBlockParams& params);

struct BaselineBlockNodes {
    Tape::NodeId Wq, Wk, Wv, Wo, W1, W2;
    int heads = 1;
};

Tape::NodeId baseline_layer_on_tape(Tape& tape, Tape::NodeId z, const BaselineBlockNodes& nodes);

}  // namespace scdiff
