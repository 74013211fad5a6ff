#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scdiff/baseline.hpp"
#include "scdiff/diffusion.hpp"
#include "scdiff/matrix.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/tape.hpp"
#include "scdiff/whitebox.hpp"

namespace scdiff {

enum class BlockKind { whitebox, baseline };

struct ModelConfig {
    int n_genes = 0;
    int patch = 16;     // p, genes per token
    int dim = 128;      // d, hidden width
    int depth = 6;      // N, block count
    int heads = 4;      // K
    int subspace = 32;  // p_sub (white-box only)
    BlockKind block = BlockKind::whitebox;
    double eta = 0.1;
    double lambda = 0.1;
    double eps_distortion = 0.5;

    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    /// Gene count padded up to the next multiple of the patch size.
    int padded_genes() const { return (n_genes + patch - 1) / patch * patch; }
    int tokens() const { return padded_genes() / patch; }
    void validate() const;
};

// ---- patch and embedding ops ----

/// Zero-pad a column vector to the next multiple of p.
Matrix pad_to_multiple(const Matrix& x, int p);

/// Reshape an (n x 1) vector into n/p patch rows; row i holds genes
/// [i*p, (i+1)*p). Requires n divisible by p (pad first).
Matrix patchify(const Matrix& x, int p);

/// Inverse of patchify: tokens x p back to a column vector.
Matrix unpatchify(const Matrix& patches);

/// Affine map of each patch row into d dims: W (d x p) patches^T + b 1^T.
Matrix embed_tokens(const Matrix& patches, const Matrix& w, const Matrix& b);

/// Raw sinusoidal time features: half sines, half cosines over geometric
/// frequencies spanning rate 1 down to 1/10^4. Length d (even).
Matrix embed_time_sinusoidal(int t, int d);

// ---- the noise-prediction model ----

/// Noise predictor: patchify -> token embedding -> N blocks (time embedding
/// broadcast-added to every token at each block input) -> final affine layer
/// -> unpatchify. The final layer starts at zero so the untrained model
/// predicts zero noise.
class Model {
  public:
    Model() = default;
    Model(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    /// Deterministic forward pass on an (n_genes x 1) input.
    Matrix predict_noise(const Matrix& x_t, int t) const;

    /// Closure satisfying the NoisePredictor interface.
    NoisePredictor predictor() const;

    /// Parameter leaves registered on a tape, reused across samples.
    struct Binding {
        Tape::NodeId embed_w, embed_b;
        Tape::NodeId time_w1, time_b1, time_w2, time_b2;
        Tape::NodeId final_w, final_b;
        std::vector<WhiteBoxBlockNodes> wb_blocks;
        std::vector<BaselineBlockNodes> base_blocks;
    };
    Binding bind(Tape& tape) const;

    /// Differentiable forward; returns the (n_genes x 1) prediction node.
    /// Identical op order to predict_noise, so values match exactly.
    Tape::NodeId forward_on_tape(Tape& tape, const Binding& binding, const Matrix& x_t,
                                 int t) const;

    /// Binding node ids in for_each_param order (gradient collection).
    std::vector<Tape::NodeId> binding_ids(const Binding& binding) const;

    /// Visit every parameter matrix in a fixed order (checkpoint order).
    void for_each_param(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    int64_t total_parameter_count() const;
    /// Parameters of a single block (0 when depth is 0).
    int64_t block_parameter_count() const;

    const WhiteBoxBlockParams& whitebox_block(int i) const { return wb_blocks_[i]; }
    const BaselineBlockParams& baseline_block(int i) const { return base_blocks_[i]; }

  private:
    Matrix time_embedding(int t) const;

    ModelConfig cfg_;
    Matrix embed_w_, embed_b_;
    Matrix time_w1_, time_b1_, time_w2_, time_b2_;
    Matrix final_w_, final_b_;
    std::vector<WhiteBoxBlockParams> wb_blocks_;
    std::vector<BaselineBlockParams> base_blocks_;
};

/// Orthonormal-column basis from the QR of a Gaussian draw.
Matrix orthonormal_basis(int rows, int cols, Rng& rng);

const char* block_kind_name(BlockKind kind);
BlockKind block_kind_from_name(const std::string& name);

}  // namespace scdiff
