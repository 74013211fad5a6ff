#include "scdiff/model.hpp"

#include <cmath>
#include <string>

#include "scdiff/error.hpp"

namespace scdiff {

void ModelConfig::validate() const {
    if (n_genes < 1) throw ConfigError("model: n_genes must be >= 1");
    if (patch < 1) throw ConfigError("model: patch size must be >= 1");
    if (dim < 2 || dim % 2 != 0) throw ConfigError("model: hidden dim must be even and >= 2");
    if (depth < 0) throw ConfigError("model: depth must be >= 0");
    if (heads < 1) throw ConfigError("model: heads must be >= 1");
    if (block == BlockKind::baseline && dim % heads != 0)
        throw ConfigError("model: hidden dim must be divisible by heads");
    if (block == BlockKind::whitebox && (subspace < 1 || subspace > dim))
        throw ConfigError("model: subspace dim must be in [1, dim]");
    if (eta <= 0.0) throw ConfigError("model: eta must be > 0");
    if (lambda < 0.0) throw ConfigError("model: lambda must be >= 0");
    if (eps_distortion <= 0.0) throw ConfigError("model: eps_distortion must be > 0");
}

Matrix pad_to_multiple(const Matrix& x, int p) {
    if (x.cols() != 1) throw ShapeError("pad_to_multiple: expected a column vector");
    const int n = x.rows();
    const int padded = (n + p - 1) / p * p;
    if (padded == n) return x;
    Matrix out(padded, 1);
    for (int i = 0; i < n; ++i) out(i, 0) = x(i, 0);
    return out;
}

Matrix patchify(const Matrix& x, int p) {
    if (x.cols() != 1) throw ShapeError("patchify: expected a column vector");
    if (p < 1 || x.rows() % p != 0) throw ShapeError("patchify: length not divisible by patch size");
    const int tokens = x.rows() / p;
    Matrix out(tokens, p);
    for (int i = 0; i < tokens; ++i)
        for (int j = 0; j < p; ++j) out(i, j) = x(i * p + j, 0);
    return out;
}

Matrix unpatchify(const Matrix& patches) {
    Matrix out(patches.rows() * patches.cols(), 1);
    for (int i = 0; i < patches.rows(); ++i)
        for (int j = 0; j < patches.cols(); ++j) out(i * patches.cols() + j, 0) = patches(i, j);
    return out;
}

Matrix embed_tokens(const Matrix& patches, const Matrix& w, const Matrix& b) {
    if (w.cols() != patches.cols()) throw ShapeError("embed_tokens: W cols must equal patch size");
    if (b.rows() != w.rows() || b.cols() != 1) throw ShapeError("embed_tokens: bad bias shape");
    Matrix z = matmul(w, transpose(patches));  // d x tokens
    for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) z(i, j) += b(i, 0);
    return z;
}

Matrix embed_time_sinusoidal(int t, int d) {
    if (t < 0) throw ConfigError("embed_time: t must be >= 0");
    if (d < 2 || d % 2 != 0) throw ShapeError("embed_time: dim must be even and >= 2");
    const int half = d / 2;
    Matrix out(d, 1);
    for (int i = 0; i < half; ++i) {
        const double expo = half == 1 ? 0.0 : static_cast<double>(i) / (half - 1);
        const double rate = std::pow(10000.0, -expo);
        const double theta = t * rate;
        out(i, 0) = std::sin(theta);
        out(half + i, 0) = std::cos(theta);
    }
    return out;
}

Matrix orthonormal_basis(int rows, int cols, Rng& rng) {
    if (cols > rows) throw ShapeError("orthonormal_basis: cols must be <= rows");
    Matrix a = rng.gaussian_matrix(rows, cols);
    // Modified Gram-Schmidt with one re-orthogonalization pass.
    for (int j = 0; j < cols; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < j; ++k) {
                double dot = 0.0;
                for (int i = 0; i < rows; ++i) dot += a(i, k) * a(i, j);
                for (int i = 0; i < rows; ++i) a(i, j) -= dot * a(i, k);
            }
        }
        double norm = 0.0;
        for (int i = 0; i < rows; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw NumericError("orthonormal_basis: degenerate draw");
        for (int i = 0; i < rows; ++i) a(i, j) /= norm;
    }
    return a;
}

Model::Model(ModelConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.dim;
    const int p = cfg_.patch;

    embed_w_ = scale(rng.gaussian_matrix(d, p), 1.0 / std::sqrt(static_cast<double>(p)));
    embed_b_ = Matrix(d, 1);
    time_w1_ = scale(rng.gaussian_matrix(d, d), std::sqrt(2.0 / d));
    time_b1_ = Matrix(d, 1);
    time_w2_ = scale(rng.gaussian_matrix(d, d), std::sqrt(2.0 / d));
    time_b2_ = Matrix(d, 1);
    // Zero-initialized final layer: the untrained model predicts zero noise.
    final_w_ = Matrix(p, d);
    final_b_ = Matrix(p, 1);

    if (cfg_.block == BlockKind::whitebox) {
        wb_blocks_.resize(cfg_.depth);
        for (auto& blk : wb_blocks_) {
            blk.eta = cfg_.eta;
            blk.lambda = cfg_.lambda;
            blk.U.resize(cfg_.heads);
            for (auto& u_k : blk.U) u_k = orthonormal_basis(d, cfg_.subspace, rng);
            blk.D = scale(rng.gaussian_matrix(d, d), std::sqrt(2.0 / d));  // kaiming
        }
    } else {
        base_blocks_.resize(cfg_.depth);
        for (auto& blk : base_blocks_) {
            blk.heads = cfg_.heads;
            const double proj = 1.0 / std::sqrt(static_cast<double>(d));
            blk.Wq = scale(rng.gaussian_matrix(d, d), proj);
            blk.Wk = scale(rng.gaussian_matrix(d, d), proj);
            blk.Wv = scale(rng.gaussian_matrix(d, d), proj);
            blk.Wo = scale(rng.gaussian_matrix(d, d), proj);
            blk.W1 = scale(rng.gaussian_matrix(4 * d, d), std::sqrt(2.0 / d));
            blk.W2 = scale(rng.gaussian_matrix(d, 4 * d), 1.0 / std::sqrt(4.0 * d));
        }
    }
}

Matrix Model::time_embedding(int t) const {
    const Matrix s = embed_time_sinusoidal(t, cfg_.dim);
    Matrix h(cfg_.dim, 1);
    {
        Matrix pre = matmul(time_w1_, s);
        for (int i = 0; i < cfg_.dim; ++i) pre(i, 0) += time_b1_(i, 0);
        h = relu(pre);
    }
    Matrix out = matmul(time_w2_, h);
    for (int i = 0; i < cfg_.dim; ++i) out(i, 0) += time_b2_(i, 0);
    return out;
}

Matrix Model::predict_noise(const Matrix& x_t, int t) const {
    if (x_t.cols() != 1 || x_t.rows() != cfg_.n_genes)
        throw ShapeError("predict_noise: expected an n_genes x 1 input");

    const Matrix patches = patchify(pad_to_multiple(x_t, cfg_.patch), cfg_.patch);
    Matrix z = embed_tokens(patches, embed_w_, embed_b_);
    const Matrix temb = time_embedding(t);
    const CodingRateConfig rate_cfg{cfg_.eps_distortion};

    for (int l = 0; l < cfg_.depth; ++l) {
        Matrix zin = z;
        for (int i = 0; i < zin.rows(); ++i)
            for (int j = 0; j < zin.cols(); ++j) zin(i, j) += temb(i, 0);
        z = cfg_.block == BlockKind::whitebox ? whitebox_layer(zin, wb_blocks_[l], rate_cfg)
                                              : baseline_layer(zin, base_blocks_[l]);
    }

    Matrix out = matmul(final_w_, z);  // p x tokens
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out(i, j) += final_b_(i, 0);

    Matrix flat = unpatchify(transpose(out));
    if (flat.rows() == cfg_.n_genes) return flat;
    Matrix trimmed(cfg_.n_genes, 1);
    for (int i = 0; i < cfg_.n_genes; ++i) trimmed(i, 0) = flat(i, 0);
    return trimmed;
}

NoisePredictor Model::predictor() const {
    return [this](const Matrix& x_t, int t) { return predict_noise(x_t, t); };
}

Model::Binding Model::bind(Tape& tape) const {
    Binding b;
    b.embed_w = tape.leaf(embed_w_);
    b.embed_b = tape.leaf(embed_b_);
    b.time_w1 = tape.leaf(time_w1_);
    b.time_b1 = tape.leaf(time_b1_);
    b.time_w2 = tape.leaf(time_w2_);
    b.time_b2 = tape.leaf(time_b2_);
    b.final_w = tape.leaf(final_w_);
    b.final_b = tape.leaf(final_b_);
    for (const auto& blk : wb_blocks_) {
        WhiteBoxBlockNodes nodes;
        for (const auto& u_k : blk.U) nodes.U.push_back(tape.leaf(u_k));
        nodes.D = tape.leaf(blk.D);
        b.wb_blocks.push_back(std::move(nodes));
    }
    for (const auto& blk : base_blocks_) {
        BaselineBlockNodes nodes;
        nodes.Wq = tape.leaf(blk.Wq);
        nodes.Wk = tape.leaf(blk.Wk);
        nodes.Wv = tape.leaf(blk.Wv);
        nodes.Wo = tape.leaf(blk.Wo);
        nodes.W1 = tape.leaf(blk.W1);
        nodes.W2 = tape.leaf(blk.W2);
        nodes.heads = blk.heads;
        b.base_blocks.push_back(nodes);
    }
    return b;
}

Tape::NodeId Model::forward_on_tape(Tape& tape, const Binding& binding, const Matrix& x_t,
                                    int t) const {
    if (x_t.cols() != 1 || x_t.rows() != cfg_.n_genes)
        throw ShapeError("forward_on_tape: expected an n_genes x 1 input");

    const Matrix patches = patchify(pad_to_multiple(x_t, cfg_.patch), cfg_.patch);
    const int tokens = patches.rows();

    const Tape::NodeId patches_t = tape.leaf(transpose(patches));  // p x tokens
    Tape::NodeId z = tape.add(tape.matmul(binding.embed_w, patches_t),
                              tape.broadcast_columns(binding.embed_b, tokens));

    const Tape::NodeId sinus = tape.leaf(embed_time_sinusoidal(t, cfg_.dim));
    const Tape::NodeId hidden =
        tape.relu(tape.add(tape.matmul(binding.time_w1, sinus), binding.time_b1));
    const Tape::NodeId temb = tape.add(tape.matmul(binding.time_w2, hidden), binding.time_b2);
    const Tape::NodeId temb_cols = tape.broadcast_columns(temb, tokens);

    const CodingRateConfig rate_cfg{cfg_.eps_distortion};
    for (int l = 0; l < cfg_.depth; ++l) {
        const Tape::NodeId zin = tape.add(z, temb_cols);
        z = cfg_.block == BlockKind::whitebox
                ? whitebox_layer_on_tape(tape, zin, binding.wb_blocks[l], rate_cfg, cfg_.eta,
                                         cfg_.lambda)
                : baseline_layer_on_tape(tape, zin, binding.base_blocks[l]);
    }

    Tape::NodeId out = tape.add(tape.matmul(binding.final_w, z),
                                tape.broadcast_columns(binding.final_b, tokens));
    Tape::NodeId flat = tape.reshape(tape.transpose(out), cfg_.padded_genes(), 1);
    if (cfg_.padded_genes() != cfg_.n_genes) flat = tape.slice_rows(flat, 0, cfg_.n_genes);
    return flat;
}

std::vector<Tape::NodeId> Model::binding_ids(const Binding& b) const {
    // Must mirror for_each_param order exactly.
    std::vector<Tape::NodeId> ids = {b.embed_w, b.embed_b, b.time_w1, b.time_b1,
                                     b.time_w2, b.time_b2};
    for (const auto& blk : b.wb_blocks) {
        for (const Tape::NodeId u_k : blk.U) ids.push_back(u_k);
        ids.push_back(blk.D);
    }
    for (const auto& blk : b.base_blocks) {
        ids.push_back(blk.Wq);
        ids.push_back(blk.Wk);
        ids.push_back(blk.Wv);
        ids.push_back(blk.Wo);
        ids.push_back(blk.W1);
        ids.push_back(blk.W2);
    }
    ids.push_back(b.final_w);
    ids.push_back(b.final_b);
    return ids;
}

void Model::for_each_param(const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("embed.w", embed_w_);
    fn("embed.b", embed_b_);
    fn("time.w1", time_w1_);
    fn("time.b1", time_b1_);
    fn("time.w2", time_w2_);
    fn("time.b2", time_b2_);
    for (size_t l = 0; l < wb_blocks_.size(); ++l) {
        const std::string prefix = "block" + std::to_string(l) + ".";
        for (size_t k = 0; k < wb_blocks_[l].U.size(); ++k)
            fn(prefix + "u" + std::to_string(k), wb_blocks_[l].U[k]);
        fn(prefix + "d", wb_blocks_[l].D);
    }
    for (size_t l = 0; l < base_blocks_.size(); ++l) {
        const std::string prefix = "block" + std::to_string(l) + ".";
        fn(prefix + "wq", base_blocks_[l].Wq);
        fn(prefix + "wk", base_blocks_[l].Wk);
        fn(prefix + "wv", base_blocks_[l].Wv);
        fn(prefix + "wo", base_blocks_[l].Wo);
        fn(prefix + "w1", base_blocks_[l].W1);
        fn(prefix + "w2", base_blocks_[l].W2);
    }
    fn("final.w", final_w_);
    fn("final.b", final_b_);
}

void Model::for_each_param(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<Model*>(this)->for_each_param(
        [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

int64_t Model::total_parameter_count() const {
    int64_t total = 0;
    for_each_param([&total](const std::string&, const Matrix& m) {
        total += static_cast<int64_t>(m.size());
    });
    return total;
}

int64_t Model::block_parameter_count() const {
    if (!wb_blocks_.empty()) return parameter_count(wb_blocks_.front());
    if (!base_blocks_.empty()) return parameter_count(base_blocks_.front());
    return 0;
}

const char* block_kind_name(BlockKind kind) {
    return kind == BlockKind::whitebox ? "whitebox" : "baseline";
}

BlockKind block_kind_from_name(const std::string& name) {
    if (name == "whitebox") return BlockKind::whitebox;
    if (name == "baseline") return BlockKind::baseline;
    throw ConfigError("unknown block kind: " + name);
}

}  // namespace scdiff
