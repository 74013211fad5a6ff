#pragma once

#include <string>
#include <vector>

#include "scdiff/data.hpp"
#include "scdiff/model.hpp"

namespace scdiff {

/// Adam first/second moments, aligned with Model::for_each_param order.
struct OptimizerState {
    long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    bool empty() const { return m.empty(); }
};

/// Everything needed to resume training or sample: architecture + schedule
/// config, all parameter matrices, the step counter, optimizer moments, the
/// training data's preprocessing record, and its gene names.
struct Checkpoint {
    ModelConfig config;
    Model model;
    OptimizerState opt;
    std::vector<TransformStep> transforms;
    std::vector<std::string> gene_names;
};

/// Single binary file, versioned magic header, doubles stored as IEEE-754
/// bit patterns in little-endian order: the round trip is bit-exact.
/// Layout is documented in docs/checkpoint_format.md.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace scdiff
