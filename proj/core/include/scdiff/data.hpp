#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scdiff/matrix.hpp"

namespace scdiff {

enum class TransformKind { log1p, minmax };

/// One applied preprocessing step with enough state to invert it.
/// minmax records the per-gene range; a degenerate gene (constant value)
/// maps to 0 and inverts back to that constant.
struct TransformStep {
    TransformKind kind = TransformKind::log1p;
    std::vector<double> lo;  // minmax only
    std::vector<double> hi;
};

/// Cells-by-genes expression values plus the metadata needed to round-trip
/// them: gene names, the preprocessing record, and (for synthetic data)
/// mixture component labels.
struct ExpressionMatrix {
    Matrix values;  // cells x genes
    std::vector<std::string> gene_names;
    std::vector<TransformStep> transform_record;
    std::vector<int> labels;

    int cells() const { return values.rows(); }
    int genes() const { return values.cols(); }
};

/// Parse a cells-x-genes CSV: optional leading '#' comment lines, a header
/// row of gene names, then one numeric row per cell. Malformed input is
/// rejected with the offending line number, never repaired.
ExpressionMatrix load_csv(const std::string& path);

/// Write values at full precision with the same header schema; comment lines
/// are emitted first, each prefixed with "# ".
void save_csv(const std::string& path, const ExpressionMatrix& m,
              const std::vector<std::string>& comments = {});

/// Parse "log1p,minmax"-style lists (empty string = no steps).
std::vector<TransformKind> parse_transform_list(const std::string& spec);

/// Apply steps in order, extending m.transform_record.
void preprocess(ExpressionMatrix& m, const std::vector<TransformKind>& steps);

/// Invert a recorded pipeline on generated rows (cells x genes).
Matrix inverse_transform(const Matrix& rows, const std::vector<TransformStep>& record);

enum class MixtureKind { gaussian, negbinomial };

const char* mixture_kind_name(MixtureKind kind);
MixtureKind mixture_kind_from_name(const std::string& name);

/// Seeded mixture dataset spec. Component means/sigmas may be given
/// explicitly; otherwise they are drawn deterministically from the seed.
struct SyntheticSpec {
    MixtureKind kind = MixtureKind::gaussian;
    int components = 2;
    int genes = 8;
    int cells = 500;
    uint64_t seed = 17;
    std::vector<double> weights;               // empty = uniform
    std::vector<std::vector<double>> means;    // [component][gene]
    std::vector<std::vector<double>> sigmas;   // gaussian only
    double mean_scale = 2.0;                   // scale of drawn means
    double sigma = 0.5;                        // gaussian: default stddev
    double nb_dispersion = 2.0;                // negbinomial: r
    double nb_mean_scale = 20.0;               // negbinomial: mean magnitude

    void validate() const;
};

/// Reproducible draw; component labels are kept in the result's `labels`.
ExpressionMatrix generate_synthetic(const SyntheticSpec& spec);

}  // namespace scdiff
