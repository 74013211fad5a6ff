#include "scdiff/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scdiff/error.hpp"
#include "scdiff/rng.hpp"

namespace scdiff {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_field(const std::string& field, int line_no) {
    std::string trimmed = field;
    while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t')) trimmed.erase(trimmed.begin());
    while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t' || trimmed.back() == '\r'))
        trimmed.pop_back();
    if (trimmed.empty()) throw DataError("csv: blank field on line " + std::to_string(line_no));
    char* end = nullptr;
    const double v = std::strtod(trimmed.c_str(), &end);
    if (end != trimmed.c_str() + trimmed.size())
        throw DataError("csv: non-numeric field '" + trimmed + "' on line " + std::to_string(line_no));
    if (!std::isfinite(v)) throw DataError("csv: non-finite value on line " + std::to_string(line_no));
    return v;
}

}  // namespace

ExpressionMatrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    ExpressionMatrix m;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    std::vector<double> values;
    int cells = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!have_header) {
            for (auto& name : split_csv_line(line)) {
                while (!name.empty() && (name.back() == ' ' || name.back() == '\r')) name.pop_back();
                if (name.empty()) throw DataError("csv: empty gene name on line " + std::to_string(line_no));
                m.gene_names.push_back(name);
            }
            have_header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != m.gene_names.size()) {
            throw DataError("csv: line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(m.gene_names.size()));
        }
        for (const auto& f : fields) values.push_back(parse_field(f, line_no));
        ++cells;
    }
    if (!have_header) throw DataError("csv: missing header in " + path);
    if (cells == 0) throw DataError("csv: no cells in " + path);

    const int genes = static_cast<int>(m.gene_names.size());
    m.values = Matrix(cells, genes);
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < genes; ++j) m.values(i, j) = values[static_cast<size_t>(i) * genes + j];
    return m;
}

void save_csv(const std::string& path, const ExpressionMatrix& m,
              const std::vector<std::string>& comments) {
    if (static_cast<int>(m.gene_names.size()) != m.genes())
        throw DataError("save_csv: gene name count differs from column count");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& c : comments) out << "# " << c << "\n";
    for (int j = 0; j < m.genes(); ++j) out << (j ? "," : "") << m.gene_names[j];
    out << "\n";
    char buf[64];
    for (int i = 0; i < m.cells(); ++i) {
        for (int j = 0; j < m.genes(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m.values(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<TransformKind> parse_transform_list(const std::string& spec) {
    std::vector<TransformKind> steps;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "log1p") {
            steps.push_back(TransformKind::log1p);
        } else if (item == "minmax") {
            steps.push_back(TransformKind::minmax);
        } else if (item == "none") {
            // explicit no-op
        } else {
            throw ConfigError("unknown preprocess step: " + item);
        }
    }
    return steps;
}

void preprocess(ExpressionMatrix& m, const std::vector<TransformKind>& steps) {
    for (const TransformKind kind : steps) {
        TransformStep step;
        step.kind = kind;
        if (kind == TransformKind::log1p) {
            for (size_t i = 0; i < m.values.size(); ++i) {
                const double x = m.values.data()[i];
                if (x <= -1.0) throw DataError("log1p: value <= -1 cannot be transformed");
                m.values.data()[i] = std::log1p(x);
            }
        } else {
            step.lo.resize(m.genes());
            step.hi.resize(m.genes());
            for (int j = 0; j < m.genes(); ++j) {
                double lo = m.values(0, j), hi = m.values(0, j);
                for (int i = 1; i < m.cells(); ++i) {
                    lo = std::min(lo, m.values(i, j));
                    hi = std::max(hi, m.values(i, j));
                }
                step.lo[j] = lo;
                step.hi[j] = hi;
                for (int i = 0; i < m.cells(); ++i) {
                    // Degenerate (constant) gene maps to 0; the range record
                    // restores the constant on inversion.
                    m.values(i, j) = hi > lo ? 2.0 * (m.values(i, j) - lo) / (hi - lo) - 1.0 : 0.0;
                }
            }
        }
        m.transform_record.push_back(std::move(step));
    }
}

Matrix inverse_transform(const Matrix& rows, const std::vector<TransformStep>& record) {
    Matrix out = rows;
    for (auto it = record.rbegin(); it != record.rend(); ++it) {
        if (it->kind == TransformKind::log1p) {
            for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::expm1(out.data()[i]);
        } else {
            if (static_cast<int>(it->lo.size()) != out.cols())
                throw ShapeError("inverse_transform: gene count differs from record");
            for (int j = 0; j < out.cols(); ++j) {
                const double lo = it->lo[j], hi = it->hi[j];
                for (int i = 0; i < out.rows(); ++i) {
                    out(i, j) = hi > lo ? lo + (out(i, j) + 1.0) * 0.5 * (hi - lo) : lo;
                }
            }
        }
    }
    return out;
}

const char* mixture_kind_name(MixtureKind kind) {
    return kind == MixtureKind::gaussian ? "gaussian_mixture" : "negbinomial_mixture";
}

MixtureKind mixture_kind_from_name(const std::string& name) {
    if (name == "gaussian_mixture" || name == "gaussian") return MixtureKind::gaussian;
    if (name == "negbinomial_mixture" || name == "negbinomial") return MixtureKind::negbinomial;
    throw ConfigError("unknown mixture kind: " + name);
}

void SyntheticSpec::validate() const {
    if (components < 1) throw ConfigError("synthetic: components must be >= 1");
    if (genes < 1) throw ConfigError("synthetic: genes must be >= 1");
    if (cells < 1) throw ConfigError("synthetic: cells must be >= 1");
    if (!weights.empty()) {
        if (static_cast<int>(weights.size()) != components)
            throw ConfigError("synthetic: weight count differs from components");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigError("synthetic: negative component weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synthetic: weights must sum to 1");
    }
    if (!means.empty() && static_cast<int>(means.size()) != components)
        throw ConfigError("synthetic: means count differs from components");
    for (const auto& mu : means)
        if (static_cast<int>(mu.size()) != genes)
            throw ConfigError("synthetic: mean vector length differs from genes");
    if (!sigmas.empty() && static_cast<int>(sigmas.size()) != components)
        throw ConfigError("synthetic: sigma count differs from components");
    if (kind == MixtureKind::negbinomial && nb_dispersion <= 0.0)
        throw ConfigError("synthetic: nb_dispersion must be > 0");
}

ExpressionMatrix generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::vector<double> weights = spec.weights;
    if (weights.empty()) weights.assign(spec.components, 1.0 / spec.components);

    // Component parameters: explicit if given, otherwise drawn from the seed.
    std::vector<std::vector<double>> means = spec.means;
    if (means.empty()) {
        means.resize(spec.components, std::vector<double>(spec.genes));
        for (auto& mu : means)
            for (auto& v : mu)
                v = spec.kind == MixtureKind::gaussian
                        ? spec.mean_scale * rng.gaussian()
                        : spec.nb_mean_scale * (0.2 + rng.uniform());
    }
    std::vector<std::vector<double>> sigmas = spec.sigmas;
    if (sigmas.empty() && spec.kind == MixtureKind::gaussian)
        sigmas.resize(spec.components, std::vector<double>(spec.genes, spec.sigma));

    ExpressionMatrix m;
    m.values = Matrix(spec.cells, spec.genes);
    m.labels.resize(spec.cells);
    m.gene_names.resize(spec.genes);
    for (int j = 0; j < spec.genes; ++j) m.gene_names[j] = "g" + std::to_string(j);

    for (int i = 0; i < spec.cells; ++i) {
        const double u = rng.uniform();
        int comp = 0;
        double acc = 0.0;
        for (int c = 0; c < spec.components; ++c) {
            acc += weights[c];
            if (u < acc) {
                comp = c;
                break;
            }
            comp = c;
        }
        m.labels[i] = comp;
        for (int j = 0; j < spec.genes; ++j) {
            if (spec.kind == MixtureKind::gaussian) {
                m.values(i, j) = rng.gaussian(means[comp][j], sigmas[comp][j]);
            } else {
                // Gamma-Poisson draw: NB with mean mu, dispersion r.
                const double mu = means[comp][j];
                const double r = spec.nb_dispersion;
                const double lam = rng.gamma(r, mu / r);
                m.values(i, j) = static_cast<double>(rng.poisson(lam));
            }
        }
    }
    return m;
}

}  // namespace scdiff
