#include "scdiff/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "scdiff/error.hpp"

namespace scdiff {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<uint64_t>(v)); }

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(m.rows()));
    write_u32(out, static_cast<uint32_t>(m.cols()));
    for (size_t i = 0; i < m.size(); ++i) write_f64(out, m.data()[i]);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_string(std::istream& in) {
    const uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw IoError("checkpoint: truncated file");
    return s;
}

Matrix read_matrix(std::istream& in, std::string& name) {
    name = read_string(in);
    const int rows = static_cast<int>(read_u32(in));
    const int cols = static_cast<int>(read_u32(in));
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = read_f64(in);
    return m;
}

std::string config_to_text(const Checkpoint& ckpt) {
    std::ostringstream os;
    char buf[64];
    auto putf = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << key << "=" << buf << "\n";
    };
    const ModelConfig& c = ckpt.config;
    os << "n_genes=" << c.n_genes << "\n";
    os << "patch=" << c.patch << "\n";
    os << "dim=" << c.dim << "\n";
    os << "depth=" << c.depth << "\n";
    os << "heads=" << c.heads << "\n";
    os << "subspace=" << c.subspace << "\n";
    os << "block=" << block_kind_name(c.block) << "\n";
    putf("eta", c.eta);
    putf("lambda", c.lambda);
    putf("eps_distortion", c.eps_distortion);
    os << "schedule_steps=" << c.schedule_steps << "\n";
    putf("beta_start", c.beta_start);
    putf("beta_end", c.beta_end);
    os << "step=" << ckpt.opt.step << "\n";
    os << "genes=" << ckpt.gene_names.size() << "\n";
    for (size_t i = 0; i < ckpt.gene_names.size(); ++i)
        os << "gene." << i << "=" << ckpt.gene_names[i] << "\n";
    os << "transforms=" << ckpt.transforms.size() << "\n";
    for (size_t i = 0; i < ckpt.transforms.size(); ++i)
        os << "transform." << i << "="
           << (ckpt.transforms[i].kind == TransformKind::log1p ? "log1p" : "minmax") << "\n";
    return os.str();
}

std::map<std::string, std::string> parse_meta(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("checkpoint: missing field " + key);
    return it->second;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_string(out, config_to_text(ckpt));

    std::vector<std::pair<std::string, const Matrix*>> arrays;
    ckpt.model.for_each_param([&arrays](const std::string& name, const Matrix& m) {
        arrays.emplace_back("param." + name, &m);
    });
    for (size_t i = 0; i < ckpt.opt.m.size(); ++i) {
        arrays.emplace_back("adam.m." + std::to_string(i), &ckpt.opt.m[i]);
        arrays.emplace_back("adam.v." + std::to_string(i), &ckpt.opt.v[i]);
    }
    std::vector<Matrix> transform_params;
    transform_params.reserve(ckpt.transforms.size() * 2);
    for (size_t i = 0; i < ckpt.transforms.size(); ++i) {
        const TransformStep& step = ckpt.transforms[i];
        if (step.kind != TransformKind::minmax) continue;
        Matrix lo(1, static_cast<int>(step.lo.size()));
        Matrix hi(1, static_cast<int>(step.hi.size()));
        for (size_t j = 0; j < step.lo.size(); ++j) {
            lo(0, static_cast<int>(j)) = step.lo[j];
            hi(0, static_cast<int>(j)) = step.hi[j];
        }
        transform_params.push_back(std::move(lo));
        transform_params.push_back(std::move(hi));
        arrays.emplace_back("transform." + std::to_string(i) + ".lo",
                            &transform_params[transform_params.size() - 2]);
        arrays.emplace_back("transform." + std::to_string(i) + ".hi",
                            &transform_params[transform_params.size() - 1]);
    }

    write_u32(out, static_cast<uint32_t>(arrays.size()));
    for (const auto& [name, m] : arrays) write_matrix(out, name, *m);
    if (!out) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    const uint32_t version = read_u32(in);
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));

    const auto kv = parse_meta(read_string(in));

    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    c.n_genes = std::stoi(need(kv, "n_genes"));
    c.patch = std::stoi(need(kv, "patch"));
    c.dim = std::stoi(need(kv, "dim"));
    c.depth = std::stoi(need(kv, "depth"));
    c.heads = std::stoi(need(kv, "heads"));
    c.subspace = std::stoi(need(kv, "subspace"));
    c.block = block_kind_from_name(need(kv, "block"));
    c.eta = std::stod(need(kv, "eta"));
    c.lambda = std::stod(need(kv, "lambda"));
    c.eps_distortion = std::stod(need(kv, "eps_distortion"));
    c.schedule_steps = std::stoi(need(kv, "schedule_steps"));
    c.beta_start = std::stod(need(kv, "beta_start"));
    c.beta_end = std::stod(need(kv, "beta_end"));
    ckpt.opt.step = std::stol(need(kv, "step"));

    const size_t gene_count = std::stoul(need(kv, "genes"));
    ckpt.gene_names.resize(gene_count);
    for (size_t i = 0; i < gene_count; ++i)
        ckpt.gene_names[i] = need(kv, "gene." + std::to_string(i));

    const size_t transform_count = std::stoul(need(kv, "transforms"));
    ckpt.transforms.resize(transform_count);
    for (size_t i = 0; i < transform_count; ++i) {
        const std::string& kind = need(kv, "transform." + std::to_string(i));
        ckpt.transforms[i].kind = kind == "log1p" ? TransformKind::log1p : TransformKind::minmax;
    }

    // Fresh model with the right architecture, weights overwritten below.
    Rng init_rng(0);
    ckpt.model = Model(c, init_rng);

    std::map<std::string, Matrix> arrays;
    const uint32_t count = read_u32(in);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name;
        Matrix m = read_matrix(in, name);
        arrays.emplace(std::move(name), std::move(m));
    }

    size_t param_index = 0;
    ckpt.model.for_each_param([&](const std::string& name, Matrix& m) {
        const auto it = arrays.find("param." + name);
        if (it == arrays.end()) throw IoError("checkpoint: missing parameter " + name);
        if (!it->second.same_shape(m)) throw IoError("checkpoint: shape mismatch for " + name);
        m = it->second;
        const auto mit = arrays.find("adam.m." + std::to_string(param_index));
        const auto vit = arrays.find("adam.v." + std::to_string(param_index));
        if (mit != arrays.end() && vit != arrays.end()) {
            ckpt.opt.m.push_back(mit->second);
            ckpt.opt.v.push_back(vit->second);
        }
        ++param_index;
    });

    for (size_t i = 0; i < ckpt.transforms.size(); ++i) {
        if (ckpt.transforms[i].kind != TransformKind::minmax) continue;
        const auto lo = arrays.find("transform." + std::to_string(i) + ".lo");
        const auto hi = arrays.find("transform." + std::to_string(i) + ".hi");
        if (lo == arrays.end() || hi == arrays.end())
            throw IoError("checkpoint: missing minmax record " + std::to_string(i));
        const Matrix& lom = lo->second;
        const Matrix& him = hi->second;
        ckpt.transforms[i].lo.resize(lom.size());
        ckpt.transforms[i].hi.resize(him.size());
        for (int j = 0; j < lom.cols(); ++j) {
            ckpt.transforms[i].lo[j] = lom(0, j);
            ckpt.transforms[i].hi[j] = him(0, j);
        }
    }
    return ckpt;
}

}  // namespace scdiff
