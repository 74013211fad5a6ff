#include "scdiff/kvconfig.hpp"

#include <cstdlib>
#include <fstream>

#include "scdiff/error.hpp"

namespace scdiff {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

}  // namespace

KvConfig KvConfig::defaults() {
    KvConfig c;
    auto str = [&c](const char* k, const char* v) { c.entries_[k] = {Type::string, v}; };
    auto num = [&c](const char* k, const char* v) { c.entries_[k] = {Type::integer, v}; };
    auto real = [&c](const char* k, const char* v) { c.entries_[k] = {Type::real, v}; };
    auto u64 = [&c](const char* k, const char* v) { c.entries_[k] = {Type::unsigned64, v}; };

    num("threads", "1");
    u64("seed", "17");
    str("out", "out");

    str("model.block", "whitebox");
    num("model.patch", "16");
    num("model.dim", "128");
    num("model.depth", "6");
    num("model.heads", "4");
    num("model.subspace", "32");
    real("model.eta", "0.1");
    real("model.lambda", "0.1");
    real("model.distortion", "0.5");

    num("schedule.steps", "1000");
    real("schedule.beta_start", "1e-4");
    real("schedule.beta_end", "0.02");

    str("train.data", "");
    num("train.epochs", "-1");  // -1 = pick by dataset-size tier
    num("train.batch", "64");
    real("train.lr", "1e-4");
    real("train.adam_beta1", "0.9");
    real("train.adam_beta2", "0.999");
    real("train.adam_eps", "1e-8");
    real("train.grad_clip", "0");
    num("train.checkpoint_every", "0");
    str("train.preprocess", "log1p,minmax");
    str("train.resume", "");

    str("gen.kind", "gaussian_mixture");
    num("gen.components", "2");
    num("gen.cells", "500");
    num("gen.genes", "8");
    str("gen.weights", "");
    real("gen.mean_scale", "2.0");
    real("gen.sigma", "0.5");
    real("gen.nb_dispersion", "2.0");
    real("gen.nb_mean_scale", "20.0");

    str("sample.checkpoint", "");
    num("sample.count", "500");
    str("sample.sampler", "ddpm");
    num("sample.steps", "100");
    real("sample.eta", "0");

    str("eval.real", "");
    str("eval.gen", "");
    num("eval.bins", "50");
    real("eval.bandwidth", "0");

    num("bench.epochs", "4");
    num("bench.cells", "48");
    num("bench.genes", "256");
    num("bench.batch", "16");
    num("bench.sample_count", "8");
    num("bench.ddim_steps", "100");
    return c;
}

void KvConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config " + path + ": line " + std::to_string(line_no) +
                              " is not key=value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void KvConfig::set(const std::string& key, const std::string& value) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
    // Parse eagerly so bad values are reported where they are set.
    const char* cstr = value.c_str();
    char* end = nullptr;
    switch (it->second.type) {
        case Type::string:
            break;
        case Type::integer:
            std::strtol(cstr, &end, 10);
            if (value.empty() || end != cstr + value.size())
                throw ConfigError("config key " + key + ": expected integer, got '" + value + "'");
            break;
        case Type::unsigned64:
            std::strtoull(cstr, &end, 10);
            if (value.empty() || end != cstr + value.size() || value.front() == '-')
                throw ConfigError("config key " + key + ": expected unsigned, got '" + value + "'");
            break;
        case Type::real:
            std::strtod(cstr, &end);
            if (value.empty() || end != cstr + value.size())
                throw ConfigError("config key " + key + ": expected number, got '" + value + "'");
            break;
    }
    it->second.value = value;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KvConfig::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
    return it->second.value;
}

int KvConfig::get_int(const std::string& key) const {
    return static_cast<int>(std::strtol(get_string(key).c_str(), nullptr, 10));
}

double KvConfig::get_double(const std::string& key) const {
    return std::strtod(get_string(key).c_str(), nullptr);
}

uint64_t KvConfig::get_u64(const std::string& key) const {
    return std::strtoull(get_string(key).c_str(), nullptr, 10);
}

std::string KvConfig::to_text() const {
    std::string out;
    for (const auto& [key, entry] : entries_) {
        out += key;
        out += "=";
        out += entry.value;
        out += "\n";
    }
    return out;
}

void KvConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << to_text();
}

}  // namespace scdiff
