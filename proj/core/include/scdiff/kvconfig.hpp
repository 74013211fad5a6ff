#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace scdiff {

/// Flat key=value configuration: UTF-8 text, '#' comments, one scalar per
/// key. Every key is validated against the built-in schema; unknown keys are
/// errors, both in files and in command-line overrides.
class KvConfig {
  public:
    /// Schema defaults for every known key.
    static KvConfig defaults();

    /// Merge a config file over the current values.
    void load_file(const std::string& path);

    /// Set one key from text (validates the key and the value's type).
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;

    /// Fully resolved key=value text, sorted by key (provenance echo).
    std::string to_text() const;

    void save(const std::string& path) const;

  private:
    enum class Type { string, integer, real, unsigned64 };
    struct Entry {
        Type type;
        std::string value;
    };
    std::map<std::string, Entry> entries_;
};

}  // namespace scdiff
