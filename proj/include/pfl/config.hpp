#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat sectioned key=value text format:
//   [section]
//   key = value          # comment
// Lists are comma separated. Keys are addressed as "section.key".
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::int64_t get_i64(const std::string& key) const;
    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_f64(const std::string& key) const;
    double get_f64(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_f64_list(const std::string& key) const;
    std::vector<std::int64_t> get_i64_list(const std::string& key) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key) const;
    std::vector<std::string> get_str_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // effective configuration, serialized back out for reproducibility
    std::string serialize() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace pfl
