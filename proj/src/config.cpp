#include "pfl/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace pfl {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::string Config::get_str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key " + key);
    return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t Config::get_i64(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an integer: " + s);
    }
}

std::int64_t Config::get_i64(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_i64(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_str(key);
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an unsigned integer: " + s);
    }
}

double Config::get_f64(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: " + s);
    }
}

double Config::get_f64(const std::string& key, double fallback) const {
    return has(key) ? get_f64(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + s);
}

std::vector<double> Config::get_f64_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_list(get_str(key))) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " has a non-numeric item: " + item);
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
    return out;
}

std::vector<std::int64_t> Config::get_i64_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const std::string& item : split_list(get_str(key))) {
        try {
            out.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " has a non-integer item: " + item);
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
    return out;
}

std::vector<std::uint64_t> Config::get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (std::int64_t v : get_i64_list(key)) out.push_back(std::uint64_t(v));
    return out;
}

std::vector<std::string> Config::get_str_list(const std::string& key) const {
    const auto out = split_list(get_str(key));
    if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
    return out;
}

std::string Config::serialize() const {
    std::string out;
    std::string section;
    for (const auto& [key, value] : values_) {
        const std::size_t dot = key.find('.');
        const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += name + " = " + value + "\n";
    }
    return out;
}

}  // namespace pfl
