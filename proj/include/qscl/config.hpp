#pragma once

// Flat dotted-key configuration files: one "key = value" pair per line,
// full-line comments starting with '#'. Command-line overrides are applied by
// set() on top of the parsed file.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace qscl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig from_string(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            const size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected 'key = value', got: " + t);
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << f.rdbuf();
        return from_string(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }
    std::string get_string(const std::string& key, const std::string& def) const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        if (!has(key)) return def;
        return parse_double(key, get_string(key));
    }
    double get_double(const std::string& key) const { return parse_double(key, get_string(key)); }

    int64_t get_int(const std::string& key, int64_t def) const {
        if (!has(key)) return def;
        return parse_int(key, get_string(key));
    }
    int64_t get_int(const std::string& key) const { return parse_int(key, get_string(key)); }

    uint64_t get_u64(const std::string& key, uint64_t def) const {
        if (!has(key)) return def;
        try {
            return std::stoull(get_string(key));
        } catch (...) {
            throw ConfigError("config key " + key + ": not an unsigned integer");
        }
    }

    bool get_bool(const std::string& key, bool def) const {
        if (!has(key)) return def;
        const std::string v = get_string(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key " + key + ": not a boolean: " + v);
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    nlohmann::json echo() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    static std::string trim(const std::string& s) {
        const char* ws = " \t\r\n";
        const size_t b = s.find_first_not_of(ws);
        if (b == std::string::npos) return "";
        const size_t e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    }
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (...) {
            throw ConfigError("config key " + key + ": not a number: " + v);
        }
    }
    static int64_t parse_int(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const int64_t i = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return i;
        } catch (...) {
            throw ConfigError("config key " + key + ": not an integer: " + v);
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace qscl
