#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "tp/errors.hpp"

namespace tp {

/// Flat key=value configuration text: one pair per line, '#' starts a
/// comment, whitespace around keys and values is ignored, later keys win.
struct Config {
    std::map<std::string, std::string> values;

    static std::string trim(const std::string& s) {
        const auto from = s.find_first_not_of(" \t\r");
        if (from == std::string::npos) return "";
        const auto to = s.find_last_not_of(" \t\r");
        return s.substr(from, to - from + 1);
    }

    static Config parse(std::istream& is) {
        Config cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            cfg.values[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file: " + path);
        return parse(is);
    }

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) throw ConfigError("config is missing required key: " + key);
        return it->second;
    }

    long long integer(const std::string& key, long long fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an integer: " + it->second);
        }
    }

    double real(const std::string& key, double fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not a number: " + it->second);
        }
    }

    bool boolean(const std::string& key, bool fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key " + key + " is not a boolean: " + v);
    }
};

}  // namespace tp
