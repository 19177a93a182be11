/// @file config.hpp
/// Flat `key = value` configuration files with dotted section prefixes.
#pragma once

#include "rdlab/format.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace rdlab {

/// Parsed key/value pairs. Every getter marks its key as used so that
/// leftover (misspelled) keys can be reported.
class Config {
public:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static Config parse(std::istream& is, const std::string& origin = "<config>") {
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (c.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            c.values_[key] = trim(line.substr(eq + 1));
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config '" + path + "'");
        return parse(f, path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& def) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    std::string require_string(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required key '" + key + "'");
        return get_string(key, "");
    }

    static double to_double(const std::string& key, const std::string& v) {
        std::istringstream is(v);
        double d;
        std::string rest;
        if (!(is >> d) || (is >> rest)) throw ConfigError("key '" + key + "': '" + v + "' is not a number");
        return d;
    }

    double get_double(const std::string& key, double def) const {
        return has(key) ? to_double(key, get_string(key, "")) : (used_.insert(key), def);
    }
    double require_double(const std::string& key) const { return to_double(key, require_string(key)); }

    long get_int(const std::string& key, long def) const {
        const double d = get_double(key, static_cast<double>(def));
        if (d != static_cast<double>(static_cast<long>(d))) throw ConfigError("key '" + key + "' must be an integer");
        return static_cast<long>(d);
    }

    bool get_bool(const std::string& key, bool def) const {
        if (!has(key)) {
            used_.insert(key);
            return def;
        }
        std::string v = get_string(key, "");
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
        if (v == "false" || v == "no" || v == "off" || v == "0") return false;
        throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
    }

    /// Whitespace-separated numbers.
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def = {}) const {
        if (!has(key)) {
            used_.insert(key);
            return def;
        }
        std::vector<double> out;
        std::istringstream is(get_string(key, ""));
        std::string tok;
        while (is >> tok) out.push_back(to_double(key, tok));
        return out;
    }

    /// Comma-separated groups of whitespace-separated numbers.
    std::vector<std::vector<double>> get_groups(const std::string& key) const {
        std::vector<std::vector<double>> out;
        if (!has(key)) {
            used_.insert(key);
            return out;
        }
        std::stringstream ss(get_string(key, ""));
        std::string group;
        while (std::getline(ss, group, ',')) {
            std::istringstream is(group);
            std::vector<double> g;
            std::string tok;
            while (is >> tok) g.push_back(to_double(key, tok));
            if (!g.empty()) out.push_back(g);
        }
        return out;
    }

    /// Keys present in the file that no getter asked for.
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& kv : values_)
            if (!used_.count(kv.first)) out.push_back(kv.first);
        return out;
    }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

}  // namespace rdlab
