#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fieldscout/common.hpp"

namespace fieldscout {

/// Sectioned key-value config file. Keys live under "[section]" headers and
/// repeated keys accumulate (used for synthetic blob lists). '#' and ';'
/// start comments. Parse errors carry file and line information.
class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static Config parse_string(const std::string& text, const std::string& name = "<config>") {
        Config cfg;
        cfg.name_ = name;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw validation_error(name + ":" + std::to_string(lineno) +
                                           ": unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw validation_error(name + ":" + std::to_string(lineno) +
                                       ": expected 'key = value'");
            std::string key = trim(s.substr(0, eq));
            std::string value = trim(s.substr(eq + 1));
            if (key.empty())
                throw validation_error(name + ":" + std::to_string(lineno) + ": empty key");
            std::string full = section.empty() ? key : section + "." + key;
            cfg.entries_[full].push_back({value, lineno});
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second.back().value;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        return parse_double(key, it->second.back());
    }

    int get_int(const std::string& key, int fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        const Entry& e = it->second.back();
        char* end = nullptr;
        long v = std::strtol(e.value.c_str(), &end, 10);
        if (end == e.value.c_str() || *end != '\0')
            throw validation_error(where(e) + ": expected integer for " + key + ", got '" +
                                   e.value + "'");
        return int(v);
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        const Entry& e = it->second.back();
        char* end = nullptr;
        unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
        if (end == e.value.c_str() || *end != '\0')
            throw validation_error(where(e) + ": expected integer for " + key + ", got '" +
                                   e.value + "'");
        return uint64_t(v);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        const Entry& e = it->second.back();
        if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
        if (e.value == "false" || e.value == "0" || e.value == "no") return false;
        throw validation_error(where(e) + ": expected boolean for " + key + ", got '" + e.value +
                               "'");
    }

    std::vector<std::string> get_all(const std::string& key) const {
        std::vector<std::string> out;
        auto it = entries_.find(key);
        if (it == entries_.end()) return out;
        for (const Entry& e : it->second) out.push_back(e.value);
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        entries_[key] = {{value, 0}};
    }

    /// Normalised snapshot: sorted keys, one line each. Stable across runs,
    /// used for the manifest.
    std::string dump() const {
        std::ostringstream os;
        for (const auto& [key, entries] : entries_)
            for (const auto& e : entries) os << key << " = " << e.value << "\n";
        return os.str();
    }

private:
    std::string name_;
    std::map<std::string, std::vector<Entry>> entries_;

    std::string where(const Entry& e) const { return name_ + ":" + std::to_string(e.line); }

    double parse_double(const std::string& key, const Entry& e) const {
        char* end = nullptr;
        double v = std::strtod(e.value.c_str(), &end);
        if (end == e.value.c_str() || *end != '\0')
            throw validation_error(where(e) + ": expected number for " + key + ", got '" +
                                   e.value + "'");
        return v;
    }

    static std::string strip_comment(const std::string& s) {
        auto pos = s.find_first_of("#;");
        return pos == std::string::npos ? s : s.substr(0, pos);
    }

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }
};

} // namespace fieldscout
