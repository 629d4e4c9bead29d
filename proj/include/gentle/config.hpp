#pragma once

// Flat key-value config files with dotted section names:
//   env.contact_stiffness = 100
//   agent.batch_size = 64
// '#' starts a comment. Every default is overridable; the resolved
// (default-merged) view can be dumped as a manifest.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gentle {

class KeyValueConfig {
 public:
    KeyValueConfig() = default;

    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        return from_string(ss.str());
    }

    static KeyValueConfig from_string(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: missing '=' on line " + std::to_string(lineno));
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
            cfg.values_[key] = value;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        auto it = values_.find(key);
        const std::string v = it == values_.end() ? def : it->second;
        resolved_[key] = v;
        return v;
    }

    double get_double(const std::string& key, double def) const {
        auto it = values_.find(key);
        double v = def;
        if (it != values_.end()) {
            std::size_t pos = 0;
            v = std::stod(it->second, &pos);
            if (pos != it->second.size())
                throw std::runtime_error("config: bad number for " + key + ": " + it->second);
        }
        resolved_[key] = format_double(v);
        return v;
    }

    long long get_int(const std::string& key, long long def) const {
        auto it = values_.find(key);
        long long v = def;
        if (it != values_.end()) {
            std::size_t pos = 0;
            v = std::stoll(it->second, &pos);
            if (pos != it->second.size())
                throw std::runtime_error("config: bad integer for " + key + ": " + it->second);
        }
        resolved_[key] = std::to_string(v);
        return v;
    }

    bool get_bool(const std::string& key, bool def) const {
        auto it = values_.find(key);
        bool v = def;
        if (it != values_.end()) {
            if (it->second == "true" || it->second == "1") v = true;
            else if (it->second == "false" || it->second == "0") v = false;
            else throw std::runtime_error("config: bad boolean for " + key + ": " + it->second);
        }
        resolved_[key] = v ? "true" : "false";
        return v;
    }

    // Comma-separated list of numbers.
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& def) const {
        auto it = values_.find(key);
        std::vector<double> v = def;
        if (it != values_.end()) {
            v.clear();
            std::istringstream is(it->second);
            std::string item;
            while (std::getline(is, item, ',')) v.push_back(std::stod(trim(item)));
        }
        std::string joined;
        for (std::size_t i = 0; i < v.size(); ++i)
            joined += (i ? "," : "") + format_double(v[i]);
        resolved_[key] = joined;
        return v;
    }

    // Keys present in the file but never read by the consumer.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : values_)
            if (!resolved_.count(k)) out.push_back(k);
        return out;
    }

    // Every key read so far with its resolved value, sorted, one per line.
    std::string manifest() const {
        std::string out;
        for (const auto& [k, v] : resolved_) out += k + " = " + v + "\n";
        return out;
    }

 private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::string format_double(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

// GENTLE_LOG_LEVEL: 0 silent (default 1), 1 progress, 2 debug.
inline int log_level() {
    static const int level = [] {
        const char* v = std::getenv("GENTLE_LOG_LEVEL");
        return v ? std::atoi(v) : 1;
    }();
    return level;
}

}  // namespace gentle
