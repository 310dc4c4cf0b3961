#include "rtr/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rtr {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config: cannot open " + path);

    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw InputError("config: missing '=' at " + path + ":" +
                             std::to_string(lineno));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw InputError("config: empty key at " + path + ":" +
                             std::to_string(lineno));
        cfg.values_[key] = value;
    }
    return cfg;
}

void Config::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("config: cannot write " + path);
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

void Config::set(const std::string& key, Real value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    values_[key] = buf;
}

void Config::set(const std::string& key, int64_t value) {
    values_[key] = std::to_string(value);
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError("config: missing key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

Real Config::get_real(const std::string& key) const {
    const std::string s = get_string(key);
    size_t pos = 0;
    Real v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw InputError("config: key '" + key + "' is not a number: " + s);
    }
    if (pos != s.size())
        throw InputError("config: key '" + key + "' is not a number: " + s);
    return v;
}

Real Config::get_real(const std::string& key, Real fallback) const {
    return has(key) ? get_real(key) : fallback;
}

int64_t Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    size_t pos = 0;
    int64_t v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw InputError("config: key '" + key + "' is not an integer: " + s);
    }
    if (pos != s.size())
        throw InputError("config: key '" + key + "' is not an integer: " + s);
    return v;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw InputError("config: key '" + key + "' is not a boolean: " + s);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

}  // namespace rtr
