#pragma once

#include <map>
#include <string>

#include "rtr/math.hpp"

namespace rtr {

/// Flat key=value configuration. Lines starting with '#' and blank
/// lines are skipped; keys are dotted lowercase identifiers. Lookups
/// with a default never fail; lookups without one throw InputError for
/// missing keys. Unparsable values always throw.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    void save(const std::string& path) const;

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, Real value);
    void set(const std::string& key, int64_t value);

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    Real get_real(const std::string& key) const;
    Real get_real(const std::string& key, Real fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace rtr
