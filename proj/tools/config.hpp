#pragma once

#include "hartree/params.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree::cli {

// Exit status 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exit status 3: a prior subcommand has not produced its artifact.
class DependencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeyInfo {
    const char* key;  // section.name
    const char* value;
    const char* doc;
};
const std::vector<KeyInfo>& known_keys();

// Flat `[section]` / `key = value` file on top of the built-in defaults.
class Config {
public:
    Config();
    static Config load(const std::string& path);  // ValidationError with the line on malformed input

    // "section.key=value"; unknown keys are rejected.
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& raw(const std::string& key) const;
    std::string str(const std::string& key) const { return raw(key); }
    double num(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;   // comma separated
    std::vector<Vec3> vectors(const std::string& key) const;  // "x,y,z; x,y,z"

    // Sorted key = value lines; the hash in the manifest is taken over this text.
    std::string canonical() const;
    // Every violated invariant, empty when the configuration is usable. The box rule of backward runs
    // is only checked for `evolve` and `validate` (or an empty name).
    std::vector<std::string> validate(const std::string& subcommand = "") const;

    std::vector<std::string> unknown;  // keys present in the file but not known

private:
    std::map<std::string, std::string> values_;
};

}  // namespace hartree::cli
