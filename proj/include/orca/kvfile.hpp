#pragma once

// Flat key-value config format used for run configs and species data files.
//
//   # comment
//   schema_version = 1
//   solver.n_z = 16
//   sweep.axis.1.values = 2, 4.5, 7
//
// Keys are dotted paths. Values are scalars, fractions (3/2), booleans or
// comma-separated numeric lists. Consumers mark keys as consumed through the
// typed getters; require_all_consumed() turns leftovers into hard errors so
// misspelled keys never pass silently.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace orca {

class KeyValueFile {
  public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text,
                                     const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_number(const std::string& key);
    double get_number(const std::string& key, double fallback);
    long get_int(const std::string& key);
    long get_int(const std::string& key, long fallback);
    bool get_bool(const std::string& key, bool fallback);
    // accepts "3/2" as well as "1.5"
    double get_fraction(const std::string& key);
    std::vector<double> get_list(const std::string& key);
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& fallback);
    std::vector<std::string> get_string_list(const std::string& key);

    // keys sharing a dotted prefix, in file order (for sweep axes etc.)
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    void set(const std::string& key, const std::string& value);
    void mark_consumed(const std::string& key);
    std::vector<std::string> unconsumed() const;
    void require_all_consumed() const; // throws config_error naming offenders

    // sorted "key = value" lines; the canonical form that gets fingerprinted
    std::string canonical() const;

    const std::string& origin() const { return origin_; }

  private:
    struct Entry {
        std::string value;
        int line = 0;
        int order = 0;
        mutable bool consumed = false;
    };
    std::map<std::string, Entry> entries_;
    std::string origin_;

    const Entry& lookup(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
};

double parse_fraction(const std::string& text); // "3/2", "-7/2", "1.5"

} // namespace orca
