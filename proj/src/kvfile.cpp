#include "orca/kvfile.hpp"
#include "orca/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace orca {

namespace {

std::string strip(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double to_number(const std::string& raw, const std::string& where) {
    std::string v = strip(raw);
    if (v == "inf" || v == "+inf") return HUGE_VAL;
    if (v == "-inf") return -HUGE_VAL;
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw config_error(where + ": not a number: '" + v + "'");
    return x;
}

} // namespace

double parse_fraction(const std::string& text) {
    std::string v = strip(text);
    auto slash = v.find('/');
    if (slash == std::string::npos) return to_number(v, "fraction");
    double num = to_number(v.substr(0, slash), "fraction numerator");
    double den = to_number(v.substr(slash + 1), "fraction denominator");
    if (den == 0.0) throw config_error("fraction with zero denominator: " + v);
    return num / den;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

KeyValueFile KeyValueFile::parse_string(const std::string& text,
                                        const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0, order = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
        std::string key = strip(line.substr(0, eq));
        std::string val = strip(line.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.entries_.count(key))
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": duplicate key '" + key + "'");
        kv.entries_[key] = Entry{val, lineno, order++, false};
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const { return entries_.count(key) > 0; }

const KeyValueFile::Entry& KeyValueFile::lookup(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw config_error(origin_ + ": missing required key '" + key + "'");
    it->second.consumed = true;
    return it->second;
}

void KeyValueFile::fail(const std::string& key, const std::string& msg) const {
    auto it = entries_.find(key);
    std::string loc = origin_;
    if (it != entries_.end()) loc += ":" + std::to_string(it->second.line);
    throw config_error(loc + ": key '" + key + "': " + msg);
}

std::string KeyValueFile::get_string(const std::string& key) { return lookup(key).value; }

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? lookup(key).value : fallback;
}

double KeyValueFile::get_number(const std::string& key) {
    return to_number(lookup(key).value, origin_ + " key '" + key + "'");
}

double KeyValueFile::get_number(const std::string& key, double fallback) {
    return has(key) ? get_number(key) : fallback;
}

long KeyValueFile::get_int(const std::string& key) {
    double x = get_number(key);
    long n = static_cast<long>(std::llround(x));
    if (x != static_cast<double>(n)) fail(key, "expected an integer");
    return n;
}

long KeyValueFile::get_int(const std::string& key, long fallback) {
    return has(key) ? get_int(key) : fallback;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string v = lookup(key).value;
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    fail(key, "expected true/false");
    return fallback;
}

double KeyValueFile::get_fraction(const std::string& key) {
    try {
        return parse_fraction(lookup(key).value);
    } catch (const config_error& e) {
        fail(key, e.what());
    }
}

std::vector<double> KeyValueFile::get_list(const std::string& key) {
    std::string v = lookup(key).value;
    std::vector<double> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = strip(item);
        if (item.empty()) fail(key, "empty list element");
        out.push_back(to_number(item, origin_ + " key '" + key + "'"));
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

std::vector<double> KeyValueFile::get_list(const std::string& key,
                                           const std::vector<double>& fallback) {
    return has(key) ? get_list(key) : fallback;
}

std::vector<std::string> KeyValueFile::get_string_list(const std::string& key) {
    std::string v = lookup(key).value;
    std::vector<std::string> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(strip(item));
    return out;
}

std::vector<std::string> KeyValueFile::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::pair<int, std::string>> hits;
    for (const auto& [k, e] : entries_)
        if (k.rfind(prefix, 0) == 0) hits.emplace_back(e.order, k);
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> out;
    for (auto& [o, k] : hits) out.push_back(k);
    return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        it->second.value = value;
    } else {
        int order = static_cast<int>(entries_.size());
        entries_[key] = Entry{value, 0, order, false};
    }
}

void KeyValueFile::mark_consumed(const std::string& key) {
    auto it = entries_.find(key);
    if (it != entries_.end()) it->second.consumed = true;
}

std::vector<std::string> KeyValueFile::unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
        if (!e.consumed) out.push_back(k);
    return out;
}

void KeyValueFile::require_all_consumed() const {
    auto bad = unconsumed();
    if (bad.empty()) return;
    std::string msg = origin_ + ": unknown key(s):";
    for (const auto& k : bad) msg += " '" + k + "'";
    throw config_error(msg);
}

std::string KeyValueFile::canonical() const {
    std::string out;
    for (const auto& [k, e] : entries_) {
        out += k;
        out += " = ";
        out += e.value;
        out += '\n';
    }
    return out;
}

} // namespace orca
