#ifndef BNC_CONFIG_HPP
#define BNC_CONFIG_HPP

/*
 * Minimal INI-style config reader used by the command line front end:
 *
 *   # comment
 *   [model]
 *   gamma = 2.5
 *   flux  = E
 *   [run]
 *   thetas = 2, 5
 *
 * Sections and keys are case-insensitive; values keep their case.  Lists
 * are comma separated.  Lines must be blank, comments, [section] headers,
 * or key = value pairs; anything else is rejected with its line number.
 */

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pde_core.hpp"

namespace bnc {
namespace config {

class ParseError : public Error {
  public:
    using Error::Error;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

inline std::string lower(std::string s)
{
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}   // namespace detail

struct File {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static File parse(std::istream& in, const std::string& origin = "<stream>")
    {
        File f;
        std::string line;
        std::string section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';')
                continue;
            if (t.front() == '[') {
                if (t.back() != ']' || t.size() < 3)
                    throw ParseError(origin + ":" + std::to_string(lineno) + ": malformed section header");
                section = detail::lower(detail::trim(t.substr(1, t.size() - 2)));
                if (section.empty())
                    throw ParseError(origin + ":" + std::to_string(lineno) + ": empty section name");
                f.sections[section];
                continue;
            }
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::lower(detail::trim(t.substr(0, eq)));
            const std::string val = detail::trim(t.substr(eq + 1));
            if (key.empty())
                throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
            f.sections[section][key] = val;
        }
        return f;
    }

    static File parse_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ParseError("config: cannot open " + path);
        return parse(in, path);
    }

    bool has(const std::string& section, const std::string& key) const
    {
        const auto s = sections.find(detail::lower(section));
        return s != sections.end() && s->second.count(detail::lower(key)) > 0;
    }

    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const
    {
        const auto s = sections.find(detail::lower(section));
        if (s == sections.end())
            return fallback;
        const auto k = s->second.find(detail::lower(key));
        return k == s->second.end() ? fallback : k->second;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const
    {
        if (!has(section, key))
            return fallback;
        const std::string raw = get(section, key, "");
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (end == raw.c_str() || *detail::trim(end).c_str() != '\0')
            throw ParseError("config: bad number for " + section + "." + key + ": '" + raw + "'");
        return v;
    }

    long long get_int(const std::string& section, const std::string& key, long long fallback) const
    {
        if (!has(section, key))
            return fallback;
        const std::string raw = get(section, key, "");
        char* end = nullptr;
        const long long v = std::strtoll(raw.c_str(), &end, 10);
        if (end == raw.c_str() || *detail::trim(end).c_str() != '\0')
            throw ParseError("config: bad integer for " + section + "." + key + ": '" + raw + "'");
        return v;
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const
    {
        if (!has(section, key))
            return fallback;
        const std::string raw = detail::lower(get(section, key, ""));
        if (raw == "true" || raw == "1" || raw == "yes" || raw == "on")
            return true;
        if (raw == "false" || raw == "0" || raw == "no" || raw == "off")
            return false;
        throw ParseError("config: bad boolean for " + section + "." + key + ": '" + raw + "'");
    }

    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const
    {
        if (!has(section, key))
            return fallback;
        const std::string raw = get(section, key, "");
        std::vector<double> out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = detail::trim(item);
            if (t.empty())
                throw ParseError("config: empty list entry in " + section + "." + key);
            char* end = nullptr;
            const double v = std::strtod(t.c_str(), &end);
            if (end == t.c_str() || *end != '\0')
                throw ParseError("config: bad list entry '" + t + "' in " + section + "." + key);
            out.push_back(v);
        }
        if (out.empty())
            throw ParseError("config: empty list for " + section + "." + key);
        return out;
    }
};

}   // namespace config
}   // namespace bnc

#endif
