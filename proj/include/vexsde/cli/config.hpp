// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/exponents.hpp"

namespace vexsde::cli {

/// Config schema revision; written into every manifest.
inline constexpr int kSchemaVersion = 1;

struct Entry {
    std::string value;
    int line = 0;  // 0 when the value came from a default or an override
    std::string origin;
};

/// Every section and key the config accepts, with its default.
inline const std::map<std::string, std::map<std::string, std::string>>& schema() {
    static const std::map<std::string, std::map<std::string, std::string>> s{
        {"meta", {{"schema", "1"}}},
        {"model",
         {{"p", "remark1"}, {"q", "remark1"},
          {"p_delta", ""}, {"p_M0", ""}, {"p_C0", ""}, {"p_alpha", ""},
          {"q_delta", ""}, {"q_M0", ""}, {"q_C0", ""}, {"q_alpha", ""},
          {"mu", "const:1"}, {"sigma", "const:1"},
          {"mu_min", ""}, {"mu_max", ""}, {"sigma_min", ""}, {"sigma_max", ""},
          {"x0", "1"}, {"t0", "0"}, {"T", "1"}, {"allow_degenerate", "false"}}},
        {"run",
         {{"seed", "42"}, {"n_paths", "10000"}, {"dt", "1e-3"}, {"n_steps", ""}, {"scheme", "euler"},
          {"tol", "1e-6"}, {"max_iter", "50"}, {"c_target", "0.5"}}},
        {"exponent", {{"grid_lo", "1e-8"}, {"grid_hi", "1e8"}, {"grid_points", "10000"}}},
        {"feller", {{"t", "0"}, {"x_grid", "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8"}, {"tol", "1e-6"}}},
        {"simulate", {{"observables", "terminal,terminal_pow:2,sup_abs,int_sq"}, {"export_paths", "1"}}},
        {"moments", {{"orders", "2,3,4"}, {"checkpoints", "10"}, {"x0m", "false"}}},
        {"asymptotic", {{"T_long", "50"}}},
        {"stability", {{"m", "2"}, {"xi", "1"}, {"eta", "1.01"}}},
        {"poisson",
         {{"a", "1"}, {"b", "2"}, {"c", "1"}, {"mu", "1"}, {"sigma", "1"}, {"f", "const:1"},
          {"probes", "1.25,1.5,1.75"}, {"n_grid", "2048"}, {"dt", "1e-4"}, {"n_paths", "100000"}}},
        {"output", {{"dir", "out"}, {"formats", "json,csv"}}},
    };
    return s;
}

/// Sectioned key = value configuration. '#' and ';' start comments.
class Config {
public:
    static Config parse(std::string_view text, const std::string& source = "<string>") {
        Config cfg;
        cfg.source_ = source;
        std::istringstream in{std::string(text)};
        std::string raw;
        std::string section;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = strip(strip_comment(raw));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') cfg.error(line_no, "", "unterminated section header");
                section = strip(line.substr(1, line.size() - 2));
                if (!schema().count(section)) cfg.error(line_no, section, "unknown section");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) cfg.error(line_no, "", "expected 'key = value'");
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            if (section.empty()) cfg.error(line_no, key, "key outside of any section");
            const auto& keys = schema().at(section);
            if (!keys.count(key)) cfg.error(line_no, section + "." + key, "unknown key");
            auto& slot = cfg.values_[section][key];
            if (slot.line != 0) cfg.error(line_no, section + "." + key, "duplicate key (first on line " + std::to_string(slot.line) + ")");
            slot = Entry{value, line_no, source};
        }
        if (auto it = cfg.values_.find("meta"); it != cfg.values_.end() && it->second.count("schema")) {
            if (it->second["schema"].value != std::to_string(kSchemaVersion)) {
                cfg.error(it->second["schema"].line, "meta.schema", "unsupported schema version");
            }
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::Config, path + ": cannot open config file");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    /// "section.key=value"
    void set_override(std::string_view assignment, const std::string& origin = "--set") {
        const auto eq = assignment.find('=');
        const auto dot = assignment.find('.');
        if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
            fail(ErrorKind::Config, origin + ": expected section.key=value, got '" + std::string(assignment) + "'");
        }
        set(strip(std::string(assignment.substr(0, dot))), strip(std::string(assignment.substr(dot + 1, eq - dot - 1))),
            strip(std::string(assignment.substr(eq + 1))), origin);
    }

    void set(const std::string& section, const std::string& key, const std::string& value,
             const std::string& origin = "override") {
        auto s = schema().find(section);
        if (s == schema().end() || !s->second.count(key)) {
            fail(ErrorKind::Config, origin + ": unknown key '" + section + "." + key + "'");
        }
        values_[section][key] = Entry{value, 0, origin};
    }

    /// Value with the schema default filled in; empty means "unset".
    std::string get(const std::string& section, const std::string& key) const {
        if (auto s = values_.find(section); s != values_.end()) {
            if (auto k = s->second.find(key); k != s->second.end()) return k->second.value;
        }
        return schema().at(section).at(key);
    }

    std::string where(const std::string& section, const std::string& key) const {
        if (auto s = values_.find(section); s != values_.end()) {
            if (auto k = s->second.find(key); k != s->second.end()) {
                if (k->second.line > 0) return k->second.origin + ":" + std::to_string(k->second.line);
                return k->second.origin;
            }
        }
        return "default";
    }

    [[noreturn]] void invalid(const std::string& section, const std::string& key, const std::string& why) const {
        fail(ErrorKind::Config, where(section, key) + ": " + section + "." + key + ": " + why);
    }

    double number(const std::string& section, const std::string& key) const {
        const auto v = get(section, key);
        try {
            return exponent::parse_number(v, section + "." + key);
        } catch (const Error&) {
            invalid(section, key, "not a number: '" + v + "'");
        }
    }

    std::optional<double> optional_number(const std::string& section, const std::string& key) const {
        if (get(section, key).empty()) return std::nullopt;
        return number(section, key);
    }

    std::uint64_t integer(const std::string& section, const std::string& key) const {
        const auto v = get(section, key);
        std::size_t used = 0;
        unsigned long long out = 0;
        try {
            out = std::stoull(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != v.size() || v.front() == '-') invalid(section, key, "not a non-negative integer: '" + v + "'");
        return out;
    }

    bool boolean(const std::string& section, const std::string& key) const {
        const auto v = get(section, key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        invalid(section, key, "not a boolean: '" + v + "'");
    }

    std::vector<double> numbers(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        std::string item;
        std::istringstream in(get(section, key));
        while (std::getline(in, item, ',')) {
            try {
                out.push_back(exponent::parse_number(strip(item), section + "." + key));
            } catch (const Error&) {
                invalid(section, key, "not a number list");
            }
        }
        if (out.empty()) invalid(section, key, "empty list");
        return out;
    }

    std::vector<std::string> strings(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(get(section, key));
        while (std::getline(in, item, ',')) {
            if (!strip(item).empty()) out.push_back(strip(item));
        }
        return out;
    }

    /// Every schema key with its resolved value, sorted; sections listed in
    /// `skip_keys` as "section.key" are left out.
    std::string resolved_text(const std::vector<std::string>& skip_keys = {}) const {
        std::ostringstream os;
        for (const auto& [section, keys] : schema()) {
            os << '[' << section << "]\n";
            for (const auto& [key, def] : keys) {
                const std::string full = section + "." + key;
                bool skip = false;
                for (const auto& s : skip_keys) skip = skip || s == full;
                if (skip) continue;
                os << key << " = " << get(section, key) << '\n';
            }
        }
        return os.str();
    }

private:
    static std::string strip(std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    static std::string strip_comment(const std::string& s) {
        const auto p = s.find_first_of("#;");
        return p == std::string::npos ? s : s.substr(0, p);
    }
    [[noreturn]] void error(int line, const std::string& key, const std::string& why) const {
        fail(ErrorKind::Config, source_ + ":" + std::to_string(line) + ": " + (key.empty() ? "" : key + ": ") + why);
    }

    std::string source_;
    std::map<std::string, std::map<std::string, Entry>> values_;
};

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace vexsde::cli
