#pragma once

// Run configuration: a flat key-value text format with '#' comments.
//
//     # thermal bath
//     gamma = 0.1
//     omega_grid = 20, 30, 40, 50, 60, 70
//
// Every key has a kind and an optional default. Values are stored in
// canonical text form (reals printed with 17 significant digits), which is
// what the config hash and the run manifest are computed from.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qfb/errors.hpp"
#include "qfb/params.hpp"
#include "qfb/policy.hpp"

namespace qfb {

enum class KeyKind { real, integer, text, real_list, boolean };

struct KeySpec {
    const char* name;
    KeyKind kind;
    const char* fallback;  // nullptr: no default
    const char* help;
};

inline constexpr KeySpec config_keys[] = {
    {"mode", KeyKind::text, nullptr, "simulate|ensemble|sweep|optimize|fit|check"},
    {"k", KeyKind::real, "1", "measurement strength (sets the unit of rate)"},
    {"gamma", KeyKind::real, "0.1", "thermal damping rate, units of k"},
    {"nT", KeyKind::real, "0.1", "thermal occupation"},
    {"omega", KeyKind::real, nullptr, "maximum feedback rotation speed, units of k"},
    {"dt", KeyKind::real, "1e-4", "integration step, units of 1/k"},
    {"t_burn", KeyKind::real, nullptr, "discarded transient (default: burn-in heuristic)"},
    {"t_avg", KeyKind::real, "20", "averaging window"},
    {"seed", KeyKind::integer, "1", "master seed"},
    {"n_traj", KeyKind::integer, "12800", "trajectories per ensemble"},
    {"workers", KeyKind::integer, "0", "worker threads (0: all CPUs)"},
    {"protocol", KeyKind::text, "published", "published|coefficients|aligned"},
    {"c0", KeyKind::real, "0", "law coefficient c0"},
    {"c1", KeyKind::real, "0", "law coefficient c1"},
    {"c2", KeyKind::real, "0", "law coefficient c2"},
    {"c3", KeyKind::real, "0", "law coefficient c3"},
    {"table_gamma", KeyKind::real, nullptr, "tabulated protocol row gamma/k (default: gamma/k)"},
    {"A", KeyKind::real, nullptr, "published-law A (overrides the table row)"},
    {"B", KeyKind::real, nullptr, "published-law B"},
    {"r", KeyKind::real, nullptr, "published-law r"},
    {"switch_ratio", KeyKind::real, "45", "omega/k where c0 switches to pi/2"},
    {"a0", KeyKind::real, nullptr, "initial Bloch length (default: thermal state)"},
    {"theta0", KeyKind::real, "0", "initial angle"},
    {"path_stride", KeyKind::integer, "10", "record every n-th step in simulate"},
    {"omega_grid", KeyKind::real_list, nullptr, "omega/k values for sweep and fit"},
    {"degree", KeyKind::integer, "1", "law degree for optimize (1 or 3)"},
    {"budget", KeyKind::integer, "40", "objective evaluations per optimization"},
    {"fd_step", KeyKind::real, "0.01", "finite-difference step in coefficient space"},
    {"freeze_c0", KeyKind::boolean, "false", "keep c0 at its initial value"},
    {"scan_points", KeyKind::integer, "5", "coarse c0 scan points"},
    {"points", KeyKind::text, nullptr, "CSV of omega_over_k,c1 for fit"},
    {"bins", KeyKind::integer, "0", "epsilon(t) profile bins in ensemble mode (0: off)"},
    {"output", KeyKind::text, "qfb_out", "artifact directory"},
};

/// Keys that do not change numeric results and are left out of the hash.
inline bool hash_exempt(std::string_view key) noexcept {
    return key == "output" || key == "workers";
}

inline const KeySpec* find_key(std::string_view name) noexcept {
    for (const auto& k : config_keys) {
        if (name == k.name) return &k;
    }
    return nullptr;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ConfigError(key, "expected a finite number, got '" + text + "'");
    }
    return v;
}

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item.push_back(ch);
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

inline std::string canonical(const KeySpec& spec, const std::string& raw) {
    const std::string text = trim(raw);
    switch (spec.kind) {
        case KeyKind::real:
            return format_real(parse_real(spec.name, text));
        case KeyKind::integer: {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size()) {
                // Accept integral reals such as 1e4.
                const double d = parse_real(spec.name, text);
                if (d != std::floor(d) || std::abs(d) > 9.0e15) {
                    throw ConfigError(spec.name, "expected an integer, got '" + text + "'");
                }
                v = static_cast<std::int64_t>(d);
            }
            return std::to_string(v);
        }
        case KeyKind::boolean:
            if (text == "true" || text == "1" || text == "yes" || text == "on") return "true";
            if (text == "false" || text == "0" || text == "no" || text == "off") return "false";
            throw ConfigError(spec.name, "expected true or false, got '" + text + "'");
        case KeyKind::real_list: {
            std::string out;
            const auto items = split_list(text);
            if (items.empty()) throw ConfigError(spec.name, "empty list");
            for (const auto& item : items) {
                if (!out.empty()) out += ',';
                out += format_real(parse_real(spec.name, item));
            }
            return out;
        }
        case KeyKind::text:
            if (text.empty()) throw ConfigError(spec.name, "empty value");
            return text;
    }
    return text;
}

}  // namespace detail

class RunConfig {
public:
    /// Sets a key from text; later calls win. Unknown keys are rejected.
    void set(const std::string& key, const std::string& value) {
        const KeySpec* spec = find_key(key);
        if (!spec) throw ConfigError(key, "unknown configuration key");
        values_[key] = detail::canonical(*spec, value);
    }

    /// Reads `key = value` lines. Blank lines and '#' comments are skipped.
    void read(std::istream& in, const std::string& source = "config") {
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = detail::trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(source + ":" + std::to_string(number), "expected key = value");
            }
            set(detail::trim(body.substr(0, eq)), body.substr(eq + 1));
        }
    }

    void read_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config", "cannot open " + path);
        read(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    /// Value if set, else the key's default, else nothing.
    std::optional<std::string> raw(const std::string& key) const {
        if (auto it = values_.find(key); it != values_.end()) return it->second;
        const KeySpec* spec = find_key(key);
        if (spec && spec->fallback) return detail::canonical(*spec, spec->fallback);
        return std::nullopt;
    }

    std::string require_raw(const std::string& key) const {
        auto v = raw(key);
        if (!v) throw ConfigError(key, "required in mode '" + mode() + "'");
        return *v;
    }

    double real(const std::string& key) const { return detail::parse_real(key, require_raw(key)); }

    std::int64_t integer(const std::string& key) const { return std::stoll(require_raw(key)); }

    std::uint64_t count(const std::string& key) const {
        const auto v = integer(key);
        if (v < 0) throw ConfigError(key, "must be >= 0");
        return static_cast<std::uint64_t>(v);
    }

    bool flag(const std::string& key) const { return require_raw(key) == "true"; }

    std::string text(const std::string& key) const { return require_raw(key); }

    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : detail::split_list(require_raw(key))) {
            out.push_back(detail::parse_real(key, item));
        }
        return out;
    }

    std::string mode() const {
        auto it = values_.find("mode");
        return it == values_.end() ? std::string("?") : it->second;
    }

    /// Every key with a value, defaults included, in sorted order.
    std::map<std::string, std::string> resolved() const {
        std::map<std::string, std::string> out;
        for (const auto& k : config_keys) {
            if (auto v = raw(k.name)) out[k.name] = *v;
        }
        return out;
    }

    /// FNV-1a over the sorted key=value lines, output-only keys excluded.
    std::string hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& [key, value] : resolved()) {
            if (hash_exempt(key)) continue;
            for (char ch : key + "=" + value + "\n") {
                h ^= static_cast<unsigned char>(ch);
                h *= 0x100000001b3ULL;
            }
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    /// Physical and integration parameters. t_burn falls back to the
    /// heuristic supplied by the caller.
    SimParams sim_params(double default_burn) const {
        SimParams p;
        p.k = real("k");
        p.gamma = real("gamma") * p.k;
        p.nT = real("nT");
        p.omega = has("omega") ? real("omega") * p.k : 0.0;
        p.dt = real("dt") / p.k;
        p.t_avg = real("t_avg") / p.k;
        p.seed = static_cast<std::uint64_t>(integer("seed"));
        p.t_burn = has("t_burn") ? real("t_burn") / p.k : default_burn;
        if (!(p.k > 0.0)) throw ConfigError("k", "must be > 0");
        p.validate();
        return p;
    }

    PublishedProtocol published_protocol(const SimParams& p) const {
        PublishedProtocol proto;
        if (has("A") || has("B") || has("r")) {
            proto.A = real("A");
            proto.B = real("B");
            proto.r = real("r");
            proto.m = 0.0;
            proto.sigma = 0.0;
            proto.gamma_table = p.gamma / p.k;
        } else {
            const double row = has("table_gamma") ? real("table_gamma") : p.gamma / p.k;
            proto = PublishedProtocol::for_gamma(row);
        }
        proto.switch_ratio = real("switch_ratio");
        proto.validate();
        return proto;
    }

    ProtocolCoefficients coefficients() const {
        ProtocolCoefficients c{real("c0"), real("c1"), real("c2"), real("c3")};
        c.validate();
        return c;
    }

    ControlPolicy policy(const SimParams& p) const {
        const std::string kind = text("protocol");
        if (kind == "published") return ControlPolicy::published(p.omega, p.k, published_protocol(p));
        if (kind == "coefficients") return ControlPolicy::law(coefficients(), p.omega);
        if (kind == "aligned") return ControlPolicy::aligned(p.omega);
        throw ConfigError("protocol", "expected published, coefficients or aligned, got '" + kind + "'");
    }

    /// Checks that the mode is known and its required keys are present.
    void validate_mode() const {
        static const std::set<std::string> modes{"simulate", "ensemble", "sweep", "optimize", "fit", "check"};
        if (!has("mode")) throw ConfigError("mode", "missing");
        const std::string m = mode();
        if (!modes.count(m)) throw ConfigError("mode", "unknown mode '" + m + "'");
        auto need = [&](const char* key) {
            if (!has(key)) throw ConfigError(key, "required in mode '" + m + "'");
        };
        if (m == "simulate" || m == "ensemble" || m == "optimize") need("omega");
        if (m == "sweep") need("omega_grid");
        if (m == "fit" && !has("points")) need("omega_grid");
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace qfb
