#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "relume/core/errors.hpp"

namespace relume::trainer {

// Run configuration. Scalars default to the published training recipe;
// prompt texts and per-term loss weights are exposed for ablations.
struct TrainingConfig {
    long long epochs = 300;
    double lr = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long long batch = 1;
    long long patch = 256;
    long long pe_levels = 8;
    std::uint64_t seed = 0;
    std::string prompt_low = "low-light image";
    std::string prompt_high = "high-light image";
    double w_nr = 1.0;
    double w_adv = 1.0;
    double w_con = 1.0;
    double w_cl = 1.0;
    long long checkpoint_every = 1; // epochs between checkpoint files

    bool operator==(const TrainingConfig&) const = default;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": '" + v + "'");
    }
}

} // namespace detail

// fixed key order so the canonical text (and therefore the hash) is stable
inline std::string canonical_text(const TrainingConfig& c) {
    using detail::fmt_double;
    std::string out;
    auto kv = [&out](const char* k, const std::string& v) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    };
    kv("adam_beta1", fmt_double(c.adam_beta1));
    kv("adam_beta2", fmt_double(c.adam_beta2));
    kv("adam_eps", fmt_double(c.adam_eps));
    kv("batch", std::to_string(c.batch));
    kv("checkpoint_every", std::to_string(c.checkpoint_every));
    kv("epochs", std::to_string(c.epochs));
    kv("lr", fmt_double(c.lr));
    kv("patch", std::to_string(c.patch));
    kv("pe_levels", std::to_string(c.pe_levels));
    kv("prompt_high", c.prompt_high);
    kv("prompt_low", c.prompt_low);
    kv("seed", std::to_string(c.seed));
    kv("w_adv", fmt_double(c.w_adv));
    kv("w_cl", fmt_double(c.w_cl));
    kv("w_con", fmt_double(c.w_con));
    kv("w_nr", fmt_double(c.w_nr));
    return out;
}

inline std::uint64_t config_hash(const TrainingConfig& c) {
    return detail::fnv1a64(canonical_text(c));
}

inline void validate(const TrainingConfig& c) {
    if (c.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (c.lr <= 0) throw ConfigError("config: lr must be positive");
    if (c.batch != 1) throw ConfigError("config: only batch=1 is implemented");
    if (c.patch < 8 || c.patch % 4 != 0)
        throw ConfigError("config: patch must be >= 8 and divisible by 4");
    if (c.pe_levels < 1 || c.pe_levels > 16)
        throw ConfigError("config: pe_levels must be in [1,16]");
    if (c.checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
    if (c.w_nr < 0 || c.w_adv < 0 || c.w_con < 0 || c.w_cl < 0)
        throw ConfigError("config: loss weights must be nonnegative");
}

// flat key=value text; '#' starts a comment, blank lines ignored, unknown
// keys rejected
inline TrainingConfig parse_config(const std::string& text) {
    TrainingConfig c;
    size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        const size_t nl = text.find('\n', pos);
        std::string line =
            nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key == "epochs") c.epochs = detail::parse_int(key, val);
        else if (key == "lr") c.lr = detail::parse_double(key, val);
        else if (key == "adam_beta1") c.adam_beta1 = detail::parse_double(key, val);
        else if (key == "adam_beta2") c.adam_beta2 = detail::parse_double(key, val);
        else if (key == "adam_eps") c.adam_eps = detail::parse_double(key, val);
        else if (key == "batch") c.batch = detail::parse_int(key, val);
        else if (key == "patch") c.patch = detail::parse_int(key, val);
        else if (key == "pe_levels") c.pe_levels = detail::parse_int(key, val);
        else if (key == "seed") c.seed = detail::parse_u64(key, val);
        else if (key == "prompt_low") c.prompt_low = val;
        else if (key == "prompt_high") c.prompt_high = val;
        else if (key == "w_nr") c.w_nr = detail::parse_double(key, val);
        else if (key == "w_adv") c.w_adv = detail::parse_double(key, val);
        else if (key == "w_con") c.w_con = detail::parse_double(key, val);
        else if (key == "w_cl") c.w_cl = detail::parse_double(key, val);
        else if (key == "checkpoint_every") c.checkpoint_every = detail::parse_int(key, val);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    validate(c);
    return c;
}

// Piecewise-linear schedule: constant at lr until the final decay window
// (200 epochs, or the whole run when shorter), then linear to exactly 0 at
// the last epoch. Continuous at the joint and monotone nonincreasing.
inline double lr_at(const TrainingConfig& c, long long epoch) {
    if (epoch < 0 || epoch > c.epochs)
        throw ArgumentError("lr_at: epoch outside [0, epochs]");
    const long long window = std::min<long long>(200, c.epochs);
    const long long start = c.epochs - window;
    if (epoch < start) return c.lr;
    return c.lr * static_cast<double>(c.epochs - epoch) / static_cast<double>(window);
}

} // namespace relume::trainer
