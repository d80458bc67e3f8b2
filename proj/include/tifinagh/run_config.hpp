#pragma once

// Flat `key = value` run configuration covering the network, the training
// loop and the writer split. Blank lines and `#` comments are ignored;
// unknown or repeated keys are rejected.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "tifinagh/errors.hpp"
#include "tifinagh/model.hpp"
#include "tifinagh/training.hpp"

namespace tifinagh {

struct RunConfig {
    CnnConfig cnn;
    TrainConfig train;
    double train_fraction = 0.86;
    std::uint64_t split_seed = 1;

    void validate() const {
        (void)cnn.trace();
        train.validate();
        if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction must lie in (0, 1)");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename V>
void parse_value(std::string_view text, V& out, const std::string& key, std::size_t line) {
    V v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("config line " + std::to_string(line) + ": cannot parse '" + std::string(text) + "' for " + key);
    }
    out = v;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    using Setter = std::function<void(std::string_view, const std::string&, std::size_t)>;
    auto bind = [](auto& field) -> Setter {
        return [&field](std::string_view v, const std::string& k, std::size_t l) { detail::parse_value(v, field, k, l); };
    };
    const std::map<std::string, Setter, std::less<>> setters = {
        {"conv1_out", bind(cfg.cnn.conv1_out)},       {"conv1_kernel", bind(cfg.cnn.conv1_kernel)},
        {"conv2_out", bind(cfg.cnn.conv2_out)},       {"conv2_kernel", bind(cfg.cnn.conv2_kernel)},
        {"pool", bind(cfg.cnn.pool)},                 {"n_classes", bind(cfg.cnn.n_classes)},
        {"init_seed", bind(cfg.cnn.init_seed)},       {"epochs", bind(cfg.train.epochs)},
        {"batch_size", bind(cfg.train.batch_size)},   {"lr", bind(cfg.train.lr)},
        {"momentum", bind(cfg.train.momentum)},       {"shuffle_seed", bind(cfg.train.shuffle_seed)},
        {"eval_every", bind(cfg.train.eval_every)},   {"train_fraction", bind(cfg.train_fraction)},
        {"split_seed", bind(cfg.split_seed)},
    };

    std::istringstream in(text);
    std::string raw;
    std::set<std::string, std::less<>> seen;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key(detail::trim(line.substr(0, eq)));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        it->second(detail::trim(line.substr(eq + 1)), key, lineno);
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Serializes every key, so a run directory records the exact settings used.
inline std::string format_run_config(const RunConfig& c) {
    std::ostringstream os;
    os << "conv1_out = " << c.cnn.conv1_out << "\nconv1_kernel = " << c.cnn.conv1_kernel
       << "\nconv2_out = " << c.cnn.conv2_out << "\nconv2_kernel = " << c.cnn.conv2_kernel << "\npool = " << c.cnn.pool
       << "\nn_classes = " << c.cnn.n_classes << "\ninit_seed = " << c.cnn.init_seed << "\nepochs = " << c.train.epochs
       << "\nbatch_size = " << c.train.batch_size << "\nlr = " << detail::exact(c.train.lr)
       << "\nmomentum = " << detail::exact(c.train.momentum) << "\nshuffle_seed = " << c.train.shuffle_seed
       << "\neval_every = " << c.train.eval_every << "\ntrain_fraction = " << detail::exact(c.train_fraction)
       << "\nsplit_seed = " << c.split_seed << '\n';
    return os.str();
}

}  // namespace tifinagh
