#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tifinagh/dataset.hpp"
#include "tifinagh/errors.hpp"
#include "tifinagh/model.hpp"
#include "tifinagh/ops.hpp"

namespace tifinagh {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t shuffle_seed = 1;
    int eval_every = 1;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be at least 1");
        if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
        if (!(lr > 0)) throw ConfigError("lr must be positive");
        if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
        if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    }
};

struct Metrics {
    double loss = 0;
    double top1 = 0;
    double top5 = 0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct EpochRecord {
    int epoch = 0;
    Metrics train;
    Metrics test;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using History = std::vector<EpochRecord>;

/// Glyphs at `indices` as a [N,1,28,28] batch scaled to [0, 1].
template <typename T>
Tensor<T> make_batch(const Corpus& corpus, std::span<const std::size_t> indices) {
    Tensor<T> batch({indices.size(), 1, Glyph28::kSide, Glyph28::kSide});
    T* out = batch.raw();
    for (std::size_t idx : indices) {
        for (auto v : corpus[idx].glyph.pixels()) *out++ = static_cast<T>(v) / T(255);
    }
    return batch;
}

template <typename T>
Tensor<T> make_batch(const Corpus& corpus) {
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return make_batch<T>(corpus, all);
}

/// Mean cross-entropy and top-1 / top-5 accuracy of the model on a corpus.
/// Per-example losses are summed in sorted order, so the result does not
/// depend on corpus order.
template <typename T>
Metrics evaluate(const Model<T>& model, const Corpus& corpus, std::size_t chunk = 256) {
    if (corpus.empty()) throw ConfigError("evaluate: corpus is empty");
    const std::size_t n_classes = model.config().n_classes;
    const std::size_t k5 = std::min<std::size_t>(5, n_classes);
    std::vector<double> losses;
    losses.reserve(corpus.size());
    std::size_t hit1 = 0, hit5 = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < corpus.size(); start += chunk) {
        const std::size_t end = std::min(corpus.size(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor<T> logits = model.infer(make_batch<T>(corpus, idx));
        const auto top = predict_topk(logits, k5);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const int label = corpus[idx[r]].label;
            if (static_cast<std::size_t>(label) >= n_classes) {
                throw LabelError("evaluate: label " + std::to_string(label) + " exceeds the model's classes");
            }
            std::vector<double> row(logits.raw() + r * n_classes, logits.raw() + (r + 1) * n_classes);
            losses.push_back(row_cross_entropy<double>(row, static_cast<std::size_t>(label)));
            if (top[r][0] == label) ++hit1;
            if (std::find(top[r].begin(), top[r].end(), label) != top[r].end()) ++hit5;
        }
    }
    std::sort(losses.begin(), losses.end());
    double sum = 0;
    for (double l : losses) sum += l;
    const double n = static_cast<double>(corpus.size());
    return Metrics{sum / n, static_cast<double>(hit1) / n, static_cast<double>(hit5) / n};
}

/// One SGD step on the examples at `indices`; returns the batch mean loss.
template <typename T>
T train_step(Model<T>& model, OptimState<T>& opt, const Corpus& corpus, std::span<const std::size_t> indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(corpus[i].label);
    const Tensor<T> logits = model.forward(make_batch<T>(corpus, indices));
    const LossResult<T> loss = softmax_cross_entropy(logits, labels);
    model.backward(loss.d_logits);
    sgd_momentum_step(model.parameters(), opt);
    return loss.loss;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch SGD with momentum. Each epoch reshuffles the training set with
/// a generator seeded once from cfg.shuffle_seed, keeps the final partial
/// batch, and then evaluates both corpora. On epochs skipped by eval_every
/// the previous evaluation is repeated in the history.
template <typename T>
History train(Model<T>& model, const Corpus& train_set, const Corpus& test_set, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("train: training corpus is empty");
    if (test_set.empty()) throw ConfigError("train: test corpus is empty");
    OptimState<T> opt(static_cast<T>(cfg.lr), static_cast<T>(cfg.momentum));
    std::mt19937_64 rng(cfg.shuffle_seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    History history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            train_step(model, opt, train_set, std::span<const std::size_t>(order).subspan(start, len));
        }
        EpochRecord rec{epoch, {}, {}};
        if (history.empty() || epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            rec.train = evaluate(model, train_set);
            rec.test = evaluate(model, test_set);
        } else {
            rec.train = history.back().train;
            rec.test = history.back().test;
        }
        history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Curve export

inline constexpr const char* kHistoryHeader = "epoch,train_loss,train_top1,test_loss,test_top1,train_top5,test_top5";

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string exact(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("history CSV line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline std::string history_csv(const History& history) {
    std::string out = kHistoryHeader;
    out += '\n';
    for (const auto& r : history) {
        out += std::to_string(r.epoch);
        for (double v : {r.train.loss, r.train.top1, r.test.loss, r.test.top1, r.train.top5, r.test.top5}) {
            out += ',';
            out += detail::exact(v);
        }
        out += '\n';
    }
    return out;
}

inline void export_history_csv(const History& history, const std::filesystem::path& path) {
    if (history.empty()) throw ConfigError("export_history_csv: history is empty");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << history_csv(history);
    if (!out) throw IoError("write failed for " + path.string());
}

inline History parse_history_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) throw FormatError("history CSV: missing or wrong header");
    History h;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos; rest.remove_prefix(comma + 1)) {
            cells.push_back(rest.substr(0, comma));
        }
        cells.push_back(rest);
        if (cells.size() != 7) throw FormatError("history CSV line " + std::to_string(lineno) + ": expected 7 fields");
        EpochRecord r;
        r.epoch = static_cast<int>(detail::parse_double(cells[0], lineno));
        r.train.loss = detail::parse_double(cells[1], lineno);
        r.train.top1 = detail::parse_double(cells[2], lineno);
        r.test.loss = detail::parse_double(cells[3], lineno);
        r.test.top1 = detail::parse_double(cells[4], lineno);
        r.train.top5 = detail::parse_double(cells[5], lineno);
        r.test.top5 = detail::parse_double(cells[6], lineno);
        h.push_back(r);
    }
    return h;
}

inline History read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_history_csv(ss.str());
}

namespace detail {

struct Series {
    const char* name;
    const char* color;
    std::vector<double> values;
};

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline void svg_chart(std::ostringstream& os, const char* id, const char* title, double x0, double y0,
                      const std::vector<Series>& series, double y_max, int epochs) {
    constexpr double w = 420, h = 300, left = 50, top = 30, bottom = 40, right = 20;
    const double pw = w - left - right, ph = h - top - bottom;
    const auto px = [&](int epoch) { return left + (epochs > 1 ? (epoch - 1) * pw / (epochs - 1) : pw / 2); };
    const auto py = [&](double v) { return top + ph - std::clamp(v / y_max, 0.0, 1.0) * ph; };

    os << "<g class=\"chart\" id=\"" << id << "\" transform=\"translate(" << x0 << ',' << y0 << ")\">\n";
    os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = y_max * i / 4;
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt2(py(v)) << "\" y2=\"" << fmt2(py(v))
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << fmt2(py(v) + 4) << "\" text-anchor=\"end\" font-size=\"10\">"
           << fmt2(v) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\" font-size=\"11\">epoch (1-"
       << epochs << ")</text>\n";
    int legend = 0;
    for (const auto& s : series) {
        os << "<polyline class=\"series\" data-name=\"" << s.name << "\" fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (i) os << ' ';
            os << fmt2(px(static_cast<int>(i) + 1)) << ',' << fmt2(py(s.values[i]));
        }
        os << "\"/>\n";
        const double ly = top + 12 + 14 * legend++;
        os << "<line x1=\"" << left + pw - 70 << "\" x2=\"" << left + pw - 55 << "\" y1=\"" << ly << "\" y2=\"" << ly
           << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw - 50 << "\" y=\"" << ly + 4 << "\" font-size=\"10\">" << s.name << "</text>\n";
    }
    os << "</g>\n";
}

}  // namespace detail

/// Static SVG with a loss chart and a top-1 accuracy chart, each with a
/// train and a test series.
inline std::string curves_svg(const History& history) {
    if (history.empty()) throw ConfigError("render_curves_svg: history is empty");
    detail::Series train_loss{"train", "#1f77b4", {}}, test_loss{"test", "#ff7f0e", {}};
    detail::Series train_acc{"train", "#1f77b4", {}}, test_acc{"test", "#ff7f0e", {}};
    double max_loss = 0;
    for (const auto& r : history) {
        train_loss.values.push_back(r.train.loss);
        test_loss.values.push_back(r.test.loss);
        train_acc.values.push_back(r.train.top1);
        test_acc.values.push_back(r.test.top1);
        max_loss = std::max({max_loss, r.train.loss, r.test.loss});
    }
    if (!(max_loss > 0)) max_loss = 1;
    const int epochs = static_cast<int>(history.size());
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"880\" height=\"320\" viewBox=\"0 0 880 320\">\n";
    os << "<rect width=\"880\" height=\"320\" fill=\"white\"/>\n";
    detail::svg_chart(os, "loss", "Loss", 10, 10, {train_loss, test_loss}, max_loss * 1.05, epochs);
    detail::svg_chart(os, "accuracy", "Top-1 accuracy", 450, 10, {train_acc, test_acc}, 1.0, epochs);
    os << "</svg>\n";
    return os.str();
}

inline void render_curves_svg(const History& history, const std::filesystem::path& path) {
    const std::string svg = curves_svg(history);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << svg;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tifinagh
