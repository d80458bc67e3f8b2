// Command-line front end for the glyph recognition pipeline.
//
// Exit codes: 0 success, 2 usage / format / config error, 3 data error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "tifinagh/tifinagh.hpp"

namespace fs = std::filesystem;
using namespace tifinagh;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

constexpr const char* kWeightsFile = "weights.bin";
constexpr const char* kHistoryFile = "history.csv";
constexpr const char* kCurvesFile = "curves.svg";
constexpr const char* kRunConfigFile = "run.cfg";

std::string metrics_line(const Metrics& m) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "loss=%.6f top1=%.4f top5=%.4f", m.loss, m.top1, m.top5);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

RunConfig config_or_default(const std::string& path) {
    return path.empty() ? RunConfig{} : load_run_config(path);
}

int cmd_synth(int writers, std::uint64_t seed, const fs::path& out) {
    const Corpus corpus = synth_corpus(writers, seed);
    write_dataset(corpus, out);
    std::cout << "synthesized " << corpus.size() << " examples from " << writers << " writers into " << out.string()
              << '\n';
    return 0;
}

int cmd_build_dataset(const fs::path& in, const fs::path& out) {
    const Corpus corpus = load_image_dir(in);
    write_dataset(corpus, out);
    std::cout << "ingested " << corpus.size() << " examples from " << corpus.writer_ids().size() << " writers into "
              << out.string() << '\n';
    return 0;
}

int cmd_preprocess(const fs::path& in, const fs::path& out) {
    GrayImage normalized;
    try {
        normalized = preprocess_glyph(read_pgm(in)).image();
    } catch (const NoForeground& e) {
        std::cerr << "error: " << in.string() << ": " << e.what() << '\n';
        return kExitData;
    }
    write_pgm(normalized, out);
    return 0;
}

int cmd_train(const fs::path& data, const std::string& config_path, const fs::path& out, bool quiet) {
    const RunConfig cfg = config_or_default(config_path);
    const Corpus corpus = read_dataset(data);
    const SplitResult split = split_by_writer(corpus, cfg.train_fraction, cfg.split_seed);
    std::cout << "train: " << split.train.size() << " examples from " << split.train_writers.size()
              << " writers; test: " << split.test.size() << " examples from " << split.test_writers.size()
              << " writers\n";
    ensure_dir(out);
    {
        std::ofstream cfg_out(out / kRunConfigFile);
        cfg_out << format_run_config(cfg);
    }

    Model<float> model = init_model<float>(cfg.cnn, cfg.cnn.init_seed);
    const History history = train(model, split.train, split.test, cfg.train, [quiet](const EpochRecord& r) {
        if (!quiet) {
            std::cerr << "epoch " << r.epoch << " train " << metrics_line(r.train) << " | test "
                      << metrics_line(r.test) << '\n';
        }
    });
    save_weights(model, out / kWeightsFile);
    export_history_csv(history, out / kHistoryFile);
    render_curves_svg(history, out / kCurvesFile);
    std::cout << "final train " << metrics_line(history.back().train) << '\n';
    std::cout << "final test " << metrics_line(history.back().test) << '\n';
    return 0;
}

int cmd_eval(const fs::path& data, const fs::path& weights, const std::string& config_path) {
    const RunConfig cfg = config_or_default(config_path);
    const Model<float> model = load_weights<float>(weights, cfg.cnn);
    const Corpus corpus = read_dataset(data);
    std::cout << metrics_line(evaluate(model, corpus)) << '\n';
    return 0;
}

int cmd_infer(const fs::path& weights, const fs::path& image, std::size_t topk, const std::string& config_path) {
    const RunConfig cfg = config_or_default(config_path);
    const Model<float> model = load_weights<float>(weights, cfg.cnn);
    Glyph28 glyph;
    try {
        glyph = preprocess_glyph(read_pgm(image));
    } catch (const NoForeground& e) {
        std::cerr << "error: " << image.string() << ": " << e.what() << '\n';
        return kExitData;
    }
    const Corpus one({Example{glyph, 0, 0}});
    const Tensor<float> logits = model.infer(make_batch<float>(one));
    const Tensor<double> probs = softmax_rows(logits.cast<double>());
    const auto& registry = LabelRegistry::ircam();
    const auto ranked = predict_topk(logits, topk);
    for (int label : ranked.front()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", probs[static_cast<std::size_t>(label)]);
        std::cout << label << ' ' << registry.at(label).name << ' ' << buf << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Handwritten Tifinagh glyph recognition toolkit"};
    app.require_subcommand(1);

    int writers = 102;
    std::uint64_t seed = 1;
    std::string out_dir, in_path, out_path, data_dir, config_path, weights_path, image_path;
    std::size_t topk = 5;
    bool quiet = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic writer-structured corpus as IDX files");
    synth->add_option("--writers", writers, "Number of writers")->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", out_dir, "Output dataset directory")->required();

    auto* build = app.add_subcommand("build-dataset", "Ingest root/<writer>/<label>.pgm into IDX files");
    build->add_option("--in", in_path, "Input image directory")->required();
    build->add_option("--out", out_dir, "Output dataset directory")->required();

    auto* prep = app.add_subcommand("preprocess", "Normalize one PGM glyph to 28x28");
    prep->add_option("--in", in_path, "Input PGM")->required();
    prep->add_option("--out", out_path, "Output PGM")->required();

    auto* trn = app.add_subcommand("train", "Split by writer, train, and export weights and curves");
    trn->add_option("--data", data_dir, "Dataset directory")->required();
    trn->add_option("--config", config_path, "Run configuration (key = value)");
    trn->add_option("--out", out_dir, "Run output directory")->required();
    trn->add_flag("--quiet", quiet, "Suppress per-epoch progress");

    auto* evl = app.add_subcommand("eval", "Evaluate weights on a dataset");
    evl->add_option("--data", data_dir, "Dataset directory")->required();
    evl->add_option("--weights", weights_path, "Weights file")->required();
    evl->add_option("--config", config_path, "Run configuration the weights were trained with");

    auto* inf = app.add_subcommand("infer", "Rank the classes for one PGM glyph");
    inf->add_option("--weights", weights_path, "Weights file")->required();
    inf->add_option("--image", image_path, "Input PGM")->required();
    inf->add_option("--topk", topk, "Number of ranked classes")->check(CLI::Range(1, 33));
    inf->add_option("--config", config_path, "Run configuration the weights were trained with");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(writers, seed, out_dir);
        if (*build) return cmd_build_dataset(in_path, out_dir);
        if (*prep) return cmd_preprocess(in_path, out_path);
        if (*trn) return cmd_train(data_dir, config_path, out_dir, quiet);
        if (*evl) return cmd_eval(data_dir, weights_path, config_path);
        if (*inf) return cmd_infer(weights_path, image_path, topk, config_path);
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NoForeground& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const LabelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
