#pragma once

// Labeled, writer-attributed glyph corpora: IDX (MNIST container) files, the
// writer sidecar, directory ingestion and writer-disjoint splitting.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tifinagh/errors.hpp"
#include "tifinagh/image.hpp"
#include "tifinagh/labels.hpp"
#include "tifinagh/preprocess.hpp"

namespace tifinagh {

struct Example {
    Glyph28 glyph;
    int label = 0;
    int writer_id = 0;

    friend bool operator==(const Example&, const Example&) = default;
};

/// An ordered list of examples whose labels are valid for the registry.
class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Example> examples, LabelRegistry registry = LabelRegistry::ircam())
        : examples_(std::move(examples)), registry_(registry) {
        for (std::size_t i = 0; i < examples_.size(); ++i) {
            if (!registry_.contains(examples_[i].label)) {
                throw LabelError("example " + std::to_string(i) + " has label " +
                                 std::to_string(examples_[i].label) + " outside [0, 33)");
            }
            if (examples_[i].writer_id < 0) {
                throw ConfigError("example " + std::to_string(i) + " has a negative writer id");
            }
        }
    }

    const std::vector<Example>& examples() const noexcept { return examples_; }
    const Example& operator[](std::size_t i) const { return examples_[i]; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }
    const LabelRegistry& registry() const noexcept { return registry_; }

    /// Distinct writer ids in ascending order.
    std::vector<int> writer_ids() const {
        std::set<int> ids;
        for (const auto& e : examples_) ids.insert(e.writer_id);
        return {ids.begin(), ids.end()};
    }

    /// Reorders examples by (writer, label); the order is stable otherwise.
    void sort_canonical() {
        std::stable_sort(examples_.begin(), examples_.end(), [](const Example& a, const Example& b) {
            return a.writer_id != b.writer_id ? a.writer_id < b.writer_id : a.label < b.label;
        });
    }

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.examples_ == b.examples_; }

private:
    std::vector<Example> examples_;
    LabelRegistry registry_ = LabelRegistry::ircam();
};

// ---------------------------------------------------------------------------
// IDX files

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;

    std::size_t header_bytes() const { return 4 + 4 * dims.size(); }
};

namespace detail {

inline void put_be32(std::vector<char>& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

inline std::uint32_t get_be32(const std::vector<char>& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(buf[off + i]);
    return v;
}

inline std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Parses the magic and dimension words of an IDX buffer. The third byte of
/// the magic must be 0x08 (unsigned bytes); the fourth is the rank.
inline IdxHeader parse_idx_header(const std::vector<char>& buf, const std::string& name = "IDX") {
    if (buf.size() < 4) throw FormatError(name + ": truncated at byte offset " + std::to_string(buf.size()) + " (no magic)");
    IdxHeader h;
    h.magic = detail::get_be32(buf, 0);
    if ((h.magic >> 16) != 0 || ((h.magic >> 8) & 0xFF) != 0x08 || (h.magic & 0xFF) == 0) {
        throw FormatError(name + ": bad magic " + detail::hex32(h.magic) + " at byte offset 0");
    }
    const std::size_t rank = h.magic & 0xFF;
    if (buf.size() < 4 + 4 * rank) {
        throw FormatError(name + ": truncated at byte offset " + std::to_string(buf.size()) + " inside the header");
    }
    for (std::size_t i = 0; i < rank; ++i) h.dims.push_back(detail::get_be32(buf, 4 + 4 * i));
    return h;
}

inline IdxHeader read_idx_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> buf(4);
    in.read(buf.data(), 4);
    buf.resize(static_cast<std::size_t>(in.gcount()));
    if (buf.size() == 4) {
        const std::size_t rank = static_cast<unsigned char>(buf[3]);
        buf.resize(4 + 4 * rank);
        in.read(buf.data() + 4, static_cast<std::streamsize>(4 * rank));
        buf.resize(4 + static_cast<std::size_t>(in.gcount()));
    }
    return parse_idx_header(buf, path.string());
}

inline std::vector<char> encode_idx_images(const Corpus& corpus) {
    std::vector<char> out;
    out.reserve(16 + corpus.size() * Glyph28::kPixels);
    detail::put_be32(out, kIdxImagesMagic);
    detail::put_be32(out, static_cast<std::uint32_t>(corpus.size()));
    detail::put_be32(out, Glyph28::kSide);
    detail::put_be32(out, Glyph28::kSide);
    for (const auto& e : corpus.examples()) {
        for (auto v : e.glyph.pixels()) out.push_back(static_cast<char>(v));
    }
    return out;
}

inline std::vector<char> encode_idx_labels(const Corpus& corpus) {
    std::vector<char> out;
    out.reserve(8 + corpus.size());
    detail::put_be32(out, kIdxLabelsMagic);
    detail::put_be32(out, static_cast<std::uint32_t>(corpus.size()));
    for (const auto& e : corpus.examples()) out.push_back(static_cast<char>(e.label));
    return out;
}

/// Writes the image and label IDX files. Writer ids are not part of IDX;
/// see write_writer_sidecar.
inline void write_idx(const Corpus& corpus, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
    if (corpus.empty()) throw ConfigError("write_idx: corpus is empty");
    detail::write_bytes(images_path, encode_idx_images(corpus));
    detail::write_bytes(labels_path, encode_idx_labels(corpus));
}

/// Decodes an image/label IDX pair. Every example gets writer id 0.
inline Corpus decode_idx(const std::vector<char>& images, const std::vector<char>& labels,
                         const LabelRegistry& registry = LabelRegistry::ircam()) {
    const IdxHeader ih = parse_idx_header(images, "images");
    if (ih.magic != kIdxImagesMagic) {
        throw FormatError("images: bad magic " + detail::hex32(ih.magic) + " at byte offset 0 (expected 0x00000803)");
    }
    if (ih.dims[1] != Glyph28::kSide) {
        throw FormatError("images: expected 28 rows at byte offset 8, found " + std::to_string(ih.dims[1]));
    }
    if (ih.dims[2] != Glyph28::kSide) {
        throw FormatError("images: expected 28 columns at byte offset 12, found " + std::to_string(ih.dims[2]));
    }
    const IdxHeader lh = parse_idx_header(labels, "labels");
    if (lh.magic != kIdxLabelsMagic) {
        throw FormatError("labels: bad magic " + detail::hex32(lh.magic) + " at byte offset 0 (expected 0x00000801)");
    }
    const std::size_t count = ih.dims[0];
    if (lh.dims[0] != count) {
        throw FormatError("count mismatch: images declare " + std::to_string(count) +
                          " at byte offset 4, labels declare " + std::to_string(lh.dims[0]) + " at byte offset 4");
    }
    const std::size_t image_bytes = 16 + count * Glyph28::kPixels;
    if (images.size() < image_bytes) {
        throw FormatError("images: truncated at byte offset " + std::to_string(images.size()) + ", expected " +
                          std::to_string(image_bytes) + " bytes");
    }
    if (images.size() > image_bytes) {
        throw FormatError("images: unexpected trailing data at byte offset " + std::to_string(image_bytes));
    }
    const std::size_t label_bytes = 8 + count;
    if (labels.size() < label_bytes) {
        throw FormatError("labels: truncated at byte offset " + std::to_string(labels.size()) + ", expected " +
                          std::to_string(label_bytes) + " bytes");
    }
    if (labels.size() > label_bytes) {
        throw FormatError("labels: unexpected trailing data at byte offset " + std::to_string(label_bytes));
    }

    std::vector<Example> examples;
    examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<unsigned char>(labels[8 + i]);
        if (!registry.contains(label)) {
            throw FormatError("labels: value " + std::to_string(label) + " at byte offset " + std::to_string(8 + i) +
                              " is outside [0, 33)");
        }
        const auto* px = reinterpret_cast<const std::uint8_t*>(images.data() + 16 + i * Glyph28::kPixels);
        examples.push_back(Example{Glyph28(std::span<const std::uint8_t>(px, Glyph28::kPixels)), label, 0});
    }
    return Corpus(std::move(examples), registry);
}

inline Corpus read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       const LabelRegistry& registry = LabelRegistry::ircam()) {
    return decode_idx(read_file_bytes(images_path), read_file_bytes(labels_path), registry);
}

// ---------------------------------------------------------------------------
// Writer sidecar: one decimal writer id per line, aligned with IDX order.

inline void write_writer_sidecar(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& e : corpus.examples()) out << e.writer_id << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<int> read_writer_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<int> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        int v = 0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (line.empty() || ec != std::errc{} || ptr != line.data() + line.size() || v < 0) {
            throw FormatError(path.string() + ": line " + std::to_string(lineno) + " is not a writer id");
        }
        ids.push_back(v);
    }
    return ids;
}

inline Corpus with_writers(const Corpus& corpus, const std::vector<int>& writer_ids) {
    if (writer_ids.size() != corpus.size()) {
        throw FormatError("writer sidecar has " + std::to_string(writer_ids.size()) + " entries for " +
                          std::to_string(corpus.size()) + " examples");
    }
    std::vector<Example> ex = corpus.examples();
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i].writer_id = writer_ids[i];
    return Corpus(std::move(ex), corpus.registry());
}

/// File names of a dataset directory.
struct DatasetFiles {
    static constexpr const char* kImages = "images-idx3-ubyte";
    static constexpr const char* kLabels = "labels-idx1-ubyte";
    static constexpr const char* kWriters = "writers.txt";
};

inline void write_dataset(const Corpus& corpus, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_idx(corpus, dir / DatasetFiles::kImages, dir / DatasetFiles::kLabels);
    write_writer_sidecar(corpus, dir / DatasetFiles::kWriters);
}

/// Reads a dataset directory; without a sidecar every writer id is 0.
inline Corpus read_dataset(const std::filesystem::path& dir) {
    Corpus c = read_idx(dir / DatasetFiles::kImages, dir / DatasetFiles::kLabels);
    if (std::filesystem::exists(dir / DatasetFiles::kWriters)) {
        c = with_writers(c, read_writer_sidecar(dir / DatasetFiles::kWriters));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Directory ingestion: root/<writer_id>/<label_index>.pgm

namespace detail {

inline bool parse_index(std::string_view s, int& out) {
    if (s.empty() || s.size() > 9) return false;
    if (s.size() > 1 && s[0] == '0') return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

inline Corpus load_image_dir(const std::filesystem::path& root, const LabelRegistry& registry = LabelRegistry::ircam()) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IngestionError(root.string(), "not a directory");
    std::vector<Example> examples;
    for (const auto& writer_entry : fs::directory_iterator(root)) {
        const fs::path wpath = writer_entry.path();
        int writer = 0;
        if (!writer_entry.is_directory() || !detail::parse_index(wpath.filename().string(), writer)) {
            throw IngestionError(wpath.string(), "expected a directory named by a writer id");
        }
        for (const auto& file : fs::directory_iterator(wpath)) {
            const fs::path fpath = file.path();
            int label = 0;
            if (!file.is_regular_file() || fpath.extension() != ".pgm" ||
                !detail::parse_index(fpath.stem().string(), label)) {
                throw IngestionError(fpath.string(), "unparsable file name (expected <label_index>.pgm)");
            }
            if (!registry.contains(label)) {
                throw IngestionError(fpath.string(), "label " + std::to_string(label) + " is outside [0, 33)");
            }
            try {
                examples.push_back(Example{preprocess_glyph(read_pgm(fpath)), label, writer});
            } catch (const NoForeground& e) {
                throw IngestionError(fpath.string(), e.what(), true);
            } catch (const Error& e) {
                throw IngestionError(fpath.string(), e.what());
            }
        }
    }
    if (examples.empty()) throw IngestionError(root.string(), "no images found (empty corpus)");
    Corpus c(std::move(examples), registry);
    c.sort_canonical();
    return c;
}

// ---------------------------------------------------------------------------
// Writer-disjoint split

struct SplitResult {
    Corpus train;
    Corpus test;
    std::vector<int> train_writers;  // ascending
    std::vector<int> test_writers;   // ascending
};

/// Shuffles the writers with `seed` and sends the first
/// round(n_writers * train_fraction) of them to train, the rest to test.
/// Both sides keep at least one writer. Examples keep their relative order.
inline SplitResult split_by_writer(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("split_by_writer: train fraction must lie in (0, 1)");
    }
    std::vector<int> writers = corpus.writer_ids();
    if (writers.size() < 2) throw ConfigError("split_by_writer: need at least 2 writers");
    std::mt19937_64 rng(seed);
    std::shuffle(writers.begin(), writers.end(), rng);
    const auto n = static_cast<long>(writers.size());
    const long n_train = std::clamp(std::lround(static_cast<double>(n) * train_fraction), 1L, n - 1);

    SplitResult r;
    r.train_writers.assign(writers.begin(), writers.begin() + n_train);
    r.test_writers.assign(writers.begin() + n_train, writers.end());
    std::sort(r.train_writers.begin(), r.train_writers.end());
    std::sort(r.test_writers.begin(), r.test_writers.end());

    std::vector<Example> train, test;
    for (const auto& e : corpus.examples()) {
        const bool in_train = std::binary_search(r.train_writers.begin(), r.train_writers.end(), e.writer_id);
        (in_train ? train : test).push_back(e);
    }
    r.train = Corpus(std::move(train), corpus.registry());
    r.test = Corpus(std::move(test), corpus.registry());
    return r;
}

}  // namespace tifinagh
