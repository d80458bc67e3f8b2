#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "support/tempdir.hpp"
#include "tifinagh/dataset.hpp"
#include "tifinagh/synth.hpp"

using namespace tifinagh;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

Corpus first_n(const Corpus& c, std::size_t n) {
    return Corpus(std::vector<Example>(c.examples().begin(), c.examples().begin() + static_cast<long>(n)));
}

std::vector<char> bytes_of(std::initializer_list<int> v) {
    std::vector<char> out;
    for (int b : v) out.push_back(static_cast<char>(b));
    return out;
}

std::string format_error_of(const std::vector<char>& images, const std::vector<char>& labels) {
    try {
        decode_idx(images, labels);
    } catch (const FormatError& e) {
        return e.what();
    }
    return {};
}

const Corpus& small_corpus() {
    static const Corpus c = synth_corpus(2, 5);
    return c;
}

}  // namespace

// ---- labels ----------------------------------------------------------------

TEST(Labels, RegistryShape) {
    const auto& r = LabelRegistry::ircam();
    ASSERT_EQ(r.size(), 33u);
    std::set<std::u32string_view> codes;
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(r.labels()[i].index, static_cast<int>(i));
        codes.insert(r.labels()[i].code_points);
        for (char32_t cp : r.labels()[i].code_points) {
            EXPECT_GE(cp, 0x2D30u);
            EXPECT_LE(cp, 0x2D7Fu);
        }
    }
    EXPECT_EQ(codes.size(), 33u);
    EXPECT_TRUE(std::is_sorted(r.labels().begin(), r.labels().end(),
                               [](const Label& a, const Label& b) { return a.code_points < b.code_points; }));
    EXPECT_EQ(r.at(0).name, "ya");
    EXPECT_EQ(r.utf8(0), "\xE2\xB4\xB0");
    EXPECT_THROW(r.at(33), LabelError);
    EXPECT_THROW(r.at(-1), LabelError);
}

TEST(Labels, RejectsMalformedRegistries) {
    std::array<Label, 33> dup = detail::kIrcamLabels;
    dup[5].code_points = dup[4].code_points;
    EXPECT_THROW(LabelRegistry{dup}, ConfigError);
    std::array<Label, 33> sparse = detail::kIrcamLabels;
    sparse[7].index = 40;
    EXPECT_THROW(LabelRegistry{sparse}, ConfigError);
    EXPECT_THROW(LabelRegistry(std::span<const Label>(detail::kIrcamLabels.data(), 32)), ConfigError);
}

TEST(CorpusType, RejectsBadLabelsAndWriters) {
    EXPECT_THROW(Corpus({Example{Glyph28{}, 33, 0}}), LabelError);
    EXPECT_THROW(Corpus({Example{Glyph28{}, -1, 0}}), LabelError);
    EXPECT_THROW(Corpus({Example{Glyph28{}, 2, -4}}), ConfigError);
}

// ---- IDX ----------------------------------------------------------------------

TEST(Idx, SingleImageLayout) {
    const Corpus one = first_n(small_corpus(), 1);
    const auto images = encode_idx_images(one);
    ASSERT_EQ(images.size(), 16u + 784u);
    EXPECT_EQ(images[0], 0x00);
    EXPECT_EQ(images[1], 0x00);
    EXPECT_EQ(images[2], 0x08);
    EXPECT_EQ(images[3], 0x03);
    EXPECT_EQ(std::vector<char>(images.begin() + 4, images.begin() + 16),
              bytes_of({0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28}));
    EXPECT_TRUE(std::equal(images.begin() + 16, images.end(), one[0].glyph.pixels().begin(),
                           [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }));
    const auto labels = encode_idx_labels(one);
    EXPECT_EQ(labels, bytes_of({0, 0, 8, 1, 0, 0, 0, 1, one[0].label}));
}

TEST(Idx, RoundTripIsBitIdentical) {
    TempDir dir("idx");
    const Corpus ten = first_n(small_corpus(), 10);
    write_idx(ten, dir / "img", dir / "lbl");
    const Corpus back = read_idx(dir / "img", dir / "lbl");
    ASSERT_EQ(back.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(back[i].glyph, ten[i].glyph);
        EXPECT_EQ(back[i].label, ten[i].label);
        EXPECT_EQ(back[i].writer_id, 0);  // IDX carries no writer
    }
    write_idx(back, dir / "img2", dir / "lbl2");
    EXPECT_EQ(read_file_bytes(dir / "img2"), read_file_bytes(dir / "img"));
    EXPECT_EQ(read_file_bytes(dir / "lbl2"), read_file_bytes(dir / "lbl"));
}

TEST(Idx, CanonicalMnistHeader) {
    const auto header = bytes_of({0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x27, 0x10, 0, 0, 0, 0x1C, 0, 0, 0, 0x1C});
    const IdxHeader h = parse_idx_header(header);
    EXPECT_EQ(h.magic, 0x00000803u);
    EXPECT_EQ(h.dims, (std::vector<std::uint32_t>{10000, 28, 28}));
    EXPECT_EQ(h.header_bytes(), 16u);

    // a full file of that shape decodes against an MNIST-style label file
    TempDir dir("mnist");
    std::vector<char> images = header;
    images.resize(16 + 10000u * 784u, 0);
    std::vector<char> labels = bytes_of({0, 0, 8, 1, 0, 0, 0x27, 0x10});
    for (int i = 0; i < 10000; ++i) labels.push_back(static_cast<char>(i % 10));
    {
        std::ofstream(dir / "t10k-images-idx3-ubyte", std::ios::binary).write(images.data(), static_cast<long>(images.size()));
        std::ofstream(dir / "t10k-labels-idx1-ubyte", std::ios::binary).write(labels.data(), static_cast<long>(labels.size()));
    }
    EXPECT_EQ(read_idx_header(dir / "t10k-images-idx3-ubyte").dims, (std::vector<std::uint32_t>{10000, 28, 28}));
    const Corpus c = read_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
    EXPECT_EQ(c.size(), 10000u);
    EXPECT_EQ(c[9999].label, 9);
}

TEST(Idx, FormatErrorsNameByteOffsets) {
    const Corpus two = first_n(small_corpus(), 2);
    const auto images = encode_idx_images(two);
    const auto labels = encode_idx_labels(two);

    auto bad_magic = images;
    bad_magic[3] = 0x01;
    EXPECT_NE(format_error_of(bad_magic, labels).find("offset 0"), std::string::npos);

    auto wrong_kind = labels;
    wrong_kind[3] = 0x03;  // images magic in the labels file
    EXPECT_NE(format_error_of(images, wrong_kind), "");

    auto truncated = images;
    truncated.resize(truncated.size() - 10);
    const auto msg = format_error_of(truncated, labels);
    EXPECT_NE(msg.find("offset"), std::string::npos) << msg;

    auto trailing = images;
    trailing.push_back(0);
    EXPECT_NE(format_error_of(trailing, labels).find("offset"), std::string::npos);

    auto count = labels;
    count[7] = 3;
    count.push_back(0);
    EXPECT_NE(format_error_of(images, count).find("offset 4"), std::string::npos);

    auto rows = images;
    rows[11] = 27;
    EXPECT_NE(format_error_of(rows, labels).find("offset 8"), std::string::npos);

    EXPECT_THROW(decode_idx(bytes_of({0, 0}), labels), FormatError);
    EXPECT_THROW(write_idx(Corpus{}, "/tmp/x", "/tmp/y"), ConfigError);
}

TEST(Idx, LabelOutOfRangeIsRejected) {
    const Corpus two = first_n(small_corpus(), 2);
    auto labels = encode_idx_labels(two);
    labels[9] = 33;
    EXPECT_THROW(decode_idx(encode_idx_images(two), labels), FormatError);
}

// ---- sidecar and dataset directories ----------------------------------------------

TEST(Dataset, DirectoryRoundTripKeepsWriters) {
    TempDir dir("dataset");
    write_dataset(small_corpus(), dir.path());
    EXPECT_TRUE(fs::exists(dir / DatasetFiles::kImages));
    EXPECT_TRUE(fs::exists(dir / DatasetFiles::kLabels));
    EXPECT_TRUE(fs::exists(dir / DatasetFiles::kWriters));
    EXPECT_EQ(read_dataset(dir.path()), small_corpus());
}

TEST(Dataset, SidecarErrors) {
    TempDir dir("sidecar");
    write_dataset(first_n(small_corpus(), 3), dir.path());
    std::ofstream(dir / DatasetFiles::kWriters) << "0\n1\n";
    EXPECT_THROW(read_dataset(dir.path()), FormatError);
    std::ofstream(dir / DatasetFiles::kWriters) << "0\nx\n2\n";
    EXPECT_THROW(read_dataset(dir.path()), FormatError);
    std::ofstream(dir / DatasetFiles::kWriters) << "0\n-1\n2\n";
    EXPECT_THROW(read_dataset(dir.path()), FormatError);
    fs::remove(dir / DatasetFiles::kWriters);
    for (const auto& e : read_dataset(dir.path()).examples()) EXPECT_EQ(e.writer_id, 0);
}

// ---- ingestion -----------------------------------------------------------------------

namespace {
void write_writer_dir(const fs::path& root, int writer, std::uint64_t seed) {
    const auto style = writer_style(seed, writer);
    fs::create_directories(root / std::to_string(writer));
    for (int label = 0; label < 33; ++label) {
        const auto raw = render_glyph(class_skeletons()[static_cast<std::size_t>(label)], style,
                                      glyph_seed(seed, writer, label));
        write_pgm(raw, root / std::to_string(writer) / (std::to_string(label) + ".pgm"));
    }
}

IngestionError ingestion_error(const fs::path& root) {
    try {
        load_image_dir(root);
    } catch (const IngestionError& e) {
        return e;
    }
    return IngestionError("", "none");
}
}  // namespace

TEST(Ingestion, TwoWritersGiveCanonicalCorpus) {
    TempDir dir("ingest");
    write_writer_dir(dir.path(), 7, 3);
    write_writer_dir(dir.path(), 2, 3);
    const Corpus c = load_image_dir(dir.path());
    ASSERT_EQ(c.size(), 66u);
    EXPECT_EQ(c.writer_ids(), (std::vector<int>{2, 7}));
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_EQ(c[i].writer_id, i < 33 ? 2 : 7);
        EXPECT_EQ(c[i].label, static_cast<int>(i % 33));
        EXPECT_FALSE(c[i].glyph.invariant_violation());
    }
}

TEST(Ingestion, LabelOutOfRange) {
    TempDir dir("ingest33");
    fs::create_directories(dir / "0");
    write_pgm(GrayImage(10, 10, 255), dir / "0" / "33.pgm");
    const auto e = ingestion_error(dir.path());
    EXPECT_NE(e.path().find("33.pgm"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("outside"), std::string::npos);
}

TEST(Ingestion, EmptyDirectory) {
    TempDir dir("ingest_empty");
    EXPECT_NE(std::string(ingestion_error(dir.path()).what()).find("empty corpus"), std::string::npos);
    EXPECT_THROW(load_image_dir(dir / "missing"), IngestionError);
}

TEST(Ingestion, BadNamesAndUnreadableImages) {
    {
        TempDir dir("ingest_names");
        fs::create_directories(dir / "0");
        write_pgm(GrayImage(4, 4, 0), dir / "0" / "yab.pgm");
        EXPECT_NE(ingestion_error(dir.path()).path().find("yab.pgm"), std::string::npos);
    }
    {
        TempDir dir("ingest_leading_zero");
        fs::create_directories(dir / "0");
        write_pgm(GrayImage(4, 4, 0), dir / "0" / "01.pgm");
        EXPECT_NE(ingestion_error(dir.path()).path().find("01.pgm"), std::string::npos);
    }
    {
        TempDir dir("ingest_writer");
        fs::create_directories(dir / "alice");
        EXPECT_NE(ingestion_error(dir.path()).path().find("alice"), std::string::npos);
    }
    {
        TempDir dir("ingest_garbage");
        fs::create_directories(dir / "0");
        std::ofstream(dir / "0" / "3.pgm") << "not an image";
        const auto e = ingestion_error(dir.path());
        EXPECT_NE(e.path().find("3.pgm"), std::string::npos);
        EXPECT_FALSE(e.no_foreground());
    }
    {
        TempDir dir("ingest_blank");
        fs::create_directories(dir / "0");
        write_pgm(GrayImage(12, 12, 255), dir / "0" / "4.pgm");
        EXPECT_TRUE(ingestion_error(dir.path()).no_foreground());
    }
}

// ---- split -------------------------------------------------------------------------------

namespace {
Corpus writers_only(int n_writers) {
    std::vector<Example> ex;
    Glyph28 g;
    g.at(10, 10) = 1;
    for (int w = 0; w < n_writers; ++w)
        for (int l = 0; l < 3; ++l) ex.push_back({g, l, w});
    return Corpus(std::move(ex));
}
}  // namespace

TEST(Split, FullCorpusWriterCounts) {
    const auto r = split_by_writer(writers_only(102), 0.86, 1);
    EXPECT_EQ(r.train_writers.size(), 88u);
    EXPECT_EQ(r.test_writers.size(), 14u);
    EXPECT_EQ(r.train.size(), 88u * 3);
    EXPECT_EQ(r.test.size(), 14u * 3);
}

TEST(Split, DeterministicPerSeed) {
    const Corpus c = writers_only(30);
    const auto a = split_by_writer(c, 0.7, 9), b = split_by_writer(c, 0.7, 9);
    EXPECT_EQ(a.train_writers, b.train_writers);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(split_by_writer(c, 0.7, 10).train_writers, a.train_writers);
}

TEST(Split, TruePartitionOverSeedsAndFractions) {
    const Corpus c = writers_only(40);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double f : {0.01, 0.3, 0.5, 0.86, 0.99}) {
            const auto r = split_by_writer(c, f, seed);
            std::vector<int> all = r.train_writers;
            all.insert(all.end(), r.test_writers.begin(), r.test_writers.end());
            std::sort(all.begin(), all.end());
            ASSERT_EQ(all, c.writer_ids());
            ASSERT_FALSE(r.train_writers.empty());
            ASSERT_FALSE(r.test_writers.empty());
            ASSERT_EQ(r.train.size() + r.test.size(), c.size());
            for (const auto& e : r.train.examples())
                ASSERT_TRUE(std::binary_search(r.train_writers.begin(), r.train_writers.end(), e.writer_id));
            for (const auto& e : r.test.examples())
                ASSERT_TRUE(std::binary_search(r.test_writers.begin(), r.test_writers.end(), e.writer_id));
        }
    }
}

TEST(Split, Errors) {
    EXPECT_THROW(split_by_writer(writers_only(5), 0.0, 1), ConfigError);
    EXPECT_THROW(split_by_writer(writers_only(5), 1.0, 1), ConfigError);
    EXPECT_THROW(split_by_writer(writers_only(1), 0.5, 1), ConfigError);
}

// ---- synthetic corpus -----------------------------------------------------------------------

TEST(Synth, FullSizeCorpus) {
    const Corpus c = synth_corpus(102, 1);
    ASSERT_EQ(c.size(), 3366u);
    std::array<int, 33> per_class{};
    for (const auto& e : c.examples()) {
        ++per_class[static_cast<std::size_t>(e.label)];
        ASSERT_FALSE(e.glyph.invariant_violation());
    }
    for (int n : per_class) EXPECT_EQ(n, 102);
    EXPECT_EQ(c.writer_ids().size(), 102u);
    EXPECT_EQ(c.writer_ids().back(), 101);

    Corpus sorted = c;
    sorted.sort_canonical();
    EXPECT_EQ(sorted, c);
}

TEST(Synth, DeterministicAndSeedSensitive) {
    EXPECT_EQ(synth_corpus(3, 42), synth_corpus(3, 42));
    const Corpus a = synth_corpus(3, 42), b = synth_corpus(3, 43);
    int differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i) differing += !(a[i].glyph == b[i].glyph);
    EXPECT_GT(differing, 90);
    EXPECT_THROW(synth_corpus(0, 1), ConfigError);
}

TEST(Synth, SkeletonsAndStyles) {
    EXPECT_EQ(class_skeletons().size(), 33u);
    for (int w = 0; w < 200; ++w) {
        const auto s = writer_style(7, w);
        ASSERT_GE(s.stroke_width, 1.0);
        ASSERT_LE(s.stroke_width, 3.0);
        ASSERT_LE(std::abs(s.slant_deg), 10.0);
        ASSERT_LE(s.jitter, 0.10);
    }
    // class templates render to pairwise different glyphs under one style
    const auto style = writer_style(1, 0);
    std::set<std::vector<std::uint8_t>> distinct;
    for (int l = 0; l < 33; ++l) {
        const auto g = preprocess_glyph(render_glyph(class_skeletons()[static_cast<std::size_t>(l)], style, 5));
        distinct.insert(std::vector<std::uint8_t>(g.pixels().begin(), g.pixels().end()));
    }
    EXPECT_EQ(distinct.size(), 33u);
}
