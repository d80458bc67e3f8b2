#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tifinagh/errors.hpp"

namespace tifinagh {

/// 8-bit grayscale raster, row-major.
class GrayImage {
public:
    GrayImage() = default;

    GrayImage(int width, int height, std::uint8_t fill = 0) : width_(width), height_(height) {
        if (width < 1 || height < 1) {
            throw DimensionError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                                 std::to_string(height));
        }
        pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    GrayImage(int width, int height, std::vector<std::uint8_t> pixels) : GrayImage(width, height) {
        if (pixels.size() != pixels_.size()) {
            throw DimensionError("image of " + std::to_string(width) + "x" + std::to_string(height) +
                                 " given " + std::to_string(pixels.size()) + " pixels");
        }
        pixels_ = std::move(pixels);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<std::uint8_t> pixels() noexcept { return pixels_; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// A captured glyph before normalization; ink polarity is unknown.
using RawGlyph = GrayImage;

struct Rect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Tightest rectangle around pixels strictly above `threshold`, if any.
inline std::optional<Rect> bounding_box_above(const GrayImage& img, int threshold) {
    int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (img.at(x, y) > threshold) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) return std::nullopt;
    return Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

inline GrayImage crop(const GrayImage& img, const Rect& r) {
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > img.width() || r.y + r.h > img.height()) {
        throw DimensionError("crop rectangle lies outside the image");
    }
    GrayImage out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) out.at(x, y) = img.at(r.x + x, r.y + y);
    }
    return out;
}

/// Normalized 28x28 glyph: black (0) background, bright ink.
///
/// The type fixes the size; whether the outer frame is clear and whether any
/// ink is present are queried with invariant_violation(), because glyphs read
/// from foreign IDX files or produced by perturbation may legitimately fail.
class Glyph28 {
public:
    static constexpr int kSide = 28;
    static constexpr int kBorder = 2;
    static constexpr std::size_t kPixels = static_cast<std::size_t>(kSide) * kSide;

    Glyph28() { px_.fill(0); }

    explicit Glyph28(std::span<const std::uint8_t> pixels) {
        if (pixels.size() != kPixels) {
            throw DimensionError("Glyph28 needs 784 pixels, got " + std::to_string(pixels.size()));
        }
        std::copy(pixels.begin(), pixels.end(), px_.begin());
    }

    explicit Glyph28(const GrayImage& img) {
        if (img.width() != kSide || img.height() != kSide) {
            throw DimensionError("Glyph28 needs a 28x28 image, got " + std::to_string(img.width()) + "x" +
                                 std::to_string(img.height()));
        }
        auto src = img.pixels();
        std::copy(src.begin(), src.end(), px_.begin());
    }

    std::uint8_t at(int x, int y) const { return px_[static_cast<std::size_t>(y) * kSide + x]; }
    std::uint8_t& at(int x, int y) { return px_[static_cast<std::size_t>(y) * kSide + x]; }
    std::span<const std::uint8_t, kPixels> pixels() const noexcept { return px_; }

    GrayImage image() const { return GrayImage(kSide, kSide, std::vector<std::uint8_t>(px_.begin(), px_.end())); }

    bool has_ink() const noexcept {
        for (auto v : px_) {
            if (v > 0) return true;
        }
        return false;
    }

    bool frame_is_zero() const noexcept {
        for (int y = 0; y < kSide; ++y) {
            for (int x = 0; x < kSide; ++x) {
                const bool inner = x >= kBorder && x < kSide - kBorder && y >= kBorder && y < kSide - kBorder;
                if (!inner && at(x, y) != 0) return false;
            }
        }
        return true;
    }

    std::optional<std::string> invariant_violation() const {
        if (!frame_is_zero()) return "ink inside the 2-pixel frame";
        if (!has_ink()) return "no ink";
        return std::nullopt;
    }

    std::optional<Rect> ink_box() const { return bounding_box_above(image(), 0); }

    friend bool operator==(const Glyph28&, const Glyph28&) = default;

private:
    std::array<std::uint8_t, kPixels> px_;
};

// ---------------------------------------------------------------------------
// PGM codec (binary P5 on output; P5 and ASCII P2 on input)

namespace detail {

inline void skip_pgm_space(const std::vector<char>& buf, std::size_t& pos) {
    while (pos < buf.size()) {
        const char c = buf[pos];
        if (c == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++pos;
        } else {
            break;
        }
    }
}

inline long read_pgm_int(const std::vector<char>& buf, std::size_t& pos, const char* field) {
    skip_pgm_space(buf, pos);
    const std::size_t start = pos;
    long v = 0;
    while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
        v = v * 10 + (buf[pos] - '0');
        if (v > 1'000'000) throw FormatError(std::string("PGM ") + field + " too large");
        ++pos;
    }
    if (pos == start) {
        throw FormatError(std::string("PGM: expected ") + field + " at byte offset " + std::to_string(start));
    }
    return v;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::vector<char>& buf) {
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '2')) {
        throw FormatError("PGM: bad magic at byte offset 0 (expected P5 or P2)");
    }
    const bool binary = buf[1] == '5';
    std::size_t pos = 2;
    const long w = detail::read_pgm_int(buf, pos, "width");
    const long h = detail::read_pgm_int(buf, pos, "height");
    const long maxval = detail::read_pgm_int(buf, pos, "maxval");
    if (w < 1 || h < 1) throw FormatError("PGM: zero image dimension");
    if (maxval < 1 || maxval > 255) {
        throw FormatError("PGM: maxval " + std::to_string(maxval) + " unsupported (need 1..255)");
    }
    const auto scale = [maxval](long v) {
        return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
    };
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w * h));
    if (binary) {
        ++pos;  // exactly one whitespace byte precedes the raster
        if (buf.size() < pos + px.size()) {
            throw FormatError("PGM: truncated raster at byte offset " + std::to_string(buf.size()));
        }
        for (std::size_t i = 0; i < px.size(); ++i) {
            const long v = static_cast<unsigned char>(buf[pos + i]);
            if (v > maxval) throw FormatError("PGM: sample above maxval at byte offset " + std::to_string(pos + i));
            px[i] = scale(v);
        }
    } else {
        for (auto& p : px) {
            const long v = detail::read_pgm_int(buf, pos, "sample");
            if (v > maxval) throw FormatError("PGM: sample above maxval at byte offset " + std::to_string(pos));
            p = scale(v);
        }
    }
    return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
    try {
        return decode_pgm(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tifinagh
