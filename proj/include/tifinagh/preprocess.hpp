#pragma once

// Glyph normalization: polarity -> Otsu foreground -> tight crop -> bicubic
// scale of the crop to the content box -> centered placement on a black
// canvas. Also the augmentation and missing-part perturbation operators
// applied to already normalized glyphs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tifinagh/errors.hpp"
#include "tifinagh/image.hpp"

namespace tifinagh {

/// Inverts the image when the median border pixel is brighter than 127, so
/// the result has a dark background and bright ink.
inline GrayImage normalize_polarity(const GrayImage& raw) {
    std::vector<std::uint8_t> border;
    const int w = raw.width(), h = raw.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (y == 0 || y == h - 1 || x == 0 || x == w - 1) border.push_back(raw.at(x, y));
        }
    }
    // lower median
    const auto mid = border.begin() + static_cast<std::ptrdiff_t>((border.size() - 1) / 2);
    std::nth_element(border.begin(), mid, border.end());
    if (*mid <= 127) return raw;
    GrayImage out = raw;
    for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(255 - v);
    return out;
}

/// Threshold t in [0, 255) maximizing the between-class variance of the split
/// {v <= t} | {v > t}. Ties, including the all-zero variance of a constant
/// image, resolve to the smallest t.
inline int otsu_threshold(const GrayImage& gray) {
    std::array<std::uint64_t, 256> hist{};
    for (auto v : gray.pixels()) ++hist[v];
    const double total = static_cast<double>(gray.size());
    double sum_all = 0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * static_cast<double>(hist[v]);

    std::uint64_t count_lo = 0;
    double sum_lo = 0;
    double best = -1;
    int best_t = 0;
    for (int t = 0; t < 255; ++t) {
        count_lo += hist[t];
        sum_lo += static_cast<double>(t) * static_cast<double>(hist[t]);
        const double n0 = static_cast<double>(count_lo);
        const double n1 = total - n0;
        double between = 0;
        if (n0 > 0 && n1 > 0) {
            const double diff = sum_lo / n0 - (sum_all - sum_lo) / n1;
            between = n0 * n1 * diff * diff;
        }
        if (between > best) {
            best = between;
            best_t = t;
        }
    }
    return best_t;
}

/// Tightest rectangle holding every pixel brighter than `threshold`.
inline Rect foreground_bbox(const GrayImage& gray, int threshold) {
    auto box = bounding_box_above(gray, threshold);
    if (!box) throw NoForeground("no pixel exceeds threshold " + std::to_string(threshold));
    return *box;
}

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace detail {

struct Taps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

// Pixel-center aligned mapping dst -> src, edge-clamped 4-tap support.
inline std::vector<Taps> cubic_taps(int in, int out) {
    std::vector<Taps> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
        const double src = (d + 0.5) * scale - 0.5;
        const int base = static_cast<int>(std::floor(src));
        for (int k = 0; k < 4; ++k) {
            const int s = base - 1 + k;
            taps[d].index[k] = std::clamp(s, 0, in - 1);
            taps[d].weight[k] = cubic_kernel(src - s);
        }
    }
    return taps;
}

}  // namespace detail

/// Bicubic resampling with edge clamping; results are clamped to [0, 255]
/// and rounded to the nearest integer.
inline GrayImage resize_bicubic(const GrayImage& src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw DimensionError("resize_bicubic: output dimensions must be positive");
    const int in_w = src.width(), in_h = src.height();
    const auto tx = detail::cubic_taps(in_w, out_w);
    const auto ty = detail::cubic_taps(in_h, out_h);

    std::vector<double> rows(static_cast<std::size_t>(in_h) * out_w);
    for (int y = 0; y < in_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double acc = 0;
            for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * src.at(tx[x].index[k], y);
            rows[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
    }
    GrayImage out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double acc = 0;
            for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * rows[static_cast<std::size_t>(ty[y].index[k]) * out_w + x];
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(acc, 0.0, 255.0)));
        }
    }
    return out;
}

namespace detail {

// round(value * num / den) for non-negative integers, halves rounding up.
inline int scaled_extent(int value, int num, int den) {
    return std::max(1, static_cast<int>((2LL * value * num + den) / (2LL * den)));
}

inline void place(GrayImage& canvas, const GrayImage& content, int ox, int oy) {
    for (int y = 0; y < content.height(); ++y) {
        for (int x = 0; x < content.width(); ++x) canvas.at(ox + x, oy + y) = content.at(x, y);
    }
}

}  // namespace detail

/// Full normalization into a `target` x `target` image whose content box is
/// target - 2*border on its longer side.
///
/// Pixels at or below the Otsu threshold inside the crop become 0, so the
/// background of the result is exactly black.
inline GrayImage preprocess_image(const RawGlyph& raw, int target = Glyph28::kSide, int border = Glyph28::kBorder) {
    const int inner = target - 2 * border;
    if (inner < 1) throw ConfigError("preprocess: border leaves no room for content");
    const GrayImage gray = normalize_polarity(raw);
    const int t = otsu_threshold(gray);
    const Rect box = foreground_bbox(gray, t);
    GrayImage roi = crop(gray, box);
    for (auto& v : roi.pixels()) {
        if (v <= t) v = 0;
    }
    const int longest = std::max(box.w, box.h);
    const int w = detail::scaled_extent(box.w, inner, longest);
    const int h = detail::scaled_extent(box.h, inner, longest);
    const GrayImage scaled = (w == box.w && h == box.h) ? roi : resize_bicubic(roi, w, h);

    GrayImage canvas(target, target, 0);
    detail::place(canvas, scaled, (target - w) / 2, (target - h) / 2);
    if (!bounding_box_above(canvas, 0)) throw NoForeground("foreground vanished during resampling");
    return canvas;
}

inline Glyph28 preprocess_glyph(const RawGlyph& raw) { return Glyph28(preprocess_image(raw)); }

struct AugmentParams {
    int max_shift = 2;
    double scale_min = 0.9;
    double scale_max = 1.1;
};

/// Random integer shift and uniform rescale of the ink, kept inside the
/// content box so the frame stays clear. Pure function of (glyph, seed).
inline Glyph28 augment(const Glyph28& glyph, std::uint64_t seed, AugmentParams p = {}) {
    if (p.max_shift < 0) throw ConfigError("augment: max_shift must be non-negative");
    if (!(p.scale_min > 0.0) || p.scale_max < p.scale_min) throw ConfigError("augment: invalid scale range");
    const auto box = glyph.ink_box();
    if (!box) return glyph;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> shift(-p.max_shift, p.max_shift);
    const int dx = shift(rng);
    const int dy = shift(rng);
    const double s = p.scale_min == p.scale_max ? p.scale_min
                                                : std::uniform_real_distribution<double>(p.scale_min, p.scale_max)(rng);

    constexpr int lo = Glyph28::kBorder;
    constexpr int inner = Glyph28::kSide - 2 * Glyph28::kBorder;
    const int longest = std::max(box->w, box->h);
    const double factor = std::min(s, static_cast<double>(inner) / longest);
    const int w = std::clamp(static_cast<int>(std::lround(box->w * factor)), 1, inner);
    const int h = std::clamp(static_cast<int>(std::lround(box->h * factor)), 1, inner);

    const GrayImage roi = crop(glyph.image(), *box);
    GrayImage scaled = (w == box->w && h == box->h) ? roi : resize_bicubic(roi, w, h);
    if (!bounding_box_above(scaled, 0)) scaled = roi;
    const int sw = scaled.width(), sh = scaled.height();

    // keep the ink centre where it was, then shift
    const int ox = std::clamp(box->x + static_cast<int>(std::floor((box->w - sw) / 2.0)) + dx, lo, lo + inner - sw);
    const int oy = std::clamp(box->y + static_cast<int>(std::floor((box->h - sh) / 2.0)) + dy, lo, lo + inner - sh);
    GrayImage canvas(Glyph28::kSide, Glyph28::kSide, 0);
    detail::place(canvas, scaled, ox, oy);
    return Glyph28(canvas);
}

struct PerturbResult {
    Glyph28 glyph;
    bool degenerate = false;  // no ink survived the erasure
};

/// Erases a random rectangle covering about `fraction` of the ink bounding
/// box, placed inside that box.
inline PerturbResult perturb_missing_parts(const Glyph28& glyph, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("perturb_missing_parts: fraction must lie in [0, 1]");
    const auto box = glyph.ink_box();
    if (!box) return {glyph, true};
    const double side = std::sqrt(fraction);
    const int w = std::clamp(static_cast<int>(std::lround(box->w * side)), 0, box->w);
    const int h = std::clamp(static_cast<int>(std::lround(box->h * side)), 0, box->h);
    PerturbResult r{glyph, false};
    if (w > 0 && h > 0) {
        std::mt19937_64 rng(seed);
        const int x0 = std::uniform_int_distribution<int>(box->x, box->x + box->w - w)(rng);
        const int y0 = std::uniform_int_distribution<int>(box->y, box->y + box->h - h)(rng);
        for (int y = y0; y < y0 + h; ++y) {
            for (int x = x0; x < x0 + w; ++x) r.glyph.at(x, y) = 0;
        }
    }
    r.degenerate = !r.glyph.has_ink();
    return r;
}

}  // namespace tifinagh
