#pragma once

// Procedural stand-in corpus: one stroke skeleton per class, rendered with
// per-writer style (stroke width, slant, control-point jitter, ink and paper
// levels, polarity) and then normalized like any captured glyph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tifinagh/dataset.hpp"
#include "tifinagh/image.hpp"
#include "tifinagh/labels.hpp"
#include "tifinagh/preprocess.hpp"

namespace tifinagh {

struct Point {
    double x;
    double y;
};

/// Either an open polyline or an elliptic arc (angles in degrees, y down).
struct Stroke {
    enum class Kind { polyline, arc } kind = Kind::polyline;
    std::vector<Point> points;
    Point center{};
    double rx = 0, ry = 0, from_deg = 0, to_deg = 360;
};

using Skeleton = std::vector<Stroke>;

namespace detail {

inline Stroke line(double x0, double y0, double x1, double y1) { return {Stroke::Kind::polyline, {{x0, y0}, {x1, y1}}}; }
inline Stroke poly(std::vector<Point> pts) { return {Stroke::Kind::polyline, std::move(pts)}; }
inline Stroke arc(double cx, double cy, double rx, double ry, double from, double to) {
    return {Stroke::Kind::arc, {}, {cx, cy}, rx, ry, from, to};
}
inline Stroke ring(double cx, double cy, double r) { return arc(cx, cy, r, r, 0, 360); }
inline Stroke dot(double cx, double cy) { return arc(cx, cy, 0.05, 0.05, 0, 360); }

template <typename... S>
Skeleton skel(S... s) {
    return Skeleton{s...};
}

}  // namespace detail

/// Skeletons in the unit square, indexed like the label registry. They are
/// loose geometric caricatures chosen to be mutually distinct after
/// aspect-preserving normalization.
inline const std::vector<Skeleton>& class_skeletons() {
    using namespace detail;
    static const std::vector<Skeleton> skeletons = {
        skel(ring(.5, .5, .5)),                                                  // ya
        skel(ring(.5, .5, .5), dot(.5, .5)),                                     // yab
        skel(ring(.5, .5, .5), line(0, .5, 1, .5)),                              // yag
        skel(ring(.4, .6, .4), line(0, .6, .8, .6), line(.95, 0, .95, .35)),     // yagw
        skel(poly({{0, 1}, {.5, 0}, {1, 1}})),                                   // yad
        skel(poly({{0, 1}, {.5, 0}, {1, 1}}), line(.22, .6, .78, .6)),           // yadd
        skel(line(0, 0, 0, 1), line(0, 0, .8, 0), line(0, .5, .6, .5), line(0, 1, .8, 1)),  // yey
        skel(line(0, 0, 0, 1), line(.8, 0, .8, 1), line(0, .5, .8, .5)),         // yaf
        skel(line(.5, 0, .5, 1), line(0, .5, 1, .5)),                            // yak
        skel(line(.4, .2, .4, 1), line(0, .6, .8, .6), line(.95, 0, .95, .35)),  // yakw
        skel(poly({{0, 1}, {0, 0}, {.8, 0}, {.8, 1}})),                          // yah
        skel(line(0, 0, 1, 1), line(1, 0, 0, 1)),                                // yahh
        skel(poly({{0, 1}, {0, 0}, {.5, .6}, {1, 0}, {1, 1}})),                  // yaa
        skel(line(0, 0, 1, 1), line(1, 0, 0, 1), line(0, .5, 1, .5)),            // yakh
        skel(poly({{0, 0}, {1, 0}, {0, 1}, {1, 1}})),                            // yaq
        skel(line(.5, 0, .5, 1)),                                                // yi
        skel(line(.5, 0, .5, 1), line(.2, 0, .8, 0), line(.2, 1, .8, 1)),        // yazh
        skel(line(.2, 0, .2, 1), line(.6, 0, .6, 1)),                            // yal
        skel(poly({{0, 0}, {0, 1}, {.7, 1}})),                                   // yam
        skel(line(0, .5, 1, .5)),                                                // yan
        skel(line(0, .3, 1, .3), line(0, .7, 1, .7)),                            // yu
        skel(poly({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}})),                    // yar
        skel(poly({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}), line(0, 0, 1, 1)),  // yarr
        skel(line(0, 0, .5, .5), line(1, 0, .5, .5), line(.5, .5, .5, 1)),       // yagh
        skel(line(0, 0, 1, 0), line(.1, .5, .9, .5), line(0, 1, 1, 1)),          // yas
        skel(line(0, 0, 1, 0), line(.1, .5, .9, .5), line(0, 1, 1, 1), line(.5, 0, .5, 1)),  // yass
        skel(arc(.5, .5, .5, .5, 45, 315)),                                      // yash
        skel(line(0, 0, 1, 0), line(.5, 0, .5, 1)),                              // yat
        skel(line(.5, 0, .5, 1), line(0, 1, 1, 1)),                              // yatt
        skel(line(0, 0, 0, .5), arc(.5, .5, .5, .5, 0, 180), line(1, .5, 1, 0)), // yaw
        skel(poly({{0, 1}, {0, 0}, {1, 1}, {1, 0}})),                            // yay
        skel(line(.5, 0, .5, 1), arc(0, .5, .35, .5, -90, 90), arc(1, .5, .35, .5, 90, 270)),  // yaz
        skel(line(.5, 0, .5, 1), arc(0, .5, .35, .5, -90, 90), arc(1, .5, .35, .5, 90, 270),
             line(0, .5, 1, .5)),                                                // yazz
    };
    return skeletons;
}

/// Handwriting style shared by every glyph of one writer.
struct WriterStyle {
    double stroke_width;  // raw pixels, 1..3
    double slant_deg;     // -10..10
    double jitter;        // control-point jitter amplitude, fraction of glyph size, <= 0.1
    int glyph_size;       // raw pixels spanned by the unit square
    int paper;            // background level before polarity
    int ink;              // stroke level before polarity
};

inline WriterStyle writer_style(std::uint64_t seed, int writer) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(writer), 0x57u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    WriterStyle s{};
    s.stroke_width = 1.0 + 2.0 * u(rng);
    s.slant_deg = -10.0 + 20.0 * u(rng);
    s.jitter = 0.03 + 0.07 * u(rng);
    s.glyph_size = 28 + static_cast<int>(u(rng) * 13);  // 28..40
    const int paper = 200 + static_cast<int>(u(rng) * 56);
    const int ink = static_cast<int>(u(rng) * 60);
    const bool light_on_dark = u(rng) < 0.2;
    s.paper = light_on_dark ? 255 - paper : paper;
    s.ink = light_on_dark ? 255 - ink : ink;
    return s;
}

namespace detail {

struct Segment {
    Point a, b;
};

inline double segment_distance(Point p, const Segment& s) {
    const double vx = s.b.x - s.a.x, vy = s.b.y - s.a.y;
    const double wx = p.x - s.a.x, wy = p.y - s.a.y;
    const double len2 = vx * vx + vy * vy;
    const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

// Jitters control points, flattens arcs and maps the unit square to pixels.
inline std::vector<Segment> flatten(const Skeleton& sk, const WriterStyle& style, std::mt19937_64& rng,
                                    double margin) {
    std::uniform_real_distribution<double> jit(-style.jitter, style.jitter);
    const double shear = std::tan(style.slant_deg * std::numbers::pi / 180.0);
    const double size = style.glyph_size;
    auto to_px = [&](Point p) {
        const double x = p.x + (0.5 - p.y) * shear;
        return Point{margin + x * size, margin + p.y * size};
    };
    std::vector<Segment> segs;
    for (const Stroke& st : sk) {
        std::vector<Point> pts;
        if (st.kind == Stroke::Kind::polyline) {
            for (Point p : st.points) pts.push_back({p.x + jit(rng), p.y + jit(rng)});
        } else {
            const Point c{st.center.x + jit(rng), st.center.y + jit(rng)};
            const double rx = std::max(0.04, st.rx + jit(rng) * st.rx);
            const double ry = std::max(0.04, st.ry + jit(rng) * st.ry);
            const int steps = 32;
            for (int i = 0; i <= steps; ++i) {
                const double a = (st.from_deg + (st.to_deg - st.from_deg) * i / steps) * std::numbers::pi / 180.0;
                pts.push_back({c.x + rx * std::cos(a), c.y + ry * std::sin(a)});
            }
        }
        if (pts.size() == 1) pts.push_back(pts.front());
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) segs.push_back({to_px(pts[i]), to_px(pts[i + 1])});
    }
    return segs;
}

}  // namespace detail

/// Renders one glyph with anti-aliased strokes onto a raw canvas with a
/// random placement, in the writer's ink and paper levels.
inline RawGlyph render_glyph(const Skeleton& skeleton, const WriterStyle& style, std::uint64_t glyph_seed) {
    std::mt19937_64 rng(glyph_seed);
    std::uniform_int_distribution<int> margin_dist(10, 14);
    const int margin = margin_dist(rng);
    const int side = style.glyph_size + 2 * margin;
    const auto segs = detail::flatten(skeleton, style, rng, margin);
    const double half = style.stroke_width / 2.0;

    // distance to the nearest stroke, only evaluated near each segment
    std::vector<double> dist(static_cast<std::size_t>(side) * side, 1e9);
    const double reach = half + 1.0;
    for (const auto& s : segs) {
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.x, s.b.x) - reach)));
        const int x1 = std::min(side - 1, static_cast<int>(std::ceil(std::max(s.a.x, s.b.x) + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.y, s.b.y) - reach)));
        const int y1 = std::min(side - 1, static_cast<int>(std::ceil(std::max(s.a.y, s.b.y) + reach)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double& d = dist[static_cast<std::size_t>(y) * side + x];
                d = std::min(d, detail::segment_distance({x + 0.5, y + 0.5}, s));
            }
        }
    }

    std::uniform_int_distribution<int> noise(-3, 3);
    RawGlyph img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const double cover = std::clamp(half + 0.5 - dist[static_cast<std::size_t>(y) * side + x], 0.0, 1.0);
            const double v = style.paper + (style.ink - style.paper) * cover + noise(rng);
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return img;
}

inline std::uint64_t glyph_seed(std::uint64_t seed, int writer, int label) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(writer), static_cast<std::uint32_t>(label), 0x47u};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// n_writers x 33 normalized examples in canonical (writer, label) order.
inline Corpus synth_corpus(int n_writers, std::uint64_t seed, const LabelRegistry& registry = LabelRegistry::ircam()) {
    if (n_writers < 1) throw ConfigError("synth_corpus: need at least one writer");
    const auto& skeletons = class_skeletons();
    std::vector<Example> examples;
    examples.reserve(static_cast<std::size_t>(n_writers) * registry.size());
    for (int w = 0; w < n_writers; ++w) {
        const WriterStyle style = writer_style(seed, w);
        for (int label = 0; label < static_cast<int>(registry.size()); ++label) {
            const RawGlyph raw = render_glyph(skeletons[static_cast<std::size_t>(label)], style, glyph_seed(seed, w, label));
            examples.push_back(Example{preprocess_glyph(raw), label, w});
        }
    }
    return Corpus(std::move(examples), registry);
}

}  // namespace tifinagh
