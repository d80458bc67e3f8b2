#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "tifinagh/errors.hpp"

namespace tifinagh {

struct Label {
    int index;
    std::u32string_view code_points;  // labialized letters carry U+2D6F
    std::string_view name;
};

namespace detail {

// The 33 letters of the IRCAM alphabet, ordered by code point sequence.
inline constexpr std::array<Label, 33> kIrcamLabels{{
    {0, U"ⴰ", "ya"},
    {1, U"ⴱ", "yab"},
    {2, U"ⴳ", "yag"},
    {3, U"ⴳⵯ", "yagw"},
    {4, U"ⴷ", "yad"},
    {5, U"ⴹ", "yadd"},
    {6, U"ⴻ", "yey"},
    {7, U"ⴼ", "yaf"},
    {8, U"ⴽ", "yak"},
    {9, U"ⴽⵯ", "yakw"},
    {10, U"ⵀ", "yah"},
    {11, U"ⵃ", "yahh"},
    {12, U"ⵄ", "yaa"},
    {13, U"ⵅ", "yakh"},
    {14, U"ⵇ", "yaq"},
    {15, U"ⵉ", "yi"},
    {16, U"ⵊ", "yazh"},
    {17, U"ⵍ", "yal"},
    {18, U"ⵎ", "yam"},
    {19, U"ⵏ", "yan"},
    {20, U"ⵓ", "yu"},
    {21, U"ⵔ", "yar"},
    {22, U"ⵕ", "yarr"},
    {23, U"ⵖ", "yagh"},
    {24, U"ⵙ", "yas"},
    {25, U"ⵚ", "yass"},
    {26, U"ⵛ", "yash"},
    {27, U"ⵜ", "yat"},
    {28, U"ⵟ", "yatt"},
    {29, U"ⵡ", "yaw"},
    {30, U"ⵢ", "yay"},
    {31, U"ⵣ", "yaz"},
    {32, U"ⵥ", "yazz"},
}};

}  // namespace detail

/// Maps dense class indices to Tifinagh letters.
class LabelRegistry {
public:
    static constexpr std::size_t kClasses = 33;

    explicit LabelRegistry(std::span<const Label> labels = detail::kIrcamLabels) : labels_(labels) {
        if (labels_.size() != kClasses) {
            throw ConfigError("label registry needs 33 entries, got " + std::to_string(labels_.size()));
        }
        std::set<std::u32string_view> seen;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].index != static_cast<int>(i)) throw ConfigError("label registry indices must be dense");
            if (!seen.insert(labels_[i].code_points).second) {
                throw ConfigError("duplicate code point in label registry");
            }
        }
    }

    static const LabelRegistry& ircam() {
        static const LabelRegistry registry;
        return registry;
    }

    std::size_t size() const noexcept { return labels_.size(); }
    bool contains(int label) const noexcept { return label >= 0 && static_cast<std::size_t>(label) < labels_.size(); }

    const Label& at(int label) const {
        if (!contains(label)) throw LabelError("label " + std::to_string(label) + " is outside [0, 33)");
        return labels_[static_cast<std::size_t>(label)];
    }

    std::span<const Label> labels() const noexcept { return labels_; }

    /// UTF-8 rendering of a letter, for human-readable output.
    std::string utf8(int label) const {
        std::string out;
        for (char32_t cp : at(label).code_points) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
        return out;
    }

private:
    std::span<const Label> labels_;
};

}  // namespace tifinagh
