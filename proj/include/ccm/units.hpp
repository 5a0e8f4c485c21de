#pragma once

#include "ccm/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace ccm {

/// What a configuration value measures. Decides which unit suffixes a string
/// may carry; bare numbers are always SI.
enum class Dimension {
    dimensionless,
    voltage,
    current,
    time,
    inductance,
    capacitance,
    resistance,
    slope,             ///< A/s
    angular_frequency, ///< rad/s; "Hz" suffixes are converted
    charge,            ///< A*s
    angle,             ///< rad; "deg" accepted
};

namespace detail {

inline std::optional<double> si_prefix(std::string_view p) {
    static constexpr std::array<std::pair<std::string_view, double>, 10> table{{
        {"f", 1e-15}, {"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6}, {"\xC2\xB5", 1e-6},
        {"m", 1e-3}, {"", 1.0}, {"k", 1e3}, {"M", 1e6}, {"G", 1e9},
    }};
    for (const auto& [name, scale] : table)
        if (p == name) return scale;
    return std::nullopt;
}

// Scale of `suffix` read as <prefix><unit>, if it ends with `unit`.
inline std::optional<double> prefixed(std::string_view suffix, std::string_view unit) {
    if (suffix.size() < unit.size() || suffix.substr(suffix.size() - unit.size()) != unit)
        return std::nullopt;
    return si_prefix(suffix.substr(0, suffix.size() - unit.size()));
}

inline std::optional<double> unit_scale(std::string_view suffix, Dimension dim) {
    auto first = [&](std::initializer_list<std::string_view> units) -> std::optional<double> {
        for (auto u : units)
            if (auto s = prefixed(suffix, u)) return s;
        return std::nullopt;
    };
    switch (dim) {
        case Dimension::dimensionless: return std::nullopt;
        case Dimension::voltage: return first({"V"});
        case Dimension::current: return first({"A"});
        case Dimension::time: return first({"s"});
        case Dimension::inductance: return first({"H"});
        case Dimension::capacitance: return first({"F"});
        case Dimension::resistance: return first({"Ohm", "ohm", "\xCE\xA9"});
        case Dimension::charge: return first({"A*s", "As", "C"});
        case Dimension::angle:
            if (suffix == "rad") return 1.0;
            if (suffix == "deg") return std::numbers::pi / 180.0;
            return std::nullopt;
        case Dimension::angular_frequency: {
            if (auto s = first({"rad/s"})) return s;
            if (auto s = first({"Hz"})) return *s * 2.0 * std::numbers::pi;
            return std::nullopt;
        }
        case Dimension::slope: {
            // <prefix>A/<prefix>s, e.g. "10A/us" or "mA/ns"
            const auto slash = suffix.find('/');
            if (slash == std::string_view::npos) return std::nullopt;
            const auto num = prefixed(suffix.substr(0, slash), "A");
            const auto den = prefixed(suffix.substr(slash + 1), "s");
            if (!num || !den) return std::nullopt;
            return *num / *den;
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Parses "240nH", "100 ns", "5MHz", "10A/us" or a bare number into SI units.
/// The number is read with from_chars, so the result does not depend on the
/// locale.
inline double parse_quantity(std::string_view text, Dimension dim) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin)
        throw ValidationError("'" + std::string(text) + "' does not start with a number");
    const std::string_view suffix = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
    if (suffix.empty()) return value;
    const auto scale = detail::unit_scale(suffix, dim);
    if (!scale)
        throw ValidationError("unit '" + std::string(suffix) + "' does not fit this field");
    return value * *scale;
}

}  // namespace ccm
