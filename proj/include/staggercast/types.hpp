#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace staggercast {

using UserId = std::uint64_t;
using RequestId = std::uint64_t;

inline constexpr double kSecondsPerDay = 86400.0;

enum class AppClass : std::uint8_t {
    VideoOnDemand,
    LiveVideo,
    Gaming,
    Email,
    RemoteWork,
    Browsing,
    BulkSync,
    P2P,
};

enum class Genre : std::uint8_t { Sport, Movie, Series, Music, Other, None };

enum class QosClass : std::uint8_t { Interactive, Streaming, Bulk };

enum class Resource : std::uint8_t { Transit, Aggregation };

enum class IncentiveKind : std::uint8_t {
    QosGuaranteeLater,
    ContractDiscount,
    ZeroRating,
    BundleDiscount,
    AdRemoval,
    QualityUpgrade,
    EnvironmentalInfo,
    CongestionInfo,
    LoyaltyCredits,
};

enum class Strategy : std::uint8_t { Stage, Rewrite, Redirect };

enum class ChoiceKind : std::uint8_t { Continue, Delay, ShiftContent };

enum class Propensity : std::uint8_t { Never, Occasionally, Often };

// Name tables. Order matches the enumerator values.
template <class E>
struct EnumNames;

template <>
struct EnumNames<AppClass> {
    static constexpr std::array<std::string_view, 8> names{
        "VideoOnDemand", "LiveVideo", "Gaming", "Email", "RemoteWork", "Browsing", "BulkSync", "P2P"};
};
template <>
struct EnumNames<Genre> {
    static constexpr std::array<std::string_view, 6> names{"Sport", "Movie", "Series", "Music", "Other", "None"};
};
template <>
struct EnumNames<QosClass> {
    static constexpr std::array<std::string_view, 3> names{"Interactive", "Streaming", "Bulk"};
};
template <>
struct EnumNames<Resource> {
    static constexpr std::array<std::string_view, 2> names{"transit", "aggregation"};
};
template <>
struct EnumNames<IncentiveKind> {
    static constexpr std::array<std::string_view, 9> names{
        "QosGuaranteeLater", "ContractDiscount", "ZeroRating",     "BundleDiscount", "AdRemoval",
        "QualityUpgrade",    "EnvironmentalInfo", "CongestionInfo", "LoyaltyCredits"};
};
template <>
struct EnumNames<Strategy> {
    static constexpr std::array<std::string_view, 3> names{"Stage", "Rewrite", "Redirect"};
};
template <>
struct EnumNames<ChoiceKind> {
    static constexpr std::array<std::string_view, 3> names{"Continue", "Delay", "ShiftContent"};
};
template <>
struct EnumNames<Propensity> {
    static constexpr std::array<std::string_view, 3> names{"Never", "Occasionally", "Often"};
};

template <class E>
constexpr std::size_t enum_count() {
    return EnumNames<E>::names.size();
}

template <class E>
constexpr std::string_view to_string(E value) {
    return EnumNames<E>::names[static_cast<std::size_t>(value)];
}

template <class E>
constexpr std::optional<E> parse_enum(std::string_view text) {
    const auto& names = EnumNames<E>::names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == text) return static_cast<E>(i);
    }
    return std::nullopt;
}

template <class E>
constexpr auto all_values() {
    std::array<E, enum_count<E>()> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<E>(i);
    return out;
}

/// Dense map over a closed enumeration; always total.
template <class E, class V>
struct EnumMap {
    std::array<V, enum_count<E>()> values{};

    V& operator[](E key) { return values[static_cast<std::size_t>(key)]; }
    const V& operator[](E key) const { return values[static_cast<std::size_t>(key)]; }

    friend bool operator==(const EnumMap&, const EnumMap&) = default;
};

/// Small bitset over a closed enumeration.
template <class E>
class EnumSet {
public:
    constexpr EnumSet() = default;
    constexpr EnumSet(std::initializer_list<E> items) {
        for (E e : items) insert(e);
    }

    constexpr void insert(E e) { bits_ |= bit(e); }
    constexpr void erase(E e) { bits_ &= ~bit(e); }
    constexpr bool contains(E e) const { return (bits_ & bit(e)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits_)); }

    friend constexpr bool operator==(EnumSet, EnumSet) = default;

private:
    static constexpr std::uint32_t bit(E e) { return std::uint32_t{1} << static_cast<unsigned>(e); }
    std::uint32_t bits_ = 0;
};

/// Quality-of-service class implied by an application class.
constexpr QosClass qos_of(AppClass app) {
    switch (app) {
        case AppClass::VideoOnDemand:
        case AppClass::LiveVideo:
            return QosClass::Streaming;
        case AppClass::BulkSync:
        case AppClass::P2P:
            return QosClass::Bulk;
        default:
            return QosClass::Interactive;
    }
}

constexpr bool is_video(AppClass app) {
    return app == AppClass::VideoOnDemand || app == AppClass::LiveVideo;
}

/// Half-open time-of-day window [start_s, end_s). `end_s < start_s` wraps midnight.
struct DayWindow {
    double start_s = 0.0;
    double end_s = 0.0;

    /// Whether a time-of-day (seconds, already reduced mod 86400) is inside.
    bool contains(double tod) const {
        if (start_s < end_s) return tod >= start_s && tod < end_s;
        return tod >= start_s || tod < end_s;
    }
    double length() const { return start_s < end_s ? end_s - start_s : kSecondsPerDay - start_s + end_s; }

    friend bool operator==(const DayWindow&, const DayWindow&) = default;
};

/// Reduce an absolute time to seconds-of-day in [0, 86400).
double time_of_day(double t);

}  // namespace staggercast
