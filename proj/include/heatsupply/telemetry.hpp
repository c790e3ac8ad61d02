#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "heatsupply/result.hpp"

namespace heatsupply {

inline constexpr std::size_t kChannels = 8;

enum class DecodeErrorKind { MalformedSyntax, OutOfRange };

/// Station identity token: 1-32 chars of [A-Za-z0-9_-], case-sensitive.
class StationId {
public:
    static constexpr std::size_t kMaxLength = 32;

    static std::optional<StationId> parse(std::string_view text);
    static bool is_valid(std::string_view text) noexcept;

    const std::string& str() const noexcept { return value_; }

    friend auto operator<=>(const StationId&, const StationId&) = default;
    friend bool operator==(const StationId&, const StationId&) = default;

private:
    explicit StationId(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

/// Temperature in tenths of a degree Celsius, bounded to [-50.0, 150.0].
class Temperature {
public:
    static constexpr int kMinTenths = -500;
    static constexpr int kMaxTenths = 1500;

    constexpr Temperature() = default;

    static constexpr std::optional<Temperature> from_tenths(int tenths) noexcept {
        if (tenths < kMinTenths || tenths > kMaxTenths) return std::nullopt;
        return Temperature(tenths);
    }
    // Rounds to the nearest tenth and clamps into range.
    static Temperature clamped(double celsius) noexcept;

    /// Parses `-?D+.D` (exactly one fractional digit).
    static Result<Temperature, DecodeErrorKind> parse(std::string_view text);

    constexpr int tenths() const noexcept { return tenths_; }
    constexpr double celsius() const noexcept { return tenths_ / 10.0; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Temperature, Temperature) = default;

private:
    constexpr explicit Temperature(int tenths) : tenths_(tenths) {}
    int tenths_ = 0;
};

enum class PumpState : std::uint8_t { Off = 0, On = 1 };

enum class OperatingMode : std::uint8_t { Auto, Manual, Off };

std::string_view to_string(OperatingMode mode) noexcept;
std::optional<OperatingMode> parse_mode(std::string_view token) noexcept;

struct TelemetryFrame {
    StationId station;
    std::uint32_t seq = 0;
    std::uint64_t timestamp = 0;
    std::array<Temperature, kChannels> temps{};
    std::array<PumpState, kChannels> pumps{};
    OperatingMode mode = OperatingMode::Auto;

    friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

/// Sections of the wire grammar, in order. `Frame` stands for the whole
/// string (wrong section count, stray characters).
enum class FrameField { Frame = -1, Station = 0, Seq, Timestamp, Temps, Pumps, Mode };

std::string_view field_name(FrameField field) noexcept;

struct DecodeError {
    DecodeErrorKind kind;
    FrameField field;
    int element = -1;  // list position inside temps/pumps, -1 if n/a

    friend bool operator==(const DecodeError&, const DecodeError&) = default;
};

std::string describe(const DecodeError& err);

std::string encode_frame(const TelemetryFrame& frame);
Result<TelemetryFrame, DecodeError> decode_frame(std::string_view text);

}  // namespace heatsupply
