#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatsupply/result.hpp"
#include "heatsupply/telemetry.hpp"

namespace heatsupply::mbus {

inline constexpr std::uint8_t kLongFrameStart = 0x68;
inline constexpr std::uint8_t kStop = 0x16;
inline constexpr std::uint8_t kAck = 0xE5;
inline constexpr std::size_t kMaxUserData = 252;

inline constexpr std::uint8_t kCtrlReqUd2 = 0x5B;
inline constexpr std::uint8_t kCtrlRspUd = 0x08;
inline constexpr std::uint8_t kCiRequest = 0x51;
inline constexpr std::uint8_t kCiMeterReading = 0x72;

using Bytes = std::vector<std::uint8_t>;

struct Frame {
    std::uint8_t c_field = 0;
    std::uint8_t a_field = 0;
    std::uint8_t ci_field = 0;
    Bytes user_data;  // at most kMaxUserData bytes

    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class FrameErrorKind { BadStart, LengthMismatch, BadChecksum, BadStop, Truncated };

struct FrameError {
    FrameErrorKind kind;
    std::size_t offset;  // byte position where the problem was detected

    friend bool operator==(const FrameError&, const FrameError&) = default;
};

std::string_view to_string(FrameErrorKind kind) noexcept;

/// Arithmetic sum of all bytes modulo 256.
std::uint8_t checksum(std::span<const std::uint8_t> bytes) noexcept;

/// Emits 68 L L 68 C A CI data... CS 16 with L = 3 + len(data).
/// Throws std::length_error when user_data exceeds kMaxUserData.
Bytes build_long_frame(const Frame& frame);

Result<Frame, FrameError> parse_long_frame(std::span<const std::uint8_t> bytes);

struct MeterReading {
    std::uint32_t energy_wh = 0;
    Temperature flow_temp;
    Temperature return_temp;

    friend bool operator==(const MeterReading&, const MeterReading&) = default;
};

inline constexpr std::size_t kMeterPayloadSize = 8;

enum class PayloadError { WrongLength, OutOfRange };

/// Little-endian: energy u32, flow tenths i16, return tenths i16.
Bytes encode_meter_payload(const MeterReading& reading);
Result<MeterReading, PayloadError> decode_meter_payload(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Accepts hex pairs optionally separated by whitespace, ':' or '-'.
std::optional<Bytes> from_hex(std::string_view text);

/// Multi-line human readable dump of a byte sequence parsed as a long frame.
std::string inspect(std::span<const std::uint8_t> bytes);

}  // namespace heatsupply::mbus
