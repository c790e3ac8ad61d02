#include "heatsupply/mbus.hpp"

#include <cctype>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace heatsupply::mbus {

namespace {

constexpr std::size_t kHeaderSize = 4;   // 68 L L 68
constexpr std::size_t kTrailerSize = 2;  // CS 16
constexpr std::size_t kFixedFields = 3;  // C A CI

void put_le16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

std::string_view to_string(FrameErrorKind kind) noexcept {
    switch (kind) {
        case FrameErrorKind::BadStart: return "BadStart";
        case FrameErrorKind::LengthMismatch: return "LengthMismatch";
        case FrameErrorKind::BadChecksum: return "BadChecksum";
        case FrameErrorKind::BadStop: return "BadStop";
        case FrameErrorKind::Truncated: return "Truncated";
    }
    return "Unknown";
}

std::uint8_t checksum(std::span<const std::uint8_t> bytes) noexcept {
    return static_cast<std::uint8_t>(std::accumulate(bytes.begin(), bytes.end(), 0u));
}

Bytes build_long_frame(const Frame& frame) {
    if (frame.user_data.size() > kMaxUserData) throw std::length_error("mbus user data exceeds 252 bytes");
    const auto len = static_cast<std::uint8_t>(kFixedFields + frame.user_data.size());

    Bytes out;
    out.reserve(kHeaderSize + len + kTrailerSize);
    out.insert(out.end(), {kLongFrameStart, len, len, kLongFrameStart});
    out.insert(out.end(), {frame.c_field, frame.a_field, frame.ci_field});
    out.insert(out.end(), frame.user_data.begin(), frame.user_data.end());
    out.push_back(checksum(std::span(out).subspan(kHeaderSize)));
    out.push_back(kStop);
    return out;
}

Result<Frame, FrameError> parse_long_frame(std::span<const std::uint8_t> bytes) {
    using enum FrameErrorKind;
    if (bytes.empty()) return FrameError{Truncated, 0};
    if (bytes[0] != kLongFrameStart) return FrameError{BadStart, 0};
    if (bytes.size() < kHeaderSize) return FrameError{Truncated, bytes.size()};
    if (bytes[3] != kLongFrameStart) return FrameError{BadStart, 3};
    if (bytes[1] != bytes[2]) return FrameError{LengthMismatch, 2};

    const std::size_t len = bytes[1];
    if (len < kFixedFields) return FrameError{LengthMismatch, 1};
    const std::size_t total = kHeaderSize + len + kTrailerSize;
    if (bytes.size() < total) return FrameError{Truncated, bytes.size()};
    if (bytes.size() > total) return FrameError{LengthMismatch, total};

    const auto body = bytes.subspan(kHeaderSize, len);
    const std::size_t cs_pos = kHeaderSize + len;
    if (checksum(body) != bytes[cs_pos]) return FrameError{BadChecksum, cs_pos};
    if (bytes[cs_pos + 1] != kStop) return FrameError{BadStop, cs_pos + 1};

    return Frame{body[0], body[1], body[2], Bytes(body.begin() + kFixedFields, body.end())};
}

Bytes encode_meter_payload(const MeterReading& reading) {
    Bytes out;
    out.reserve(kMeterPayloadSize);
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(reading.energy_wh >> shift));
    put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(reading.flow_temp.tenths())));
    put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(reading.return_temp.tenths())));
    return out;
}

Result<MeterReading, PayloadError> decode_meter_payload(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kMeterPayloadSize) return PayloadError::WrongLength;
    const auto le16 = [&](std::size_t at) {
        return static_cast<std::int16_t>(bytes[at] | (bytes[at + 1] << 8));
    };
    std::uint32_t energy = 0;
    for (int i = 3; i >= 0; --i) energy = (energy << 8) | bytes[static_cast<std::size_t>(i)];
    const auto flow = Temperature::from_tenths(le16(4));
    const auto ret = Temperature::from_tenths(le16(6));
    if (!flow || !ret) return PayloadError::OutOfRange;
    return MeterReading{energy, *flow, *ret};
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789ABCDEF";
    std::string out;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) out += ' ';
        out += kDigits[bytes[i] >> 4];
        out += kDigits[bytes[i] & 0x0F];
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view text) {
    Bytes out;
    int pending = -1;
    for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '-') {
            if (pending >= 0) return std::nullopt;
            continue;
        }
        int nibble;
        if (c >= '0' && c <= '9') nibble = c - '0';
        else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') nibble = c - 'A' + 10;
        else return std::nullopt;
        if (pending < 0) {
            pending = nibble;
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | nibble));
            pending = -1;
        }
    }
    if (pending >= 0) return std::nullopt;
    return out;
}

std::string inspect(std::span<const std::uint8_t> bytes) {
    std::ostringstream os;
    os << "bytes (" << bytes.size() << "): " << to_hex(bytes) << '\n';
    if (bytes.size() == 1 && bytes[0] == kAck) {
        os << "single-byte ACK (E5)\n";
        return os.str();
    }
    const auto parsed = parse_long_frame(bytes);
    if (!parsed) {
        os << "error: " << to_string(parsed.error().kind) << " at offset " << parsed.error().offset << '\n';
        return os.str();
    }
    const auto& f = *parsed;
    const auto hex1 = [](std::uint8_t b) { return to_hex(std::span(&b, 1)); };
    os << "long frame  L=" << (kFixedFields + f.user_data.size()) << '\n'
       << "  C  = " << hex1(f.c_field) << '\n'
       << "  A  = " << hex1(f.a_field) << '\n'
       << "  CI = " << hex1(f.ci_field) << '\n'
       << "  data (" << f.user_data.size() << "): " << to_hex(f.user_data) << '\n';
    if (f.ci_field == kCiMeterReading) {
        if (const auto r = decode_meter_payload(f.user_data)) {
            os << "  meter: energy=" << r->energy_wh << " Wh flow=" << r->flow_temp.to_string()
               << " C return=" << r->return_temp.to_string() << " C\n";
        } else {
            os << "  meter payload invalid\n";
        }
    }
    return os.str();
}

}  // namespace heatsupply::mbus
