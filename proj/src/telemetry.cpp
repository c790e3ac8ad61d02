#include "heatsupply/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

namespace heatsupply {

namespace {

bool is_id_char(char c) noexcept {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
}

bool all_digits(std::string_view s) noexcept {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename UInt>
Result<UInt, DecodeErrorKind> parse_unsigned(std::string_view s) {
    if (!all_digits(s)) return DecodeErrorKind::MalformedSyntax;
    UInt value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc::result_out_of_range) return DecodeErrorKind::OutOfRange;
    if (ec != std::errc{} || ptr != s.data() + s.size()) return DecodeErrorKind::MalformedSyntax;
    return value;
}

}  // namespace

bool StationId::is_valid(std::string_view text) noexcept {
    return !text.empty() && text.size() <= kMaxLength && std::all_of(text.begin(), text.end(), is_id_char);
}

std::optional<StationId> StationId::parse(std::string_view text) {
    if (!is_valid(text)) return std::nullopt;
    return StationId(std::string(text));
}

Temperature Temperature::clamped(double celsius) noexcept {
    if (std::isnan(celsius)) return Temperature(0);
    const double tenths = std::clamp(std::round(celsius * 10.0), double(kMinTenths), double(kMaxTenths));
    return Temperature(static_cast<int>(tenths));
}

Result<Temperature, DecodeErrorKind> Temperature::parse(std::string_view text) {
    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.remove_prefix(1);
    }
    const auto dot = text.find('.');
    if (dot == std::string_view::npos) return DecodeErrorKind::MalformedSyntax;
    const auto whole = text.substr(0, dot);
    const auto frac = text.substr(dot + 1);
    if (!all_digits(whole) || frac.size() != 1 || !all_digits(frac)) return DecodeErrorKind::MalformedSyntax;
    // Anything past four integer digits is out of range anyway.
    if (whole.size() > 4) return DecodeErrorKind::OutOfRange;
    int magnitude = 0;
    std::from_chars(whole.data(), whole.data() + whole.size(), magnitude);
    magnitude = magnitude * 10 + (frac[0] - '0');
    const auto t = from_tenths(negative ? -magnitude : magnitude);
    if (!t) return DecodeErrorKind::OutOfRange;
    return *t;
}

std::string Temperature::to_string() const {
    const int magnitude = tenths_ < 0 ? -tenths_ : tenths_;
    std::string out = tenths_ < 0 ? "-" : "";
    out += std::to_string(magnitude / 10);
    out += '.';
    out += static_cast<char>('0' + magnitude % 10);
    return out;
}

std::string_view to_string(OperatingMode mode) noexcept {
    switch (mode) {
        case OperatingMode::Auto: return "AUTO";
        case OperatingMode::Manual: return "MANUAL";
        case OperatingMode::Off: return "OFF";
    }
    return "AUTO";
}

std::optional<OperatingMode> parse_mode(std::string_view token) noexcept {
    if (token == "AUTO") return OperatingMode::Auto;
    if (token == "MANUAL") return OperatingMode::Manual;
    if (token == "OFF") return OperatingMode::Off;
    return std::nullopt;
}

std::string_view field_name(FrameField field) noexcept {
    switch (field) {
        case FrameField::Frame: return "frame";
        case FrameField::Station: return "station";
        case FrameField::Seq: return "seq";
        case FrameField::Timestamp: return "timestamp";
        case FrameField::Temps: return "temps";
        case FrameField::Pumps: return "pumps";
        case FrameField::Mode: return "mode";
    }
    return "frame";
}

std::string describe(const DecodeError& err) {
    std::string out = err.kind == DecodeErrorKind::MalformedSyntax ? "malformed " : "out of range ";
    out += field_name(err.field);
    if (err.element >= 0) out += "[" + std::to_string(err.element) + "]";
    return out;
}

std::string encode_frame(const TelemetryFrame& frame) {
    std::string out;
    out.reserve(96);
    out += frame.station.str();
    out += ';';
    out += std::to_string(frame.seq);
    out += ';';
    out += std::to_string(frame.timestamp);
    out += ';';
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (i) out += ',';
        out += frame.temps[i].to_string();
    }
    out += ';';
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (i) out += ',';
        out += frame.pumps[i] == PumpState::On ? '1' : '0';
    }
    out += ';';
    out += to_string(frame.mode);
    return out;
}

Result<TelemetryFrame, DecodeError> decode_frame(std::string_view text) {
    using enum DecodeErrorKind;
    const auto sections = split(text, ';');
    if (sections.size() != 6) return DecodeError{MalformedSyntax, FrameField::Frame};

    auto station = StationId::parse(sections[0]);
    if (!station) return DecodeError{OutOfRange, FrameField::Station};

    const auto seq = parse_unsigned<std::uint32_t>(sections[1]);
    if (!seq) return DecodeError{seq.error(), FrameField::Seq};
    const auto ts = parse_unsigned<std::uint64_t>(sections[2]);
    if (!ts) return DecodeError{ts.error(), FrameField::Timestamp};

    TelemetryFrame frame{std::move(*station), *seq, *ts};

    const auto temps = split(sections[3], ',');
    if (temps.size() != kChannels) return DecodeError{MalformedSyntax, FrameField::Temps};
    for (std::size_t i = 0; i < kChannels; ++i) {
        const auto t = Temperature::parse(temps[i]);
        if (!t) return DecodeError{t.error(), FrameField::Temps, static_cast<int>(i)};
        frame.temps[i] = *t;
    }

    const auto pumps = split(sections[4], ',');
    if (pumps.size() != kChannels) return DecodeError{MalformedSyntax, FrameField::Pumps};
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (pumps[i] == "0") {
            frame.pumps[i] = PumpState::Off;
        } else if (pumps[i] == "1") {
            frame.pumps[i] = PumpState::On;
        } else {
            return DecodeError{MalformedSyntax, FrameField::Pumps, static_cast<int>(i)};
        }
    }

    const auto mode = parse_mode(sections[5]);
    if (!mode) return DecodeError{OutOfRange, FrameField::Mode};
    frame.mode = *mode;
    return frame;
}

}  // namespace heatsupply
