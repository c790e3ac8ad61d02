#include <gtest/gtest.h>

#include "heatsupply/mbus.hpp"
#include "test_support.hpp"

namespace heatsupply::mbus {
namespace {

using testing::temp;

// Independent oracle: plain loop sum, truncated to a byte.
std::uint8_t byte_sum(const Bytes& bytes) {
    unsigned total = 0;
    for (const auto b : bytes) total += b;
    return static_cast<std::uint8_t>(total % 256);
}

TEST(Checksum, Examples) {
    EXPECT_EQ(checksum(Bytes{}), 0x00);
    EXPECT_EQ(checksum(Bytes{0x53, 0x01, 0x51}), 0xA5);
    EXPECT_EQ(byte_sum({0x53, 0x01, 0x51}), 0xA5);
    EXPECT_EQ(checksum(Bytes{0xFF, 0x01}), 0x00);
}

TEST(Checksum, MatchesOracleAndIsLinear) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        Bytes a(rng() % 300), b(rng() % 300);
        for (auto& x : a) x = static_cast<std::uint8_t>(rng());
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        Bytes ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        EXPECT_EQ(checksum(a), byte_sum(a));
        EXPECT_EQ(checksum(ab), static_cast<std::uint8_t>((checksum(a) + checksum(b)) % 256));
    }
}

TEST(BuildLongFrame, ShortRequest) {
    EXPECT_EQ(build_long_frame({0x53, 0x01, 0x51, {}}), (Bytes{0x68, 0x03, 0x03, 0x68, 0x53, 0x01, 0x51, 0xA5, 0x16}));
}

TEST(BuildLongFrame, OneDataByte) {
    const auto out = build_long_frame({0x08, 0x05, 0x72, {0x01}});
    EXPECT_EQ(out, (Bytes{0x68, 0x04, 0x04, 0x68, 0x08, 0x05, 0x72, 0x01, 0x80, 0x16}));
}

TEST(BuildLongFrame, RejectsOversizedPayload) {
    EXPECT_THROW(build_long_frame({0, 0, 0, Bytes(253)}), std::length_error);
    EXPECT_EQ(build_long_frame({0, 0, 0, Bytes(252)})[1], 0xFF);
}

TEST(ParseLongFrame, ShortRequest) {
    const auto f = parse_long_frame(Bytes{0x68, 0x03, 0x03, 0x68, 0x53, 0x01, 0x51, 0xA5, 0x16});
    ASSERT_TRUE(f.ok());
    EXPECT_EQ(*f, (Frame{0x53, 0x01, 0x51, {}}));
}

TEST(ParseLongFrame, ErrorKindsAndOffsets) {
    using enum FrameErrorKind;
    const Bytes good{0x68, 0x03, 0x03, 0x68, 0x53, 0x01, 0x51, 0xA5, 0x16};
    auto with = [&](std::size_t pos, std::uint8_t v) {
        Bytes b = good;
        b[pos] = v;
        return parse_long_frame(b).error();
    };
    EXPECT_EQ(with(4, 0x54), (FrameError{BadChecksum, 7}));
    EXPECT_EQ(with(0, 0x10), (FrameError{BadStart, 0}));
    EXPECT_EQ(with(3, 0x10), (FrameError{BadStart, 3}));
    EXPECT_EQ(with(2, 0x04), (FrameError{LengthMismatch, 2}));
    EXPECT_EQ(with(8, 0x17), (FrameError{BadStop, 8}));
    EXPECT_EQ(parse_long_frame(Bytes{0x68, 0x03, 0x03, 0x68, 0x53, 0x01}).error().kind, Truncated);
    EXPECT_EQ(parse_long_frame(Bytes{}).error().kind, Truncated);
    EXPECT_EQ(parse_long_frame(Bytes{0x68, 0x03}).error().kind, Truncated);

    Bytes longer = good;
    longer.push_back(0x00);
    EXPECT_EQ(parse_long_frame(longer).error().kind, LengthMismatch);
    EXPECT_EQ(parse_long_frame(Bytes{0x68, 0x02, 0x02, 0x68, 0x53, 0x01, 0x54, 0x16}).error().kind, LengthMismatch);
}

TEST(LongFrameProperties, RoundTripIncludingExtremes) {
    std::mt19937_64 rng(5);
    std::vector<Frame> frames{{1, 2, 3, {}}, {0xFF, 0xFF, 0xFF, Bytes(kMaxUserData, 0xFF)}};
    for (int i = 0; i < 2000; ++i) frames.push_back(testing::random_mbus_frame(rng));
    for (const auto& f : frames) {
        const auto bytes = build_long_frame(f);
        ASSERT_EQ(bytes.size(), f.user_data.size() + 9);
        const auto back = parse_long_frame(bytes);
        ASSERT_TRUE(back.ok());
        EXPECT_EQ(*back, f);
    }
}

// Exhaustive over positions and substitute values for small frames.
TEST(LongFrameProperties, EverySingleByteSubstitutionIsRejected) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        const auto bytes = build_long_frame(testing::random_mbus_frame(rng, 6));
        for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
            for (int v = 0; v < 256; ++v) {
                if (v == bytes[pos]) continue;
                Bytes corrupt = bytes;
                corrupt[pos] = static_cast<std::uint8_t>(v);
                ASSERT_FALSE(parse_long_frame(corrupt).ok()) << "pos " << pos << " value " << v;
            }
        }
    }
}

TEST(MeterPayload, Examples) {
    EXPECT_EQ(encode_meter_payload({0, temp(0), temp(0)}), Bytes(8, 0x00));
    EXPECT_EQ(encode_meter_payload({1, temp(205), temp(-10)}), (Bytes{0x01, 0x00, 0x00, 0x00, 0xCD, 0x00, 0xF6, 0xFF}));

    const auto zero = decode_meter_payload(Bytes(8, 0x00));
    ASSERT_TRUE(zero.ok());
    EXPECT_EQ(*zero, (MeterReading{0, temp(0), temp(0)}));
}

TEST(MeterPayload, Errors) {
    EXPECT_EQ(decode_meter_payload(Bytes(7, 0x00)).error(), PayloadError::WrongLength);
    EXPECT_EQ(decode_meter_payload(Bytes(9, 0x00)).error(), PayloadError::WrongLength);
    // 200.0 C = 2000 tenths = 0x07D0
    EXPECT_EQ(decode_meter_payload(Bytes{0, 0, 0, 0, 0xD0, 0x07, 0, 0}).error(), PayloadError::OutOfRange);
    EXPECT_EQ(decode_meter_payload(Bytes{0, 0, 0, 0, 0, 0, 0xD0, 0x07}).error(), PayloadError::OutOfRange);
}

TEST(MeterPayload, RoundTrip) {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> t(Temperature::kMinTenths, Temperature::kMaxTenths);
    for (int i = 0; i < 2000; ++i) {
        const MeterReading r{static_cast<std::uint32_t>(rng()), temp(t(rng)), temp(t(rng))};
        const auto back = decode_meter_payload(encode_meter_payload(r));
        ASSERT_TRUE(back.ok());
        EXPECT_EQ(*back, r);
    }
}

TEST(Hex, ParsesSeparatorsAndRejectsOddInput) {
    EXPECT_EQ(from_hex("68 03:03-68"), (Bytes{0x68, 0x03, 0x03, 0x68}));
    EXPECT_EQ(from_hex("a5E5"), (Bytes{0xA5, 0xE5}));
    EXPECT_FALSE(from_hex("6 8"));
    EXPECT_FALSE(from_hex("zz"));
    EXPECT_EQ(to_hex(Bytes{0x00, 0xAB}), "00 AB");
}

TEST(Inspect, DescribesFramesAckAndErrors) {
    const auto ok = inspect(build_long_frame({0x08, 0x01, kCiMeterReading, encode_meter_payload({42, temp(205), temp(-10)})}));
    EXPECT_NE(ok.find("CI = 72"), std::string::npos);
    EXPECT_NE(ok.find("energy=42 Wh flow=20.5 C return=-1.0 C"), std::string::npos);
    EXPECT_NE(inspect(Bytes{kAck}).find("ACK"), std::string::npos);
    EXPECT_NE(inspect(Bytes{0x68, 0x03}).find("Truncated"), std::string::npos);
}

}  // namespace
}  // namespace heatsupply::mbus
