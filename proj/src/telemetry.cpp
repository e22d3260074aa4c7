#include "microfarm/telemetry.hpp"

#include <string>

#include "microfarm/error.hpp"

namespace microfarm::telemetry {

namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
    std::array<std::uint16_t, 256> table{};
    for (unsigned i = 0; i < 256; ++i) {
        std::uint16_t c = static_cast<std::uint16_t>(i << 8);
        for (int b = 0; b < 8; ++b)
            c = (c & 0x8000) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021)
                             : static_cast<std::uint16_t>(c << 1);
        table[i] = c;
    }
    return table;
}

constexpr auto crc_table = make_crc_table();

void put16(Frame& f, std::size_t at, std::uint16_t v) {
    f[at] = static_cast<std::uint8_t>(v >> 8);
    f[at + 1] = static_cast<std::uint8_t>(v & 0xFF);
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data)
        crc = static_cast<std::uint16_t>((crc << 8) ^ crc_table[((crc >> 8) ^ byte) & 0xFF]);
    return crc;
}

void SensorReading::validate() const {
    if (ph_centi > 1400)
        throw Error(ErrorKind::validation, "ph out of range [0, 1400] centi-pH: " + std::to_string(ph_centi));
    if (temperature_centi_c < -4000 || temperature_centi_c > 8500)
        throw Error(ErrorKind::validation,
                    "temperature out of range [-4000, 8500] centi-C: " + std::to_string(temperature_centi_c));
}

Frame encode_reading(const SensorReading& r) {
    r.validate();
    Frame f{};
    f[0] = frame_version;
    put16(f, 1, r.device_id);
    put16(f, 3, r.seq);
    put16(f, 5, r.nitrogen_ppm);
    put16(f, 7, r.phosphorus_ppm);
    put16(f, 9, r.potassium_ppm);
    put16(f, 11, static_cast<std::uint16_t>(r.temperature_centi_c));
    put16(f, 13, r.ph_centi);
    put16(f, 15, crc16_ccitt_false(std::span<const std::uint8_t>(f.data(), 15)));
    return f;
}

SensorReading decode_reading(std::span<const std::uint8_t> b) {
    if (b.size() != frame_size)
        throw Error(ErrorKind::framing, "frame length " + std::to_string(b.size()) + " != 17");
    // integrity before version: a corrupted version byte is a transmission error
    if (crc16_ccitt_false(b.first(15)) != get16(b, 15))
        throw Error(ErrorKind::integrity, "crc mismatch");
    if (b[0] != frame_version)
        throw Error(ErrorKind::version, "unsupported frame version " + std::to_string(b[0]));
    SensorReading r;
    r.device_id = get16(b, 1);
    r.seq = get16(b, 3);
    r.nitrogen_ppm = get16(b, 5);
    r.phosphorus_ppm = get16(b, 7);
    r.potassium_ppm = get16(b, 9);
    r.temperature_centi_c = static_cast<std::int16_t>(get16(b, 11));
    r.ph_centi = get16(b, 13);
    r.validate();
    return r;
}

}  // namespace microfarm::telemetry
