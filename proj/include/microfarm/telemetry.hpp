#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace microfarm::telemetry {

constexpr std::uint8_t frame_version = 0x01;
constexpr std::size_t frame_size = 17;

using Frame = std::array<std::uint8_t, frame_size>;

struct SensorReading {
    std::uint16_t device_id = 0;
    std::uint16_t seq = 0;
    std::uint16_t nitrogen_ppm = 0;
    std::uint16_t phosphorus_ppm = 0;
    std::uint16_t potassium_ppm = 0;
    std::int16_t temperature_centi_c = 0;
    std::uint16_t ph_centi = 0;
    // Assigned by the edge on ingest, never carried on the wire.
    std::int64_t timestamp_ms = 0;

    void validate() const;

    bool same_payload(const SensorReading& o) const {
        return device_id == o.device_id && seq == o.seq && nitrogen_ppm == o.nitrogen_ppm &&
               phosphorus_ppm == o.phosphorus_ppm && potassium_ppm == o.potassium_ppm &&
               temperature_centi_c == o.temperature_centi_c && ph_centi == o.ph_centi;
    }
};

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

Frame encode_reading(const SensorReading& reading);

// Throws Error with kind framing, integrity, version or validation.
SensorReading decode_reading(std::span<const std::uint8_t> bytes);

}  // namespace microfarm::telemetry
