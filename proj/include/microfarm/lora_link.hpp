#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "microfarm/random.hpp"

namespace microfarm::lora {

struct RadioConfig {
    int spreading_factor = 7;
    double bandwidth_hz = 125000.0;
    int coding_rate_denominator = 5;
    double frequency_hz = 870e6;
    int preamble_symbols = 8;
    bool explicit_header = true;
    bool crc_enabled = true;
    bool low_data_rate_optimize = false;

    void validate() const;
};

RadioConfig radio_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RadioConfig& config);

constexpr std::size_t max_payload_len = 255;

double symbol_time_ms(const RadioConfig& config);
int payload_symbol_count(const RadioConfig& config, std::size_t payload_len);
double time_on_air_ms(const RadioConfig& config, std::size_t payload_len);

struct LinkProfile {
    double mean_rssi_dbm = 0.0;
    double rssi_stddev_db = 0.0;
    double mean_snr_db = 0.0;
    double snr_stddev_db = 0.0;

    void validate() const;
};

LinkProfile link_profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LinkProfile& profile);

struct LinkSample {
    double rssi_dbm;
    double snr_db;
};

LinkSample sample_link(const LinkProfile& profile, Rng& rng);

struct LoRaFrame {
    std::uint16_t sender_id = 0;
    std::uint32_t seq = 0;
    std::vector<std::uint8_t> payload;
    double start_ms = 0.0;
    double airtime_ms = 0.0;
    double rssi_dbm = 0.0;
    double snr_db = 0.0;

    double end_ms() const { return start_ms + airtime_ms; }
};

}  // namespace microfarm::lora
