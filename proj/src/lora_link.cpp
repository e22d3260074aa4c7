#include "microfarm/lora_link.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "microfarm/error.hpp"

namespace microfarm::lora {

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::config, std::string("bad value for '") + key + "'");
    }
}

}  // namespace

void RadioConfig::validate() const {
    if (spreading_factor < 6 || spreading_factor > 12)
        throw Error(ErrorKind::config, "spreading_factor must be in 6..12");
    if (!(bandwidth_hz > 0.0)) throw Error(ErrorKind::config, "bandwidth_hz must be > 0");
    if (coding_rate_denominator < 5 || coding_rate_denominator > 8)
        throw Error(ErrorKind::config, "coding_rate_denominator must be in 5..8");
    if (preamble_symbols < 0) throw Error(ErrorKind::config, "preamble_symbols must be >= 0");
    if (low_data_rate_optimize && spreading_factor <= 2)
        throw Error(ErrorKind::config, "low_data_rate_optimize needs spreading_factor > 2");
}

RadioConfig radio_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::config, "radio config must be an object");
    RadioConfig c;
    c.spreading_factor = get_or(j, "spreading_factor", c.spreading_factor);
    c.bandwidth_hz = get_or(j, "bandwidth_hz", c.bandwidth_hz);
    c.coding_rate_denominator = get_or(j, "coding_rate_denominator", c.coding_rate_denominator);
    c.frequency_hz = get_or(j, "frequency_hz", c.frequency_hz);
    c.preamble_symbols = get_or(j, "preamble_symbols", c.preamble_symbols);
    c.explicit_header = get_or(j, "explicit_header", c.explicit_header);
    c.crc_enabled = get_or(j, "crc_enabled", c.crc_enabled);
    c.low_data_rate_optimize = get_or(j, "low_data_rate_optimize", c.low_data_rate_optimize);
    c.validate();
    return c;
}

nlohmann::json to_json(const RadioConfig& c) {
    return {{"spreading_factor", c.spreading_factor},
            {"bandwidth_hz", c.bandwidth_hz},
            {"coding_rate_denominator", c.coding_rate_denominator},
            {"frequency_hz", c.frequency_hz},
            {"preamble_symbols", c.preamble_symbols},
            {"explicit_header", c.explicit_header},
            {"crc_enabled", c.crc_enabled},
            {"low_data_rate_optimize", c.low_data_rate_optimize}};
}

double symbol_time_ms(const RadioConfig& c) {
    return std::ldexp(1.0, c.spreading_factor) / c.bandwidth_hz * 1000.0;
}

int payload_symbol_count(const RadioConfig& c, std::size_t payload_len) {
    const int pl = static_cast<int>(payload_len);
    const int crc = c.crc_enabled ? 1 : 0;
    const int ih = c.explicit_header ? 0 : 1;
    const int de = c.low_data_rate_optimize ? 1 : 0;
    const int num = 8 * pl - 4 * c.spreading_factor + 28 + 16 * crc - 20 * ih;
    const int den = 4 * (c.spreading_factor - 2 * de);
    // integer ceil for num > 0; non-positive numerators contribute nothing
    const int blocks = num > 0 ? (num + den - 1) / den : 0;
    return 8 + std::max(blocks * c.coding_rate_denominator, 0);
}

double time_on_air_ms(const RadioConfig& c, std::size_t payload_len) {
    c.validate();
    if (payload_len > max_payload_len)
        throw Error(ErrorKind::config, "payload length exceeds 255 bytes");
    const double ts = symbol_time_ms(c);
    const double preamble = (c.preamble_symbols + 4.25) * ts;
    return preamble + payload_symbol_count(c, payload_len) * ts;
}

void LinkProfile::validate() const {
    if (!(rssi_stddev_db >= 0.0)) throw Error(ErrorKind::config, "rssi_stddev_db must be >= 0");
    if (!(snr_stddev_db >= 0.0)) throw Error(ErrorKind::config, "snr_stddev_db must be >= 0");
}

LinkProfile link_profile_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::config, "link profile must be an object");
    LinkProfile p;
    p.mean_rssi_dbm = get_or(j, "mean_rssi_dbm", p.mean_rssi_dbm);
    p.rssi_stddev_db = get_or(j, "rssi_stddev_db", p.rssi_stddev_db);
    p.mean_snr_db = get_or(j, "mean_snr_db", p.mean_snr_db);
    p.snr_stddev_db = get_or(j, "snr_stddev_db", p.snr_stddev_db);
    p.validate();
    return p;
}

nlohmann::json to_json(const LinkProfile& p) {
    return {{"mean_rssi_dbm", p.mean_rssi_dbm},
            {"rssi_stddev_db", p.rssi_stddev_db},
            {"mean_snr_db", p.mean_snr_db},
            {"snr_stddev_db", p.snr_stddev_db}};
}

LinkSample sample_link(const LinkProfile& p, Rng& rng) {
    // always consume the same number of draws so schedules stay aligned
    double rssi = normal(rng, p.mean_rssi_dbm, p.rssi_stddev_db);
    double snr = normal(rng, p.mean_snr_db, p.snr_stddev_db);
    return {rssi, snr};
}

}  // namespace microfarm::lora
