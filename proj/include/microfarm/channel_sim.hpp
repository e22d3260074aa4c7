#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "microfarm/lora_link.hpp"
#include "microfarm/random.hpp"

namespace microfarm::channel {

// Produces the payload for packet `seq` of a device. Must return exactly
// payload_len bytes.
using PayloadSource = std::function<std::vector<std::uint8_t>(std::uint32_t seq)>;

struct DeviceConfig {
    std::uint16_t device_id = 0;
    std::size_t payload_len = 3;
    std::uint32_t packet_count = 100;
    double send_interval_ms = 5000.0;
    double start_offset_ms = 0.0;
    // When > 0 the start offset gets an extra uniform draw in [0, window).
    double start_offset_window_ms = 0.0;
    // Per-packet scheduling jitter, uniform in [0, jitter_ms).
    double jitter_ms = 0.0;
    bool cad_enabled = false;
    lora::LinkProfile link;
    PayloadSource payload_for;  // zero-filled payloads when empty
};

struct ScenarioConfig {
    std::string name;
    lora::RadioConfig radio;
    std::vector<DeviceConfig> devices;
    double capture_threshold_db = 6.0;
    double cad_max_backoff_ms = 2000.0;
    double cad_recheck_ms = 100.0;
    std::uint64_t seed = 1;

    void validate() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);

enum class EventKind { sent, received, collided, backoff };

const char* event_kind_name(EventKind kind);

struct Event {
    double t_ms;
    std::uint16_t device_id;
    EventKind kind;
    std::uint32_t seq;
};

struct DeviceStats {
    std::uint16_t device_id = 0;
    std::size_t payload_len = 0;
    bool cad_enabled = false;
    std::uint32_t sent = 0;
    std::uint32_t received = 0;
    std::optional<double> mean_rssi_dbm;
    std::optional<double> mean_snr_db;

    double prr() const { return sent == 0 ? 0.0 : static_cast<double>(received) / sent; }
};

struct ScenarioResult {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<DeviceStats> devices;
    // Frames lost to collisions (every non-surviving member of a contended group).
    std::size_t collisions = 0;
    std::vector<Event> events;
    std::vector<lora::LoRaFrame> delivered;  // surviving frames, in start order
};

ScenarioResult run_scenario(const ScenarioConfig& config);

// Index of the surviving frame within `group`, if any.
std::optional<std::size_t> resolve_overlaps(std::span<const lora::LoRaFrame> group,
                                            double capture_threshold_db);

struct Interval {
    double begin_ms;
    double end_ms;  // exclusive
};

// Listen-before-talk: random backoff, then sense every `recheck_ms` until
// the channel is free. `busy` must be sorted and non-overlapping.
double cad_transmit_time(double desired_ms, std::span<const Interval> busy, Rng& rng,
                         double max_backoff_ms, double recheck_ms);

struct SummaryRow {
    std::string scenario;
    std::string cad;
    double prr_pct = 0.0;
    std::size_t payload_len = 0;
    std::optional<double> mean_rssi_dbm;
    std::optional<double> mean_snr_db;

    // "100 %, 3 B, -75 dBm, 11 dB"
    std::string values() const;
    std::string format() const;
};

std::vector<SummaryRow> summarize(const ScenarioResult& result);

nlohmann::json result_to_json(const ScenarioResult& result, bool include_events = true);

}  // namespace microfarm::channel
