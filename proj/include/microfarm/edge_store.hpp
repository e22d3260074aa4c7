#pragma once

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "microfarm/clock.hpp"
#include "microfarm/telemetry.hpp"

namespace microfarm::telemetry {

struct LinkQuality {
    double rssi_dbm = 0.0;
    double snr_db = 0.0;
};

struct EdgeRecord {
    SensorReading reading;
    std::int64_t received_at_ms = 0;
    LinkQuality link;
    bool forwarded = false;
    bool duplicate = false;
};

nlohmann::json to_json(const EdgeRecord& record);
EdgeRecord edge_record_from_json(const nlohmann::json& j);

struct EnvelopeId {
    std::uint16_t device_id = 0;
    std::uint16_t seq = 0;
    auto operator<=>(const EnvelopeId&) const = default;
};

struct CloudEnvelope {
    EnvelopeId id;
    std::string body;  // EdgeRecord as compact JSON
    std::uint32_t attempt = 1;
};

enum class Ack { ack, nack };

class CloudSink {
public:
    virtual ~CloudSink() = default;
    virtual Ack send(const CloudEnvelope& envelope) = 0;
};

// Cloud store kept in memory, with injectable faults for tests.
class InMemoryCloudSink final : public CloudSink {
public:
    enum class Fault {
        none,
        drop_request,  // never reaches the store, nack
        drop_ack,      // stored, but the ack is lost (sender sees nack)
        delay,         // held back and delivered before the next send, nack
        duplicate,     // delivered twice, ack
    };
    using FaultPolicy = std::function<Fault(const CloudEnvelope&)>;

    void set_fault_policy(FaultPolicy policy);
    void set_down(bool down);

    Ack send(const CloudEnvelope& envelope) override;

    // Delivers anything held back by `delay` faults.
    void flush_delayed();

    std::size_t unique_count() const;
    std::size_t deliveries() const;  // raw arrivals, including redeliveries
    std::size_t stored_count(EnvelopeId id) const;
    std::vector<CloudEnvelope> records() const;  // insertion order

private:
    void deliver_locked(const CloudEnvelope& envelope);

    mutable std::mutex mu_;
    FaultPolicy policy_;
    bool down_ = false;
    std::deque<CloudEnvelope> delayed_;
    std::map<EnvelopeId, std::size_t> index_;  // id -> position in log_
    std::vector<CloudEnvelope> log_;
    std::size_t deliveries_ = 0;
};

// Append-only NDJSON log with an id index rebuilt on open.
class FileCloudSink final : public CloudSink {
public:
    explicit FileCloudSink(std::filesystem::path path);

    Ack send(const CloudEnvelope& envelope) override;

    std::size_t unique_count() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::set<EnvelopeId> ids_;
    std::ofstream out_;
};

struct ForwardOptions {
    int max_attempts = 5;
    std::int64_t base_backoff_ms = 100;
    std::int64_t backoff_factor = 2;
};

struct ForwardResult {
    std::size_t forwarded = 0;
    std::size_t failed = 0;
    std::size_t attempts = 0;
    bool busy = false;  // another pass was already running
};

class EdgeStore {
public:
    // Opens (creating if needed) the store in `dir` and replays its logs.
    EdgeStore(std::filesystem::path dir, Clock& clock);
    EdgeStore(const EdgeStore&) = delete;
    EdgeStore& operator=(const EdgeStore&) = delete;

    EdgeRecord ingest(std::span<const std::uint8_t> frame_payload, LinkQuality link);

    ForwardResult forward_batch(CloudSink& sink, std::size_t max_batch,
                                const ForwardOptions& options = {});

    std::vector<EdgeRecord> records() const;  // ingest order
    std::vector<EdgeRecord> device_records(std::uint16_t device_id) const;
    std::size_t size() const;
    std::size_t non_duplicate_count() const;
    std::size_t unforwarded_count() const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    struct SeqWindow {
        bool any = false;
        std::uint16_t latest = 0;
        std::vector<bool> seen = std::vector<bool>(65536, false);
        bool observe(std::uint16_t seq);  // true when seq is a duplicate
    };
    struct DeviceLog {
        std::vector<std::size_t> positions;  // into records_
        SeqWindow window;
        std::int64_t last_received_at = INT64_MIN;
    };

    void replay();
    void append_line(const std::filesystem::path& file, const std::string& line);
    void write_index();
    std::filesystem::path device_file(std::uint16_t device_id) const;
    std::filesystem::path forwarded_file() const;

    std::filesystem::path dir_;
    Clock& clock_;
    mutable std::mutex mu_;
    std::vector<EdgeRecord> records_;
    std::vector<std::uint32_t> attempts_;  // per record, across passes
    std::map<std::uint16_t, DeviceLog> devices_;
    std::atomic<bool> forwarding_{false};
};

inline ForwardResult forward_batch(EdgeStore& store, CloudSink& sink, std::size_t max_batch) {
    return store.forward_batch(sink, max_batch);
}

}  // namespace microfarm::telemetry
