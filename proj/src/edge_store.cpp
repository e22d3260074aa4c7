#include "microfarm/edge_store.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "microfarm/error.hpp"

namespace microfarm::telemetry {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const EdgeRecord& r) {
    return {{"device_id", r.reading.device_id},
            {"seq", r.reading.seq},
            {"n_ppm", r.reading.nitrogen_ppm},
            {"p_ppm", r.reading.phosphorus_ppm},
            {"k_ppm", r.reading.potassium_ppm},
            {"temp_centi_c", r.reading.temperature_centi_c},
            {"ph_centi", r.reading.ph_centi},
            {"received_at_ms", r.received_at_ms},
            {"rssi_dbm", r.link.rssi_dbm},
            {"snr_db", r.link.snr_db},
            {"forwarded", r.forwarded},
            {"duplicate", r.duplicate}};
}

EdgeRecord edge_record_from_json(const json& j) {
    try {
        EdgeRecord r;
        r.reading.device_id = j.at("device_id").get<std::uint16_t>();
        r.reading.seq = j.at("seq").get<std::uint16_t>();
        r.reading.nitrogen_ppm = j.at("n_ppm").get<std::uint16_t>();
        r.reading.phosphorus_ppm = j.at("p_ppm").get<std::uint16_t>();
        r.reading.potassium_ppm = j.at("k_ppm").get<std::uint16_t>();
        r.reading.temperature_centi_c = j.at("temp_centi_c").get<std::int16_t>();
        r.reading.ph_centi = j.at("ph_centi").get<std::uint16_t>();
        r.received_at_ms = j.at("received_at_ms").get<std::int64_t>();
        r.reading.timestamp_ms = r.received_at_ms;
        r.link.rssi_dbm = j.at("rssi_dbm").get<double>();
        r.link.snr_db = j.at("snr_db").get<double>();
        r.forwarded = j.at("forwarded").get<bool>();
        r.duplicate = j.at("duplicate").get<bool>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::storage, std::string("malformed edge record: ") + e.what());
    }
}

// --- in-memory sink -------------------------------------------------------

void InMemoryCloudSink::set_fault_policy(FaultPolicy policy) {
    std::lock_guard lock(mu_);
    policy_ = std::move(policy);
}

void InMemoryCloudSink::set_down(bool down) {
    std::lock_guard lock(mu_);
    down_ = down;
}

void InMemoryCloudSink::deliver_locked(const CloudEnvelope& e) {
    ++deliveries_;
    if (index_.count(e.id)) return;
    index_.emplace(e.id, log_.size());
    log_.push_back(e);
}

void InMemoryCloudSink::flush_delayed() {
    std::lock_guard lock(mu_);
    while (!delayed_.empty()) {
        deliver_locked(delayed_.front());
        delayed_.pop_front();
    }
}

Ack InMemoryCloudSink::send(const CloudEnvelope& e) {
    std::lock_guard lock(mu_);
    while (!delayed_.empty()) {
        deliver_locked(delayed_.front());
        delayed_.pop_front();
    }
    if (down_) return Ack::nack;
    Fault fault = policy_ ? policy_(e) : Fault::none;
    switch (fault) {
        case Fault::none: deliver_locked(e); return Ack::ack;
        case Fault::drop_request: return Ack::nack;
        case Fault::drop_ack: deliver_locked(e); return Ack::nack;
        case Fault::delay: delayed_.push_back(e); return Ack::nack;
        case Fault::duplicate:
            deliver_locked(e);
            deliver_locked(e);
            return Ack::ack;
    }
    return Ack::nack;
}

std::size_t InMemoryCloudSink::unique_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

std::size_t InMemoryCloudSink::deliveries() const {
    std::lock_guard lock(mu_);
    return deliveries_;
}

std::size_t InMemoryCloudSink::stored_count(EnvelopeId id) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(log_.begin(), log_.end(), [&](const CloudEnvelope& e) { return e.id == id; }));
}

std::vector<CloudEnvelope> InMemoryCloudSink::records() const {
    std::lock_guard lock(mu_);
    return log_;
}

// --- file sink -------------------------------------------------------------

FileCloudSink::FileCloudSink(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    {
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                json j = json::parse(line);
                ids_.insert({j.at("device_id").get<std::uint16_t>(), j.at("seq").get<std::uint16_t>()});
            } catch (const json::exception&) {
                // torn tail from an interrupted append; the sender will retry it
            }
        }
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(ErrorKind::storage, "cannot open cloud log " + path_.string());
}

Ack FileCloudSink::send(const CloudEnvelope& e) {
    std::lock_guard lock(mu_);
    if (ids_.count(e.id)) return Ack::ack;
    json line = {{"device_id", e.id.device_id}, {"seq", e.id.seq}, {"attempt", e.attempt},
                 {"body", json::parse(e.body)}};
    out_ << line.dump() << '\n';
    out_.flush();
    if (!out_) {
        out_.clear();
        return Ack::nack;
    }
    ids_.insert(e.id);
    return Ack::ack;
}

std::size_t FileCloudSink::unique_count() const {
    std::lock_guard lock(mu_);
    return ids_.size();
}

// --- edge store ------------------------------------------------------------

bool EdgeStore::SeqWindow::observe(std::uint16_t seq) {
    constexpr std::uint16_t half = 0x8000;
    if (!any) {
        any = true;
        latest = seq;
        seen[seq] = true;
        return false;
    }
    auto behind = static_cast<std::uint16_t>(latest - seq);
    if (behind < half) {
        if (seen[seq]) return true;
        seen[seq] = true;
        return false;
    }
    // seq moves the window forward; forget numbers that fall out of it
    auto ahead = static_cast<std::uint16_t>(seq - latest);
    for (std::uint16_t k = 0; k < ahead; ++k)
        seen[static_cast<std::uint16_t>(latest - (half - 1) + k)] = false;
    latest = seq;
    seen[seq] = true;
    return false;
}

EdgeStore::EdgeStore(fs::path dir, Clock& clock) : dir_(std::move(dir)), clock_(clock) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::storage, "cannot create edge store " + dir_.string() + ": " + ec.message());
    replay();
}

fs::path EdgeStore::device_file(std::uint16_t device_id) const {
    return dir_ / ("device_" + std::to_string(device_id) + ".ndjson");
}

fs::path EdgeStore::forwarded_file() const { return dir_ / "forwarded.ndjson"; }

namespace {

// Complete lines only; an unterminated tail is a torn append.
std::vector<std::string> read_lines(const fs::path& p) {
    std::vector<std::string> lines;
    std::ifstream in(p, std::ios::binary);
    if (!in) return lines;
    std::stringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    std::size_t start = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i] == '\n') {
            if (i > start) lines.push_back(all.substr(start, i - start));
            start = i + 1;
        }
    }
    return lines;
}

}  // namespace

void EdgeStore::replay() {
    std::vector<std::pair<std::uint16_t, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("device_", 0) == 0 && entry.path().extension() == ".ndjson") {
            auto id = static_cast<std::uint16_t>(std::stoul(name.substr(7)));
            files.emplace_back(id, entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    struct Loaded {
        EdgeRecord rec;
        std::uint16_t device;
        std::size_t local;
    };
    std::vector<Loaded> loaded;
    for (const auto& [id, path] : files) {
        std::size_t local = 0;
        for (const auto& line : read_lines(path)) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception&) {
                throw Error(ErrorKind::storage, "corrupt line in " + path.string());
            }
            loaded.push_back({edge_record_from_json(j), id, local++});
        }
    }
    // global ingest order is recovered from edge timestamps
    std::stable_sort(loaded.begin(), loaded.end(), [](const Loaded& a, const Loaded& b) {
        return std::tie(a.rec.received_at_ms, a.device, a.local) <
               std::tie(b.rec.received_at_ms, b.device, b.local);
    });

    std::map<std::pair<std::uint16_t, std::size_t>, std::size_t> where;
    for (auto& l : loaded) {
        auto& dev = devices_[l.device];
        dev.window.observe(l.rec.reading.seq);
        dev.last_received_at = std::max(dev.last_received_at, l.rec.received_at_ms);
        where[{l.device, l.local}] = records_.size();
        dev.positions.push_back(records_.size());
        records_.push_back(l.rec);
        attempts_.push_back(0);
    }
    for (const auto& line : read_lines(forwarded_file())) {
        try {
            json j = json::parse(line);
            auto key = std::make_pair(j.at("device_id").get<std::uint16_t>(), j.at("index").get<std::size_t>());
            auto it = where.find(key);
            if (it != where.end()) records_[it->second].forwarded = true;
        } catch (const json::exception&) {
            throw Error(ErrorKind::storage, "corrupt line in " + forwarded_file().string());
        }
    }
}

void EdgeStore::append_line(const fs::path& file, const std::string& line) {
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << line << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::storage, "write failed: " + file.string());
}

void EdgeStore::write_index() {
    json devices = json::array();
    for (const auto& [id, dev] : devices_)
        devices.push_back({{"device_id", id},
                           {"file", device_file(id).filename().string()},
                           {"records", dev.positions.size()}});
    json index = {{"version", 1}, {"devices", devices}};
    fs::path tmp = dir_ / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << index.dump(2) << '\n';
        if (!out) throw Error(ErrorKind::storage, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, dir_ / "index.json", ec);
    if (ec) throw Error(ErrorKind::storage, "cannot update index: " + ec.message());
}

EdgeRecord EdgeStore::ingest(std::span<const std::uint8_t> payload, LinkQuality link) {
    SensorReading reading = decode_reading(payload);
    std::lock_guard lock(mu_);
    auto& dev = devices_[reading.device_id];
    EdgeRecord rec;
    rec.received_at_ms = std::max(clock_.now_ms(), dev.last_received_at);
    reading.timestamp_ms = rec.received_at_ms;
    rec.reading = reading;
    rec.link = link;
    // decide before touching the window so a failed write leaves no trace
    SeqWindow probe = dev.window;
    rec.duplicate = probe.observe(reading.seq);
    append_line(device_file(reading.device_id), to_json(rec).dump());
    dev.window = std::move(probe);
    dev.last_received_at = rec.received_at_ms;
    dev.positions.push_back(records_.size());
    records_.push_back(rec);
    attempts_.push_back(0);
    write_index();
    return rec;
}

ForwardResult EdgeStore::forward_batch(CloudSink& sink, std::size_t max_batch,
                                       const ForwardOptions& options) {
    ForwardResult result;
    bool expected = false;
    if (!forwarding_.compare_exchange_strong(expected, true)) {
        result.busy = true;
        return result;
    }
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag.store(false); }
    } release{forwarding_};

    struct Item {
        std::size_t pos;
        std::size_t local;
        CloudEnvelope env;
    };
    std::vector<Item> batch;
    {
        std::lock_guard lock(mu_);
        for (std::size_t pos = 0; pos < records_.size() && batch.size() < max_batch; ++pos) {
            const auto& r = records_[pos];
            if (r.forwarded || r.duplicate) continue;
            const auto& positions = devices_.at(r.reading.device_id).positions;
            auto local = static_cast<std::size_t>(
                std::lower_bound(positions.begin(), positions.end(), pos) - positions.begin());
            batch.push_back({pos, local, {{r.reading.device_id, r.reading.seq}, to_json(r).dump(), 0}});
        }
    }

    for (auto& item : batch) {
        bool acked = false;
        std::int64_t wait = options.base_backoff_ms;
        for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
            {
                std::lock_guard lock(mu_);
                item.env.attempt = ++attempts_[item.pos];
            }
            ++result.attempts;
            if (sink.send(item.env) == Ack::ack) {
                acked = true;
                break;
            }
            if (attempt < options.max_attempts) {
                clock_.sleep_ms(wait);
                wait *= options.backoff_factor;
            }
        }
        if (!acked) {
            ++result.failed;
            continue;
        }
        std::lock_guard lock(mu_);
        auto& r = records_[item.pos];
        append_line(forwarded_file(), json{{"device_id", r.reading.device_id},
                                           {"seq", r.reading.seq},
                                           {"index", item.local}}
                                          .dump());
        r.forwarded = true;
        ++result.forwarded;
    }
    return result;
}

std::vector<EdgeRecord> EdgeStore::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::vector<EdgeRecord> EdgeStore::device_records(std::uint16_t device_id) const {
    std::lock_guard lock(mu_);
    std::vector<EdgeRecord> out;
    auto it = devices_.find(device_id);
    if (it == devices_.end()) return out;
    for (std::size_t p : it->second.positions) out.push_back(records_[p]);
    return out;
}

std::size_t EdgeStore::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::size_t EdgeStore::non_duplicate_count() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const EdgeRecord& r) { return !r.duplicate; }));
}

std::size_t EdgeStore::unforwarded_count() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const EdgeRecord& r) {
        return !r.duplicate && !r.forwarded;
    }));
}

}  // namespace microfarm::telemetry
