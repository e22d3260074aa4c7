#include "microfarm/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <set>
#include <string>
#include <tuple>

#include "microfarm/error.hpp"

namespace microfarm::channel {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = std::any_of(allowed.begin(), allowed.end(),
                              [&](const char* k) { return it.key() == k; });
        if (!ok) throw Error(ErrorKind::config, std::string("unknown key '") + it.key() + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::config, std::string("bad value for '") + key + "'");
    }
}

enum class Step { sense, start };

struct Pending {
    double t;
    std::size_t device;
    Step step;
    std::uint32_t seq;

    bool operator>(const Pending& o) const {
        return std::tie(t, device, seq) > std::tie(o.t, o.device, o.seq);
    }
};

struct DeviceState {
    Rng rng;
    double offset_ms = 0.0;
};

struct PacketDraws {
    double jitter;
    double backoff;
    lora::LinkSample link;
};

}  // namespace

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::sent: return "sent";
        case EventKind::received: return "received";
        case EventKind::collided: return "collided";
        case EventKind::backoff: return "backoff";
    }
    return "?";
}

void ScenarioConfig::validate() const {
    radio.validate();
    if (devices.empty()) throw Error(ErrorKind::config, "scenario needs at least one device");
    if (!(capture_threshold_db >= 0.0)) throw Error(ErrorKind::config, "capture_threshold_db must be >= 0");
    if (!(cad_max_backoff_ms > 0.0)) throw Error(ErrorKind::config, "cad_max_backoff_ms must be > 0");
    if (!(cad_recheck_ms > 0.0)) throw Error(ErrorKind::config, "cad_recheck_ms must be > 0");
    std::set<std::uint16_t> ids;
    for (const auto& d : devices) {
        if (!ids.insert(d.device_id).second)
            throw Error(ErrorKind::config, "duplicate device_id " + std::to_string(d.device_id));
        if (d.packet_count < 1) throw Error(ErrorKind::config, "packet_count must be >= 1");
        if (!(d.send_interval_ms > 0.0)) throw Error(ErrorKind::config, "send_interval_ms must be > 0");
        if (d.payload_len < 1 || d.payload_len > lora::max_payload_len)
            throw Error(ErrorKind::config, "payload_len must be in 1..255");
        if (!(d.start_offset_ms >= 0.0) || !(d.start_offset_window_ms >= 0.0) || !(d.jitter_ms >= 0.0))
            throw Error(ErrorKind::config, "offsets and jitter must be >= 0");
        d.link.validate();
    }
}

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::config, "scenario must be a JSON object");
    reject_unknown(j, {"name", "description", "radio", "devices", "capture_threshold_db",
                       "cad_max_backoff_ms", "cad_recheck_ms", "seed"},
                   "scenario");
    ScenarioConfig c;
    c.name = get_or<std::string>(j, "name", "scenario");
    if (j.contains("radio")) c.radio = lora::radio_config_from_json(j.at("radio"));
    c.capture_threshold_db = get_or(j, "capture_threshold_db", c.capture_threshold_db);
    c.cad_max_backoff_ms = get_or(j, "cad_max_backoff_ms", c.cad_max_backoff_ms);
    c.cad_recheck_ms = get_or(j, "cad_recheck_ms", c.cad_recheck_ms);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (!j.contains("devices") || !j.at("devices").is_array())
        throw Error(ErrorKind::config, "scenario needs a 'devices' array");
    for (const auto& dj : j.at("devices")) {
        if (!dj.is_object()) throw Error(ErrorKind::config, "device entry must be an object");
        reject_unknown(dj, {"device_id", "payload_len", "packet_count", "send_interval_ms",
                            "start_offset_ms", "start_offset_window_ms", "jitter_ms",
                            "cad_enabled", "link"},
                       "device");
        DeviceConfig d;
        d.device_id = get_or<std::uint16_t>(dj, "device_id", 0);
        d.payload_len = get_or<std::size_t>(dj, "payload_len", d.payload_len);
        d.packet_count = get_or<std::uint32_t>(dj, "packet_count", d.packet_count);
        d.send_interval_ms = get_or(dj, "send_interval_ms", d.send_interval_ms);
        d.start_offset_ms = get_or(dj, "start_offset_ms", d.start_offset_ms);
        d.start_offset_window_ms = get_or(dj, "start_offset_window_ms", d.start_offset_window_ms);
        d.jitter_ms = get_or(dj, "jitter_ms", d.jitter_ms);
        d.cad_enabled = get_or(dj, "cad_enabled", d.cad_enabled);
        if (!dj.contains("link")) throw Error(ErrorKind::config, "device needs a 'link' profile");
        d.link = lora::link_profile_from_json(dj.at("link"));
        c.devices.push_back(std::move(d));
    }
    c.validate();
    return c;
}

std::optional<std::size_t> resolve_overlaps(std::span<const lora::LoRaFrame> group,
                                            double capture_threshold_db) {
    if (group.empty()) return std::nullopt;
    if (group.size() == 1) return 0;
    std::size_t best = 0;
    for (std::size_t i = 1; i < group.size(); ++i)
        if (group[i].rssi_dbm > group[best].rssi_dbm) best = i;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (i == best) continue;
        if (group[best].rssi_dbm - group[i].rssi_dbm < capture_threshold_db) return std::nullopt;
    }
    // a zero threshold still needs a strict maximum
    for (std::size_t i = 0; i < group.size(); ++i)
        if (i != best && group[i].rssi_dbm == group[best].rssi_dbm) return std::nullopt;
    return best;
}

double cad_transmit_time(double desired_ms, std::span<const Interval> busy, Rng& rng,
                         double max_backoff_ms, double recheck_ms) {
    double t = desired_ms + uniform(rng, 0.0, max_backoff_ms);
    for (;;) {
        auto it = std::upper_bound(busy.begin(), busy.end(), t,
                                   [](double v, const Interval& iv) { return v < iv.begin_ms; });
        if (it == busy.begin()) return t;
        --it;
        if (t >= it->end_ms) return t;
        t += recheck_ms;
    }
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    config.validate();
    const std::size_t nd = config.devices.size();

    std::vector<DeviceState> state;
    state.reserve(nd);
    for (std::size_t d = 0; d < nd; ++d) {
        DeviceState s{Rng(derive_seed(config.seed, d)), 0.0};
        const auto& dc = config.devices[d];
        s.offset_ms = dc.start_offset_ms + uniform(s.rng, 0.0, dc.start_offset_window_ms);
        state.push_back(std::move(s));
    }

    std::vector<double> airtime(nd);
    for (std::size_t d = 0; d < nd; ++d)
        airtime[d] = lora::time_on_air_ms(config.radio, config.devices[d].payload_len);

    // per-packet draws, taken in a fixed order so schedules never depend on
    // what happens on the channel
    std::vector<std::vector<PacketDraws>> draws(nd);
    for (std::size_t d = 0; d < nd; ++d) {
        const auto& dc = config.devices[d];
        auto& rng = state[d].rng;
        draws[d].reserve(dc.packet_count);
        for (std::uint32_t k = 0; k < dc.packet_count; ++k) {
            PacketDraws pd;
            pd.jitter = uniform(rng, 0.0, dc.jitter_ms);
            pd.backoff = uniform(rng, 0.0, config.cad_max_backoff_ms);
            pd.link = lora::sample_link(dc.link, rng);
            draws[d].push_back(pd);
        }
    }

    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
    auto schedule = [&](std::size_t d, std::uint32_t k, double earliest) {
        const auto& dc = config.devices[d];
        double desired = state[d].offset_ms + k * dc.send_interval_ms + draws[d][k].jitter;
        double t = std::max(desired, earliest);
        if (dc.cad_enabled)
            queue.push({t + draws[d][k].backoff, d, Step::sense, k});
        else
            queue.push({t, d, Step::start, k});
    };
    for (std::size_t d = 0; d < nd; ++d) schedule(d, 0, 0.0);

    ScenarioResult result;
    result.name = config.name;
    result.seed = config.seed;

    std::vector<lora::LoRaFrame> frames;
    std::vector<std::size_t> frame_device;
    std::vector<std::size_t> on_air;  // indices into frames

    while (!queue.empty()) {
        Pending p = queue.top();
        queue.pop();
        const auto& dc = config.devices[p.device];

        std::erase_if(on_air, [&](std::size_t f) { return frames[f].end_ms() <= p.t; });

        if (p.step == Step::sense) {
            bool busy = std::any_of(on_air.begin(), on_air.end(),
                                    [&](std::size_t f) { return frames[f].start_ms <= p.t; });
            if (busy) {
                result.events.push_back({p.t, dc.device_id, EventKind::backoff, p.seq});
                queue.push({p.t + config.cad_recheck_ms, p.device, Step::sense, p.seq});
                continue;
            }
        }

        lora::LoRaFrame f;
        f.sender_id = dc.device_id;
        f.seq = p.seq;
        f.payload = dc.payload_for ? dc.payload_for(p.seq)
                                   : std::vector<std::uint8_t>(dc.payload_len, 0);
        if (f.payload.size() != dc.payload_len)
            throw Error(ErrorKind::config, "payload source returned wrong length");
        f.start_ms = p.t;
        f.airtime_ms = airtime[p.device];
        f.rssi_dbm = draws[p.device][p.seq].link.rssi_dbm;
        f.snr_db = draws[p.device][p.seq].link.snr_db;
        frames.push_back(std::move(f));
        frame_device.push_back(p.device);
        on_air.push_back(frames.size() - 1);
        result.events.push_back({p.t, dc.device_id, EventKind::sent, p.seq});

        if (p.seq + 1 < dc.packet_count) schedule(p.device, p.seq + 1, frames.back().end_ms());
    }

    // group transitively overlapping frames; intervals are half-open
    std::vector<std::size_t> order(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frames[a].start_ms < frames[b].start_ms;
    });

    std::vector<bool> survived(frames.size(), false);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        double group_end = frames[order[i]].end_ms();
        while (j < order.size() && frames[order[j]].start_ms < group_end) {
            group_end = std::max(group_end, frames[order[j]].end_ms());
            ++j;
        }
        std::vector<lora::LoRaFrame> group;
        for (std::size_t g = i; g < j; ++g) group.push_back(frames[order[g]]);
        auto win = resolve_overlaps(group, config.capture_threshold_db);
        if (win) survived[order[i + *win]] = true;
        if (group.size() > 1) result.collisions += group.size() - (win ? 1 : 0);
        i = j;
    }

    result.devices.resize(nd);
    std::vector<double> rssi_sum(nd, 0.0), snr_sum(nd, 0.0);
    for (std::size_t d = 0; d < nd; ++d) {
        result.devices[d].device_id = config.devices[d].device_id;
        result.devices[d].payload_len = config.devices[d].payload_len;
        result.devices[d].cad_enabled = config.devices[d].cad_enabled;
    }
    for (std::size_t o : order) {
        const auto& f = frames[o];
        std::size_t d = frame_device[o];
        auto& st = result.devices[d];
        ++st.sent;
        if (survived[o]) {
            ++st.received;
            rssi_sum[d] += f.rssi_dbm;
            snr_sum[d] += f.snr_db;
            result.delivered.push_back(f);
        }
        result.events.push_back(
            {f.end_ms(), f.sender_id, survived[o] ? EventKind::received : EventKind::collided, f.seq});
    }
    for (std::size_t d = 0; d < nd; ++d) {
        auto& st = result.devices[d];
        if (st.received > 0) {
            st.mean_rssi_dbm = rssi_sum[d] / st.received;
            st.mean_snr_db = snr_sum[d] / st.received;
        }
    }

    std::stable_sort(result.events.begin(), result.events.end(), [](const Event& a, const Event& b) {
        return std::tie(a.t_ms, a.device_id, a.seq) < std::tie(b.t_ms, b.device_id, b.seq);
    });
    return result;
}

namespace {

std::string fmt_db(const std::optional<double>& v, const char* unit) {
    if (!v) return "/";
    char buf[32];
    long r = std::lround(*v);
    std::snprintf(buf, sizeof buf, "%ld %s", r, unit);
    return buf;
}

}  // namespace

std::string SummaryRow::values() const {
    char prr[32];
    std::snprintf(prr, sizeof prr, "%ld %%", std::lround(prr_pct));
    return std::string(prr) + ", " + std::to_string(payload_len) + " B, " +
           fmt_db(mean_rssi_dbm, "dBm") + ", " + fmt_db(mean_snr_db, "dB");
}

std::string SummaryRow::format() const {
    return scenario + " | CAD " + cad + " | " + values();
}

std::vector<SummaryRow> summarize(const ScenarioResult& result) {
    std::vector<SummaryRow> rows;
    for (const auto& d : result.devices) {
        SummaryRow r;
        r.scenario = result.name;
        r.cad = result.devices.size() == 1 ? "-" : (d.cad_enabled ? "Yes" : "No");
        r.prr_pct = 100.0 * d.prr();
        r.payload_len = d.payload_len;
        r.mean_rssi_dbm = d.mean_rssi_dbm;
        r.mean_snr_db = d.mean_snr_db;
        rows.push_back(std::move(r));
    }
    return rows;
}

json result_to_json(const ScenarioResult& result, bool include_events) {
    json devices = json::array();
    for (const auto& d : result.devices) {
        devices.push_back({{"device_id", d.device_id},
                           {"sent", d.sent},
                           {"received", d.received},
                           {"prr", d.prr()},
                           {"mean_rssi", d.mean_rssi_dbm ? json(*d.mean_rssi_dbm) : json(nullptr)},
                           {"mean_snr", d.mean_snr_db ? json(*d.mean_snr_db) : json(nullptr)}});
    }
    json out = {{"scenario", result.name},
                {"seed", result.seed},
                {"devices", devices},
                {"collisions", result.collisions}};
    if (include_events) {
        json events = json::array();
        for (const auto& e : result.events)
            events.push_back({{"t_ms", e.t_ms},
                              {"device_id", e.device_id},
                              {"kind", event_kind_name(e.kind)},
                              {"seq", e.seq}});
        out["events"] = std::move(events);
    }
    return out;
}

}  // namespace microfarm::channel
