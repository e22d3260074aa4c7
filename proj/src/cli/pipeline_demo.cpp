#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "microfarm/channel_sim.hpp"
#include "microfarm/clock.hpp"
#include "microfarm/edge_store.hpp"
#include "microfarm/error.hpp"
#include "microfarm/random.hpp"
#include "microfarm/ratings.hpp"
#include "microfarm/recommender.hpp"
#include "microfarm/telemetry.hpp"

namespace microfarm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stores through to the real sink but loses every `period`-th ack, so the
// edge has to retry envelopes the cloud already holds.
class LossyAckSink final : public telemetry::CloudSink {
public:
    LossyAckSink(telemetry::CloudSink& inner, std::size_t period) : inner_(inner), period_(period) {}

    telemetry::Ack send(const telemetry::CloudEnvelope& e) override {
        auto ack = inner_.send(e);
        if (++calls_ % period_ == 0) {
            ++lost_;
            return telemetry::Ack::nack;
        }
        return ack;
    }
    std::size_t lost() const { return lost_; }

private:
    telemetry::CloudSink& inner_;
    std::size_t period_;
    std::size_t calls_ = 0;
    std::size_t lost_ = 0;
};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

template <typename T>
T clamp_round(double v, double lo, double hi) {
    return static_cast<T>(std::clamp(std::round(v), lo, hi));
}

const lora::LinkProfile field_links[] = {
    {-75.0, 2.0, 11.0, 1.0},
    {-88.0, 2.0, 10.0, 1.0},
    {-81.0, 2.0, 9.0, 1.0},
    {-93.0, 2.0, 7.0, 1.0},
};

}  // namespace

int cmd_pipeline_demo(const Globals& g, const PipelineOptions& opt, std::ostream& out) {
    if (opt.devices < 1 || opt.devices > 64) throw Error(ErrorKind::argument, "--devices must be in 1..64");
    if (opt.readings < 1) throw Error(ErrorKind::argument, "--readings must be >= 1");
    if (opt.retrain_period < 1) throw Error(ErrorKind::argument, "--retrain-period must be >= 1");
    auto kind = recommender::parse_kind(opt.kind);
    if (!kind) throw Error(ErrorKind::argument, "unknown --kind '" + opt.kind + "'");

    auto dir = out_dir(g, "pipeline");
    // state owned by this command starts fresh on every run
    fs::remove_all(dir / "edge");
    fs::remove(dir / "cloud.ndjson");
    fs::remove(dir / "recommendations.ndjson");

    std::ostringstream transcript;
    auto say = [&](const std::string& line) {
        transcript << line << '\n';
        if (!g.quiet) out << line << '\n';
    };
    json summary;

    // 1. devices sample their soil and uplink 17-byte frames over LoRa
    auto farms = ratings::generate_dataset(opt.devices, ratings::plant_table_size, derive_seed(g.seed, 11));
    Rng sensor(derive_seed(g.seed, 12));
    std::vector<std::vector<telemetry::Frame>> frames(opt.devices);
    for (std::size_t d = 0; d < opt.devices; ++d) {
        const auto& soil = farms.soils[d];
        for (std::uint32_t s = 0; s < opt.readings; ++s) {
            telemetry::SensorReading r;
            r.device_id = static_cast<std::uint16_t>(d + 1);
            r.seq = static_cast<std::uint16_t>(s);
            r.nitrogen_ppm = clamp_round<std::uint16_t>(normal(sensor, soil.nitrogen_ppm, 1.5), 0, 65535);
            r.phosphorus_ppm = clamp_round<std::uint16_t>(normal(sensor, soil.phosphorus_ppm, 1.5), 0, 65535);
            r.potassium_ppm = clamp_round<std::uint16_t>(normal(sensor, soil.potassium_ppm, 1.5), 0, 65535);
            r.temperature_centi_c =
                clamp_round<std::int16_t>(100.0 * normal(sensor, soil.temperature_c, 0.3), -4000, 8500);
            r.ph_centi = clamp_round<std::uint16_t>(100.0 * normal(sensor, soil.ph, 0.05), 0, 1400);
            frames[d].push_back(telemetry::encode_reading(r));
        }
    }
    channel::ScenarioConfig sc;
    sc.name = "pipeline";
    sc.seed = derive_seed(g.seed, 13);
    for (std::size_t d = 0; d < opt.devices; ++d) {
        channel::DeviceConfig dc;
        dc.device_id = static_cast<std::uint16_t>(d + 1);
        dc.payload_len = telemetry::frame_size;
        dc.packet_count = opt.readings;
        dc.jitter_ms = 200.0;
        dc.cad_enabled = true;
        dc.link = field_links[d % std::size(field_links)];
        dc.payload_for = [&frames, d](std::uint32_t seq) {
            return std::vector<std::uint8_t>(frames[d][seq].begin(), frames[d][seq].end());
        };
        sc.devices.push_back(std::move(dc));
    }
    auto lora_result = channel::run_scenario(sc);
    write_text(dir / "lora_result.json", channel::result_to_json(lora_result, false).dump(2) + "\n");
    say("[1/6] collect: " + std::to_string(opt.devices) + " devices encoded " +
        std::to_string(opt.devices * opt.readings) + " readings and sent them over LoRa (CAD on)");
    json lora_json = json::array();
    for (const auto& d : lora_result.devices) {
        say("  device " + std::to_string(d.device_id) + ": sent " + std::to_string(d.sent) + ", received " +
            std::to_string(d.received) + " (" + fixed(100.0 * d.prr(), 0) + " %)");
        lora_json.push_back({{"device_id", d.device_id}, {"sent", d.sent}, {"received", d.received}});
    }
    summary["lora"] = lora_json;

    // 2. the edge decodes, timestamps and stores what the gateway heard
    VirtualClock clock(0);
    telemetry::EdgeStore store(dir / "edge", clock);
    for (const auto& f : lora_result.delivered) {
        clock.set(std::llround(f.end_ms()));
        store.ingest(f.payload, {f.rssi_dbm, f.snr_db});
    }
    // a device that missed its downlink ack resends its first reading
    std::size_t resent = 0;
    for (std::size_t d = 0; d < opt.devices; ++d) {
        auto it = std::find_if(lora_result.delivered.begin(), lora_result.delivered.end(),
                               [&](const lora::LoRaFrame& f) { return f.sender_id == d + 1; });
        if (it == lora_result.delivered.end()) continue;
        clock.advance(1000);
        store.ingest(it->payload, {it->rssi_dbm, it->snr_db});
        ++resent;
    }
    const std::size_t edge_records = store.size();
    const std::size_t edge_unique = store.non_duplicate_count();
    say("[2/6] edge-ingest: " + std::to_string(edge_records) + " records stored, " +
        std::to_string(edge_records - edge_unique) + " flagged duplicate (" + std::to_string(resent) +
        " resent frames)");

    // 3. forward to the cloud over a link that loses acks
    std::size_t passes = 0, attempts = 0, lost = 0;
    {
        telemetry::FileCloudSink cloud(dir / "cloud.ndjson");
        LossyAckSink lossy(cloud, 4);
        while (store.unforwarded_count() > 0 && passes < 100) {
            auto r = store.forward_batch(lossy, 64);
            attempts += r.attempts;
            ++passes;
        }
        lost = lossy.lost();
    }
    std::vector<telemetry::EdgeRecord> cloud_records;
    {
        std::ifstream in(dir / "cloud.ndjson");
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) cloud_records.push_back(telemetry::edge_record_from_json(json::parse(line).at("body")));
    }
    say("[3/6] cloud-forward: " + std::to_string(passes) + " passes, " + std::to_string(attempts) +
        " send attempts, " + std::to_string(lost) + " acks lost; cloud holds " + std::to_string(cloud_records.size()) +
        " records (edge non-duplicates: " + std::to_string(edge_unique) + ")");
    summary["edge_records"] = edge_records;
    summary["edge_non_duplicates"] = edge_unique;
    summary["cloud_records"] = cloud_records.size();

    // 4. complete the gardener's sparse ratings
    auto garden = ratings::generate_dataset(opt.soils, ratings::plant_table_size, derive_seed(g.seed, 14));
    auto sparse = ratings::mask(garden.truth, opt.sparsity, derive_seed(g.seed, 15));
    auto full = ratings::complete_matrix(sparse);
    auto cm = ratings::evaluate_completion(garden.truth, full, sparse);
    ratings::write_soils_csv(dir / "soils.csv", garden.soils);
    ratings::write_ratings_csv(dir / "sparse.csv", sparse);
    ratings::write_ratings_csv(dir / "full.csv", full);
    say("[4/6] complete: " + std::to_string(sparse.rows()) + "x" + std::to_string(sparse.cols()) +
        " ratings at sparsity " + fixed(sparse.sparsity(), 2) + ", accuracy " + fixed(cm.accuracy(), 4) + " on " +
        std::to_string(cm.total()) + " predicted cells");
    summary["completion_accuracy"] = cm.accuracy();

    // 5. train on soils -> completed ratings
    std::vector<ratings::SoilProfile> soils = garden.soils;
    recommender::ModelSpec spec{*kind, {}};
    auto model = recommender::fit(spec, recommender::Dataset::from(soils, full), derive_seed(g.seed, 16));
    recommender::save_model(dir / "model.json", model);
    say("[5/6] train: " + std::string(kind_name(*kind)) + " on " + std::to_string(soils.size()) + " soils x " +
        std::to_string(full.cols()) + " plants");

    // 6. recommend for every soil reading that reached the cloud; every T
    // recommendations the model is retrained on the enlarged rating set
    std::ofstream log(dir / "recommendations.ndjson", std::ios::binary | std::ios::trunc);
    std::vector<std::size_t> retrain_at;
    std::size_t count = 0;
    for (const auto& rec : cloud_records) {
        ratings::SoilProfile soil{static_cast<double>(rec.reading.nitrogen_ppm),
                                  static_cast<double>(rec.reading.phosphorus_ppm),
                                  static_cast<double>(rec.reading.potassium_ppm),
                                  rec.reading.temperature_centi_c / 100.0, rec.reading.ph_centi / 100.0};
        auto ranked = recommender::recommend_top_n(model, soil, opt.top_n);
        auto pred = recommender::predict(model, soil);
        json ranking = json::array();
        for (const auto& r : ranked) ranking.push_back({{"plant", r.plant}, {"score", r.score}});
        log << json{{"device_id", rec.reading.device_id}, {"seq", rec.reading.seq}, {"ranking", ranking},
                    {"ratings", pred.ratings}}
                   .dump()
            << '\n';
        std::vector<std::uint8_t> row(pred.ratings.begin(), pred.ratings.end());
        full.append_row(row, ratings::Provenance::predicted);
        soils.push_back(soil);
        ++count;
        if (count % opt.retrain_period == 0) {
            model = recommender::fit(spec, recommender::Dataset::from(soils, full), derive_seed(g.seed, 16));
            recommender::save_model(dir / "model.json", model);
            retrain_at.push_back(count);
            say("  retrain " + std::to_string(retrain_at.size()) + " at recommendation " + std::to_string(count) +
                " (" + std::to_string(soils.size()) + " soils)");
        }
    }
    log.close();
    ratings::write_ratings_csv(dir / "full_enlarged.csv", full);
    ratings::write_soils_csv(dir / "soils_enlarged.csv", soils);
    say("[6/6] recommend: " + std::to_string(count) + " recommendations (top " + std::to_string(opt.top_n) + "), " +
        std::to_string(retrain_at.size()) + " retrains with T = " + std::to_string(opt.retrain_period));
    summary["recommendations"] = count;
    summary["retrain_period"] = opt.retrain_period;
    summary["retrain_at"] = retrain_at;

    write_text(dir / "pipeline.json", summary.dump(2) + "\n");
    write_text(dir / "transcript.txt", transcript.str());
    return 0;
}

}  // namespace microfarm::cli
