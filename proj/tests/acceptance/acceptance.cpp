// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "microfarm/channel_sim.hpp"
#include "microfarm/cli.hpp"
#include "microfarm/clock.hpp"
#include "microfarm/edge_store.hpp"
#include "microfarm/error.hpp"
#include "microfarm/lora_link.hpp"
#include "microfarm/random.hpp"
#include "microfarm/ratings.hpp"
#include "microfarm/recommender.hpp"
#include "microfarm/telemetry.hpp"
#include "support.hpp"

using namespace microfarm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "failed: " + what;
        }
    }
    void note(const std::string& s) {
        if (!detail.empty()) detail += "; ";
        detail += s;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

channel::ScenarioConfig load_scenario(const std::string& name) {
    std::ifstream in(test_support::fixtures_dir() / name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    return channel::scenario_from_json(json::parse(in));
}

// ---- 1 ----------------------------------------------------------------

// Semtech's closed form, evaluated with CR as 1..4 and everything in seconds.
double reference_airtime_ms(int sf, double bw, int cr, int npre, bool ih, bool crc, bool de, int pl) {
    const double tsym = std::pow(2.0, sf) / bw;
    const double payload = 8 + std::max(std::ceil((8.0 * pl - 4 * sf + 28 + 16 * crc - 20 * ih) / (4.0 * (sf - 2 * de))) *
                                            (cr + 4),
                                        0.0);
    return ((npre + 4.25) + payload) * tsym * 1e3;
}

Verdict airtime() {
    Verdict v;
    lora::RadioConfig c;
    const std::pair<int, double> want[] = {{3, 30.976}, {50, 97.536}, {250, 389.376}};
    for (auto [pl, ms] : want) {
        double got = lora::time_on_air_ms(c, pl);
        double ref = reference_airtime_ms(7, 125e3, 1, 8, false, true, false, pl);
        v.require(std::abs(got - ms) <= 0.001, std::to_string(pl) + " B -> " + fmt("%.6f", got));
        v.require(std::abs(got - ref) <= 0.001, std::to_string(pl) + " B disagrees with reference");
        v.note(std::to_string(pl) + " B " + fmt("%.3f ms", got));
    }
    return v;
}

// ---- 2, 3 -------------------------------------------------------------

Verdict all_delivered(const std::string& prefix) {
    Verdict v;
    for (const char* pl : {"3", "50", "250"}) {
        auto cfg = load_scenario(prefix + "_" + pl + "B.json");
        auto t0 = std::chrono::steady_clock::now();
        auto r = channel::run_scenario(cfg);
        double ms = elapsed_ms(t0);
        std::string prrs;
        for (const auto& d : r.devices) {
            v.require(d.sent == 100 && d.received == 100,
                      prefix + " " + pl + " B device " + std::to_string(d.device_id) + " prr " + fmt("%.2f", d.prr()));
            prrs += (prrs.empty() ? "" : "/") + fmt("%.0f%%", 100 * d.prr());
        }
        v.require(ms < 1000.0, std::string(pl) + " B took " + fmt("%.0f ms", ms));
        v.note(std::string(pl) + " B " + prrs + " in " + fmt("%.1f ms", ms));
    }
    return v;
}

// ---- 4 ----------------------------------------------------------------

Verdict scenario3() {
    Verdict v;
    const char* payloads[] = {"3", "50", "250"};
    std::vector<double> mean_prr;
    std::map<std::string, std::pair<double, double>> per_device;  // strong, weak means
    for (const char* pl : payloads) {
        auto cfg = load_scenario(std::string("scenario3_") + pl + "B.json");
        v.require(cfg.devices.size() == 2, "scenario 3 needs two devices");
        for (const auto& d : cfg.devices) v.require(!d.cad_enabled, "scenario 3 must run without CAD");
        const auto& a = cfg.devices[0].link;
        const auto& b = cfg.devices[1].link;
        v.require(std::abs(a.mean_rssi_dbm - b.mean_rssi_dbm) >= 6.0, "link profiles differ by < 6 dB");
        const std::size_t strong = a.mean_rssi_dbm >= b.mean_rssi_dbm ? 0 : 1;
        double sum = 0, s_strong = 0, s_weak = 0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            cfg.seed = seed;
            auto r = channel::run_scenario(cfg);
            double ps = r.devices[strong].prr(), pw = r.devices[1 - strong].prr();
            v.require(ps >= pw, std::string(pl) + " B seed " + std::to_string(seed) + ": strong " + fmt("%.2f", ps) +
                                    " < weak " + fmt("%.2f", pw));
            sum += ps + pw;
            s_strong += ps;
            s_weak += pw;
        }
        mean_prr.push_back(sum / 20.0);
        per_device[pl] = {s_strong / 10.0, s_weak / 10.0};
        v.note(std::string(pl) + " B mean " + fmt("%.3f", sum / 20.0) + " (strong " + fmt("%.2f", s_strong / 10.0) +
               ", weak " + fmt("%.2f", s_weak / 10.0) + ")");
    }
    v.require(mean_prr[0] > mean_prr[1] && mean_prr[1] > mean_prr[2], "(a) mean prr not strictly decreasing");
    v.require(per_device["250"].first <= 0.5 && per_device["250"].second <= 0.5, "(c) 250 B mean prr above 50 %");
    return v;
}

// ---- 5 ----------------------------------------------------------------

Verdict capture() {
    Verdict v;
    Rng rng(5);
    std::size_t survived = 0, mismatches = 0;
    const int groups = 10000;
    for (int g = 0; g < groups; ++g) {
        std::size_t n = 1 + uniform_index(rng, 5);
        double threshold = std::floor(uniform(rng, 0.0, 10.0));
        std::vector<lora::LoRaFrame> frames(n);
        for (auto& f : frames) {
            f.start_ms = uniform(rng, 0.0, 10.0);
            f.airtime_ms = 50.0;
            // integer dBm so exact ties and exact-threshold margins occur
            f.rssi_dbm = -60.0 - static_cast<double>(uniform_index(rng, 30));
        }
        std::optional<std::size_t> expect;
        for (std::size_t i = 0; i < n; ++i) {
            bool wins = true;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && !(frames[i].rssi_dbm - frames[j].rssi_dbm >= threshold && frames[i].rssi_dbm > frames[j].rssi_dbm))
                    wins = false;
            if (wins) expect = i;
        }
        auto got = channel::resolve_overlaps(frames, threshold);
        if (got != expect) ++mismatches;
        if (got) ++survived;
    }
    v.require(mismatches == 0, std::to_string(mismatches) + " groups disagree with the oracle");
    v.note(std::to_string(groups) + " groups, " + std::to_string(survived) + " with a survivor");
    return v;
}

// ---- 6 ----------------------------------------------------------------

telemetry::SensorReading random_reading(Rng& rng) {
    telemetry::SensorReading r;
    r.device_id = static_cast<std::uint16_t>(rng());
    r.seq = static_cast<std::uint16_t>(rng());
    r.nitrogen_ppm = static_cast<std::uint16_t>(rng());
    r.phosphorus_ppm = static_cast<std::uint16_t>(rng());
    r.potassium_ppm = static_cast<std::uint16_t>(rng());
    r.temperature_centi_c = static_cast<std::int16_t>(-4000 + static_cast<int>(uniform_index(rng, 12501)));
    r.ph_centi = static_cast<std::uint16_t>(uniform_index(rng, 1401));
    return r;
}

Verdict codec() {
    Verdict v;
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(6);
    std::size_t bad_round_trips = 0;
    for (int i = 0; i < 10000; ++i) {
        auto r = random_reading(rng);
        if (!telemetry::decode_reading(telemetry::encode_reading(r)).same_payload(r)) ++bad_round_trips;
    }
    std::size_t silent = 0, corruptions = 0;
    for (int i = 0; i < 100; ++i) {
        auto frame = telemetry::encode_reading(random_reading(rng));
        for (std::size_t pos = 0; pos < frame.size(); ++pos)
            for (int value = 0; value < 256; ++value) {
                if (value == frame[pos]) continue;
                auto bad = frame;
                bad[pos] = static_cast<std::uint8_t>(value);
                ++corruptions;
                try {
                    telemetry::decode_reading(bad);
                    ++silent;
                } catch (const Error&) {
                }
            }
    }
    double ms = elapsed_ms(t0);
    v.require(bad_round_trips == 0, std::to_string(bad_round_trips) + " round trips differ");
    v.require(silent == 0, std::to_string(silent) + " corrupted frames decoded");
    v.require(ms < 5000.0, "took " + fmt("%.0f ms", ms));
    v.note("10000 round trips, " + std::to_string(corruptions) + " corruptions rejected in " + fmt("%.0f ms", ms));
    return v;
}

// ---- 7 ----------------------------------------------------------------

// Records which envelope ids were acknowledged back to the edge.
class AckLedger final : public telemetry::CloudSink {
public:
    explicit AckLedger(telemetry::CloudSink& inner) : inner_(inner) {}
    telemetry::Ack send(const telemetry::CloudEnvelope& e) override {
        auto a = inner_.send(e);
        if (a == telemetry::Ack::ack) acked.insert(e.id);
        return a;
    }
    std::set<telemetry::EnvelopeId> acked;

private:
    telemetry::CloudSink& inner_;
};

Verdict exactly_once() {
    Verdict v;
    test_support::TempDir dir;
    VirtualClock clock;
    telemetry::EdgeStore store(dir.path(), clock);
    for (int i = 0; i < 1000; ++i) {
        telemetry::SensorReading r;
        r.device_id = static_cast<std::uint16_t>(1 + i % 4);
        r.seq = static_cast<std::uint16_t>(i / 4);
        r.ph_centi = 650;
        clock.advance(5);
        store.ingest(telemetry::encode_reading(r), {-80, 9});
    }
    telemetry::InMemoryCloudSink cloud;
    Rng rng(7);
    cloud.set_fault_policy([&](const telemetry::CloudEnvelope&) {
        double u = uniform01(rng);
        using F = telemetry::InMemoryCloudSink::Fault;
        if (u < 0.15) return F::drop_request;
        if (u < 0.30) return F::drop_ack;
        if (u < 0.40) return F::delay;
        if (u < 0.50) return F::duplicate;
        return F::none;
    });
    AckLedger ledger(cloud);
    int passes = 0;
    bool premature = false;
    while (store.unforwarded_count() > 0 && passes < 50) {
        store.forward_batch(ledger, 1000);
        ++passes;
        for (const auto& rec : store.records())
            if (rec.forwarded && !ledger.acked.count({rec.reading.device_id, rec.reading.seq})) premature = true;
    }
    cloud.flush_delayed();
    std::size_t wrong = 0;
    for (const auto& rec : store.records())
        if (cloud.stored_count({rec.reading.device_id, rec.reading.seq}) != 1) ++wrong;
    v.require(store.unforwarded_count() == 0, "records left unforwarded");
    v.require(cloud.unique_count() == 1000, "cloud holds " + std::to_string(cloud.unique_count()));
    v.require(wrong == 0, std::to_string(wrong) + " envelopes not stored exactly once");
    v.require(!premature, "a record was marked forwarded without an ack");
    v.note("1000 envelopes, " + std::to_string(cloud.deliveries()) + " deliveries over " + std::to_string(passes) +
           " passes, cloud unique " + std::to_string(cloud.unique_count()));
    return v;
}

// ---- 8 ----------------------------------------------------------------

Verdict cosine_completion() {
    Verdict v;
    Rng rng(8);
    std::size_t matrices = 0, violations = 0;
    auto fail = [&](bool ok) {
        if (!ok) ++violations;
    };
    for (int t = 0; t < 60; ++t, ++matrices) {
        std::size_t m = 2 + uniform_index(rng, 199), n = 2 + uniform_index(rng, 14);
        ratings::SparseRatingMatrix s(m, n);
        double keep = uniform(rng, 0.1, 0.95);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (uniform01(rng) < keep) s.set(i, j, 1 + static_cast<int>(uniform_index(rng, 5)));
        auto sim = ratings::similarity_matrix(s);
        for (std::size_t i = 0; i < m; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < n; ++j) any = any || s.present(i, j);
            if (any) fail(std::abs(ratings::cosine_similarity(s.row(i), s.row(i)) - 1.0) < 1e-12);
            for (std::size_t j = 0; j < m; ++j) fail(sim[i * m + j] == sim[j * m + i]);
        }
        // scale row 0 by 3: its similarity ranking must not move
        std::vector<std::uint8_t> r0(s.row(0).begin(), s.row(0).end()), r0x3 = r0;
        for (auto& x : r0x3) x = static_cast<std::uint8_t>(x * 3);
        for (std::size_t i = 1; i < m; ++i)
            for (std::size_t j = 1; j < m; ++j) {
                double a = ratings::cosine_similarity(r0, s.row(i)) - ratings::cosine_similarity(r0, s.row(j));
                double b = ratings::cosine_similarity(r0x3, s.row(i)) - ratings::cosine_similarity(r0x3, s.row(j));
                if (std::abs(a) > 1e-9) fail((a > 0) == (b > 0));
            }
        auto full = ratings::complete_matrix(s, {1 + uniform_index(rng, 25), ratings::MissingPolicy::co_rated});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (s.present(i, j)) fail(full.at(i, j) == s.raw(i, j));
                fail(full.at(i, j) >= 1 && full.at(i, j) <= 5);
            }
    }
    v.require(violations == 0, std::to_string(violations) + " property violations");
    v.note(std::to_string(matrices) + " random matrices (m <= 200)");
    return v;
}

// ---- 9 ----------------------------------------------------------------

Verdict sparsity_trend(std::size_t soils, bool absolute_bounds) {
    Verdict v;
    auto t0 = std::chrono::steady_clock::now();
    auto data = ratings::generate_dataset(soils, 15, 42);
    std::vector<double> acc;
    std::pair<int, int> pair40{0, 0};
    for (double sp : {0.1, 0.4, 0.7}) {
        auto s = ratings::mask(data.truth, sp, derive_seed(42, 1));
        auto cm = ratings::evaluate_completion(data.truth, ratings::complete_matrix(s), s);
        acc.push_back(cm.accuracy());
        if (sp == 0.4) pair40 = cm.max_off_diagonal_pair();
    }
    double ms = elapsed_ms(t0);
    if (absolute_bounds) {
        v.require(acc[0] >= 0.85, "acc(10 %) < 85 %");
        v.require(acc[1] >= 0.60, "acc(40 %) < 60 %");
        v.require(pair40 == std::pair{2, 3}, "largest confusion at 40 % is between " + std::to_string(pair40.first) +
                                                  " and " + std::to_string(pair40.second));
        v.require(ms < 120000.0, "took " + fmt("%.0f ms", ms));
    }
    v.require(acc[0] > acc[1] && acc[1] > acc[2], "accuracy not strictly ordered");
    v.note(std::to_string(soils) + " soils: acc " + fmt("%.4f", acc[0]) + " / " + fmt("%.4f", acc[1]) + " / " +
           fmt("%.4f", acc[2]) + " at 10/40/70 %, top confusion " + std::to_string(pair40.first) + "-" +
           std::to_string(pair40.second) + ", " + fmt("%.1f s", ms / 1000));
    return v;
}

// ---- 10 ---------------------------------------------------------------

Verdict benchmark_trends() {
    using recommender::ModelKind;
    Verdict v;
    recommender::BenchOptions o;
    o.seed = 42;
    o.timing_strict = true;
    auto t0 = std::chrono::steady_clock::now();
    auto report = recommender::benchmark(o);
    double ms = elapsed_ms(t0);
    const std::size_t lo = 100, hi = 10100;
    auto at = [&](ModelKind k, std::size_t size) { return *report.find(k, size); };

    const auto gb = at(ModelKind::gradient_boost, hi);
    bool gb_top = true;
    std::string leader;
    for (auto k : recommender::all_kinds)
        if (at(k, hi).accuracy > gb.accuracy) {
            gb_top = false;
            leader += std::string(leader.empty() ? "" : ",") + std::string(recommender::kind_name(k)) + " " +
                      fmt("%.4f", at(k, hi).accuracy);
        }
    v.require(gb.accuracy >= 0.97, "(a) gradient_boost accuracy " + fmt("%.4f", gb.accuracy) + " < 0.97");
    v.require(gb_top, "(a) gradient_boost " + fmt("%.4f", gb.accuracy) + " beaten by " + leader);

    double lin_min = 1.0, lin_max = 0.0;
    for (auto size : o.sizes) {
        lin_min = std::min(lin_min, at(ModelKind::linear, size).accuracy);
        lin_max = std::max(lin_max, at(ModelKind::linear, size).accuracy);
    }
    const auto lin = at(ModelKind::linear, hi);
    for (auto k : recommender::all_kinds) {
        if (k == ModelKind::linear) continue;
        v.require(lin.accuracy < at(k, hi).accuracy, "(b) linear not the least accurate");
        v.require(lin.mse > at(k, hi).mse, "(c) linear mse not the largest");
    }
    v.require(lin_max - lin_min < 0.10, "(b) linear accuracy spread " + fmt("%.3f", lin_max - lin_min));
    for (auto k : {ModelKind::knn, ModelKind::decision_tree, ModelKind::random_forest, ModelKind::gradient_boost})
        v.require(at(k, hi).accuracy > at(k, lo).accuracy,
                  "(d) " + std::string(recommender::kind_name(k)) + " did not improve with size");
    const auto knn = at(ModelKind::knn, hi);
    v.require(knn.infer_ms > knn.train_ms, "(e) knn inference " + fmt("%.1f", knn.infer_ms) + " ms <= training " +
                                               fmt("%.1f", knn.train_ms) + " ms");

    std::string acc;
    for (auto k : recommender::all_kinds)
        acc += std::string(acc.empty() ? "" : " ") + std::string(recommender::kind_name(k)) + "=" +
               fmt("%.4f", at(k, hi).accuracy);
    v.note("at 10100: " + acc + "; linear mse " + fmt("%.3f", lin.mse) + ", spread " +
           fmt("%.3f", lin_max - lin_min) + "; knn train/infer " + fmt("%.1f", knn.train_ms) + "/" +
           fmt("%.1f ms", knn.infer_ms) + "; " + fmt("%.0f s", ms / 1000));
    return v;
}

// ---- 11, 12 -----------------------------------------------------------

int cli(std::vector<std::string> args, std::string* out = nullptr) {
    std::ostringstream o, e;
    int code = cli::run(args, o, e);
    if (out) *out = o.str();
    if (code != 0) std::cerr << "cli failed: " << e.str();
    return code;
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = test_support::read_file(e.path());
    return files;
}

Verdict determinism() {
    Verdict v;
    const std::string fixture = (test_support::fixtures_dir() / "scenario3_50B.json").string();
    std::map<std::string, std::string> runs[2];
    std::string stdout_of_recommend[2];
    for (int r = 0; r < 2; ++r) {
        test_support::TempDir dir;
        auto p = [&](const std::string& s) { return (dir / s).string(); };
        int rc = 0;
        rc |= cli({"--seed", "9", "--quiet", "lora-sim", "--config", fixture, "--out", p("lora/result.json")});
        rc |= cli({"--seed", "9", "--quiet", "--out", p("data"), "gen-data", "--soils", "400", "--sparsity", "0.4"});
        rc |= cli({"--seed", "9", "--quiet", "--out", p("complete"), "complete", "--sparse", p("data/sparse.csv"),
                   "--truth", p("data/truth.csv")});
        rc |= cli({"--seed", "9", "--quiet", "--out", p("bench"), "bench", "--sizes", "100,600", "--save-models"});
        rc |= cli({"--seed", "9", "--out", p("rec"), "recommend", "--model", p("bench/models/gradient_boost.json"),
                   "--soils", p("data/soils.csv"), "--row", "3"},
                  &stdout_of_recommend[r]);
        rc |= cli({"--seed", "9", "--quiet", "--out", p("demo"), "pipeline-demo", "--readings", "40", "--soils", "400",
                   "--retrain-period", "30"});
        v.require(rc == 0, "a subcommand exited nonzero");
        runs[r] = snapshot(dir.path());
    }
    // wall-clock timings are reported, never compared
    for (auto& run : runs) {
        run.erase("bench/bench.csv");
        run.erase("bench/bench.json");
    }
    std::size_t differing = 0;
    for (const auto& [name, body] : runs[0]) {
        auto it = runs[1].find(name);
        if (it == runs[1].end() || it->second != body) {
            ++differing;
            v.require(false, name + " differs");
        }
    }
    v.require(runs[0].size() == runs[1].size(), "different file sets");
    v.require(stdout_of_recommend[0] == stdout_of_recommend[1], "recommend output differs");
    v.note(std::to_string(runs[0].size()) + " output files compared across 6 subcommands");
    return v;
}

Verdict end_to_end() {
    Verdict v;
    test_support::TempDir dir;
    std::string out;
    const int period = 100;
    int rc = cli({"--seed", "42", "--out", (dir / "demo").string(), "pipeline-demo", "--retrain-period",
                  std::to_string(period)},
                 &out);
    v.require(rc == 0, "pipeline-demo exited " + std::to_string(rc));
    if (rc != 0) return v;
    std::size_t at = 0;
    for (int k = 1; k <= 6; ++k) {
        auto pos = out.find("[" + std::to_string(k) + "/6]");
        v.require(pos != std::string::npos && pos >= at, "stage " + std::to_string(k) + " missing or out of order");
        if (pos != std::string::npos) at = pos;
    }
    auto j = json::parse(test_support::read_file(dir / "demo/pipeline.json"));
    std::size_t cloud = j["cloud_records"], edge = j["edge_non_duplicates"], all = j["edge_records"];
    v.require(cloud == edge, "cloud " + std::to_string(cloud) + " != edge non-duplicates " + std::to_string(edge));
    auto retrains = j["retrain_at"].get<std::vector<std::size_t>>();
    v.require(!retrains.empty() && retrains.front() == period, "first retrain not at recommendation " +
                                                                   std::to_string(period));
    for (std::size_t i = 0; i < retrains.size(); ++i)
        v.require(retrains[i] == (i + 1) * period, "retrain " + std::to_string(i + 1) + " off schedule");
    v.note("edge " + std::to_string(all) + " records (" + std::to_string(edge) + " unique), cloud " +
           std::to_string(cloud) + ", retrains at " + j["retrain_at"].dump());
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    bool large = false;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--paper-scale") == 0)
            large = true;
        else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else {
            std::cerr << "usage: acceptance [--paper-scale] [--only 1,2,...]\n";
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"airtime oracle", airtime},
        {"scenario 1, single device", [] { return all_delivered("scenario1"); }},
        {"scenario 2, two devices with CAD", [] { return all_delivered("scenario2"); }},
        {"scenario 3 qualitative ordering", scenario3},
        {"capture invariant", capture},
        {"codec round trip and corruption", codec},
        {"exactly-once cloud", exactly_once},
        {"cosine and completion properties", cosine_completion},
        {"sparsity trend", [] { return sparsity_trend(2000, true); }},
        {"benchmark trends", benchmark_trends},
        {"determinism", determinism},
        {"end to end", end_to_end},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << ": " << v.detail
                  << std::endl;
    }
    if (large) {
        auto v = sparsity_trend(10626, false);
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS" : "FAIL") << " 9+ sparsity trend at 10626 soils: " << v.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
