#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "microfarm/cli.hpp"
#include "support.hpp"

using test_support::read_file;
using test_support::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = microfarm::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return (test_support::fixtures_dir() / name).string(); }

}  // namespace

TEST_CASE("help exits cleanly") {
    auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("lora-sim") != std::string::npos);
    CHECK(r.out.find("pipeline-demo") != std::string::npos);
}

TEST_CASE("parse errors use the single-line prefix") {
    auto r = run({"no-such-command"});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error[", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(run({}).code != 0);
}

TEST_CASE("lora-sim on scenario 1 prints a full-delivery row") {
    TempDir dir;
    auto path = (dir / "result.json").string();
    auto r = run({"lora-sim", "--config", fixture("scenario1.json"), "--out", path});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("100 %, 3 B, -75 dBm, 11 dB") != std::string::npos);
    auto j = nlohmann::json::parse(read_file(path));
    CHECK(j["devices"][0]["prr"] == 1.0);
}

TEST_CASE("lora-sim seed changes the event log but not scenario 1 delivery") {
    TempDir dir;
    auto a = (dir / "a.json").string(), b = (dir / "b.json").string();
    REQUIRE(run({"--seed", "1", "lora-sim", "--config", fixture("scenario1_50B.json"), "--out", a}).code == 0);
    REQUIRE(run({"--seed", "2", "lora-sim", "--config", fixture("scenario1_50B.json"), "--out", b}).code == 0);
    auto ja = nlohmann::json::parse(read_file(a)), jb = nlohmann::json::parse(read_file(b));
    CHECK(ja["events"] != jb["events"]);
    CHECK(ja["devices"][0]["prr"] == 1.0);
    CHECK(jb["devices"][0]["prr"] == 1.0);
}

TEST_CASE("lora-sim scenario 3 at 250 B loses at least half for both devices") {
    TempDir dir;
    auto path = (dir / "r.json").string();
    REQUIRE(run({"lora-sim", "--config", fixture("scenario3_250B.json"), "--out", path, "--no-events"}).code == 0);
    auto j = nlohmann::json::parse(read_file(path));
    CHECK_FALSE(j.contains("events"));
    for (const auto& d : j["devices"]) CHECK(d["prr"].get<double>() <= 0.5);
}

TEST_CASE("lora-sim with a bad config fails") {
    TempDir dir;
    {
        std::ofstream(dir / "bad.json") << R"({"devices": []})";
    }
    auto r = run({"lora-sim", "--config", (dir / "bad.json").string(), "--out", (dir / "r.json").string()});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error[config]", 0) == 0);
    auto missing = run({"lora-sim", "--config", (dir / "nope.json").string()});
    CHECK(missing.code != 0);
}

TEST_CASE("gen-data writes three csvs with 15 plant columns") {
    TempDir dir;
    auto out = (dir / "data").string();
    REQUIRE(run({"--quiet", "--out", out, "gen-data", "--soils", "200"}).code == 0);
    auto truth = read_file(dir / "data/truth.csv");
    CHECK(truth.substr(0, truth.find('\n')).find("plant_14") != std::string::npos);
    CHECK(truth.substr(0, truth.find('\n')).find("plant_15") == std::string::npos);
    CHECK(std::filesystem::exists(dir / "data/soils.csv"));
    CHECK(read_file(dir / "data/sparse.csv") != truth);

    REQUIRE(run({"--quiet", "--out", (dir / "dense").string(), "gen-data", "--soils", "200", "--sparsity", "0"})
                .code == 0);
    CHECK(read_file(dir / "dense/sparse.csv") == read_file(dir / "dense/truth.csv"));
}

TEST_CASE("gen-data with unsatisfiable sparsity fails") {
    TempDir dir;
    auto r = run({"--out", dir.path().string(), "gen-data", "--soils", "5", "--plants", "3", "--sparsity", "0.95"});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error[config]", 0) == 0);
}

TEST_CASE("complete round trip and report") {
    TempDir dir;
    auto data = (dir / "data").string();
    REQUIRE(run({"--quiet", "--out", data, "gen-data", "--soils", "300", "--sparsity", "0"}).code == 0);
    REQUIRE(run({"--quiet", "--out", (dir / "c0").string(), "complete", "--sparse", data + "/sparse.csv"}).code == 0);
    CHECK(read_file(dir / "c0/full.csv") == read_file(dir / "data/truth.csv"));

    double acc[2];
    const char* levels[] = {"0.1", "0.7"};
    for (int i = 0; i < 2; ++i) {
        auto d = (dir / ("d" + std::to_string(i))).string();
        auto c = (dir / ("c" + std::to_string(i + 1))).string();
        REQUIRE(run({"--quiet", "--out", d, "gen-data", "--soils", "300", "--sparsity", levels[i]}).code == 0);
        REQUIRE(run({"--quiet", "--out", c, "complete", "--sparse", d + "/sparse.csv", "--truth", d + "/truth.csv",
                     "--k", "7"})
                    .code == 0);
        auto rep = nlohmann::json::parse(read_file(c + "/report.json"));
        CHECK(rep["k"] == 7);
        acc[i] = rep["accuracy"];
    }
    CHECK(acc[0] > acc[1]);
}

TEST_CASE("complete rejects malformed csv") {
    TempDir dir;
    {
        std::ofstream(dir / "bad.csv") << "plant_0\nx\n";
    }
    auto r = run({"--out", dir.path().string(), "complete", "--sparse", (dir / "bad.csv").string()});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error[", 0) == 0);
}

TEST_CASE("bench with an unknown kind lists the valid ones") {
    TempDir dir;
    auto r = run({"--out", dir.path().string(), "bench", "--kinds", "svm"});
    CHECK(r.code != 0);
    CHECK(r.err.find("gradient_boost") != std::string::npos);
    CHECK(r.err.find("knn") != std::string::npos);
}

TEST_CASE("bench, recommend and the recommendations log") {
    TempDir dir;
    auto out = (dir / "b").string();
    REQUIRE(run({"--quiet", "--out", out, "bench", "--sizes", "100,200", "--kinds", "knn,linear",
                 "--save-models"})
                .code == 0);
    CHECK(std::filesystem::exists(dir / "b/bench.csv"));
    CHECK(std::filesystem::exists(dir / "b/bench.json"));
    CHECK(std::filesystem::exists(dir / "b/learning_curve.csv"));
    auto model = (dir / "b/models/knn.json").string();
    REQUIRE(std::filesystem::exists(model));

    auto a = run({"--out", out, "recommend", "--model", model, "--soil", "60,40,50,24,6.4"});
    REQUIRE(a.code == 0);
    auto b = run({"--out", out, "recommend", "--model", model, "--soil", "60,40,50,24,6.4"});
    CHECK(a.out == b.out);
    auto last = a.out.substr(a.out.find("{\""));
    auto entry = nlohmann::json::parse(last);
    CHECK(entry["ranking"].size() == 3);
    auto log = read_file(dir / "b/recommendations.ndjson");
    CHECK(std::count(log.begin(), log.end(), '\n') == 2);

    auto too_many = run({"--out", out, "recommend", "--model", model, "--soil", "60,40,50,24,6.4", "--n", "16"});
    CHECK(too_many.code != 0);
    auto bad_ph = run({"--out", out, "recommend", "--model", model, "--soil", "60,40,50,24,15"});
    CHECK(bad_ph.code != 0);
    CHECK(bad_ph.err.rfind("error[validation]", 0) == 0);
    CHECK(bad_ph.err.find("ph") != std::string::npos);
}

TEST_CASE("pipeline-demo runs all six stages") {
    TempDir dir;
    auto out = (dir / "p").string();
    auto r = run({"--out", out, "pipeline-demo", "--readings", "30", "--soils", "300", "--retrain-period", "25",
                  "--kind", "linear"});
    REQUIRE(r.code == 0);
    std::size_t at = 0;
    for (int k = 1; k <= 6; ++k) {
        auto pos = r.out.find("[" + std::to_string(k) + "/6]");
        REQUIRE(pos != std::string::npos);
        CHECK(pos >= at);
        at = pos;
    }
    auto j = nlohmann::json::parse(read_file(dir / "p/pipeline.json"));
    CHECK(j["cloud_records"] == j["edge_non_duplicates"]);
    CHECK(j["edge_records"].get<int>() > j["edge_non_duplicates"].get<int>());
    REQUIRE(j["retrain_at"].size() >= 1);
    CHECK(j["retrain_at"][0] == 25);
    CHECK(read_file(dir / "p/transcript.txt").find("[6/6]") != std::string::npos);
}
