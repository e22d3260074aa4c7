#include "microfarm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "microfarm/channel_sim.hpp"
#include "microfarm/error.hpp"
#include "microfarm/random.hpp"
#include "microfarm/ratings.hpp"
#include "microfarm/recommender.hpp"

namespace microfarm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path out_dir(const Globals& g, const char* fallback) {
    fs::path dir = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error(ErrorKind::io, "cannot write " + path.string());
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int cmd_lora_sim(const Globals& g, const std::string& config_path, bool events, std::ostream& out) {
    auto config = channel::scenario_from_json(read_json(config_path));
    if (g.seed_given) config.seed = g.seed;
    auto result = channel::run_scenario(config);
    fs::path path = g.out.empty() ? fs::path("result.json") : fs::path(g.out);
    write_text(path, result_to_json(result, events).dump(2) + "\n");
    if (!g.quiet) {
        for (const auto& row : channel::summarize(result)) out << row.format() << '\n';
        out << "collisions: " << result.collisions << '\n';
    }
    return 0;
}

int cmd_gen_data(const Globals& g, std::size_t soils, std::size_t plants, double sparsity, std::ostream& out) {
    auto dir = out_dir(g, "data");
    auto data = ratings::generate_dataset(soils, plants, g.seed);
    auto sparse = ratings::mask(data.truth, sparsity, derive_seed(g.seed, 1));
    ratings::write_soils_csv(dir / "soils.csv", data.soils);
    ratings::write_ratings_csv(dir / "truth.csv", data.truth);
    ratings::write_ratings_csv(dir / "sparse.csv", sparse);
    if (!g.quiet) {
        auto h = data.truth.histogram();
        const double cells = static_cast<double>(soils * plants);
        out << "soils " << soils << ", plants " << plants << ", sparsity " << fixed(sparse.sparsity(), 4) << '\n';
        out << "rating histogram:";
        for (int r = 0; r < 5; ++r) out << ' ' << (r + 1) << ':' << fixed(h[r] / cells, 3);
        out << '\n' << "wrote " << (dir / "soils.csv").string() << ", truth.csv, sparse.csv\n";
    }
    return 0;
}

int cmd_complete(const Globals& g, const std::string& sparse_path, std::size_t k, const std::string& truth_path,
                 const std::string& policy, std::ostream& out) {
    ratings::CompletionOptions opt;
    opt.k = k;
    if (policy == "co-rated")
        opt.policy = ratings::MissingPolicy::co_rated;
    else if (policy == "zero-fill")
        opt.policy = ratings::MissingPolicy::zero_fill;
    else
        throw Error(ErrorKind::argument, "unknown --policy '" + policy + "' (valid: co-rated, zero-fill)");
    auto sparse = ratings::read_ratings_csv(sparse_path);
    auto dir = out_dir(g, ".");
    auto full = ratings::complete_matrix(sparse, opt);
    ratings::write_ratings_csv(dir / "full.csv", full);
    if (!g.quiet)
        out << "completed " << sparse.rows() << "x" << sparse.cols() << " (sparsity " << fixed(sparse.sparsity(), 4)
            << ", k " << k << ") -> " << (dir / "full.csv").string() << '\n';
    if (!truth_path.empty()) {
        auto truth_sparse = ratings::read_ratings_csv(truth_path);
        if (truth_sparse.missing_count() != 0) throw Error(ErrorKind::data, "truth matrix has missing cells");
        ratings::FullRatingMatrix truth(truth_sparse.rows(), truth_sparse.cols());
        for (std::size_t i = 0; i < truth.rows(); ++i)
            for (std::size_t j = 0; j < truth.cols(); ++j) truth.set(i, j, truth_sparse.raw(i, j));
        auto cm = ratings::evaluate_completion(truth, full, sparse);
        write_text(dir / "report.json", ratings::confusion_report(cm, sparse.sparsity(), g.seed, k).dump(2) + "\n");
        if (!g.quiet) {
            out << "accuracy " << fixed(cm.accuracy(), 4) << " over " << cm.total() << " predicted cells\n";
            out << "confusion (rows true 1..5, cols predicted 1..5):\n";
            for (const auto& row : cm.counts) {
                for (auto c : row) out << ' ' << c;
                out << '\n';
            }
        }
    }
    return 0;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, const char* what, Parse parse) {
    std::vector<T> items;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        items.push_back(parse(tok));
    }
    if (items.empty()) throw Error(ErrorKind::argument, std::string("empty ") + what + " list");
    return items;
}

int cmd_bench(const Globals& g, const std::string& sizes, const std::string& kinds, unsigned threads,
              bool timing_strict, bool save_models, std::ostream& out) {
    recommender::BenchOptions opt;
    opt.seed = g.seed;
    opt.threads = threads;
    opt.timing_strict = timing_strict;
    if (!sizes.empty())
        opt.sizes = parse_list<std::size_t>(sizes, "size", [](const std::string& t) {
            try {
                std::size_t used = 0;
                long long v = std::stoll(t, &used);
                if (used != t.size() || v < 5) throw std::invalid_argument(t);
                return static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                throw Error(ErrorKind::argument, "bad size '" + t + "' (integers >= 5)");
            }
        });
    if (!kinds.empty())
        opt.kinds = parse_list<recommender::ModelKind>(kinds, "kind", [](const std::string& t) {
            auto k = recommender::parse_kind(t);
            if (!k) {
                std::string valid;
                for (auto v : recommender::all_kinds) valid += (valid.empty() ? "" : ", ") + std::string(kind_name(v));
                throw Error(ErrorKind::argument, "unknown kind '" + t + "' (valid: " + valid + ")");
            }
            return *k;
        });
    auto dir = out_dir(g, "bench");
    const std::size_t largest = *std::max_element(opt.sizes.begin(), opt.sizes.end());
    opt.on_row = [&](const recommender::BenchRow& r, const recommender::TrainedModel& model) {
        if (!g.quiet)
            out << kind_name(r.kind) << " size " << r.size << ": accuracy " << fixed(r.accuracy, 4) << ", mse "
                << fixed(r.mse, 4) << ", train " << fixed(r.train_ms, 1) << " ms, infer " << fixed(r.infer_ms, 1)
                << " ms" << std::endl;
        if (save_models && r.size == largest)
            recommender::save_model(dir / "models" / (std::string(kind_name(r.kind)) + ".json"), model);
    };
    auto report = recommender::benchmark(opt);
    write_text(dir / "bench.csv", report.to_csv());
    write_text(dir / "bench.json", report.to_json().dump(2) + "\n");
    write_text(dir / "learning_curve.csv", report.learning_curve_csv());
    return 0;
}

ratings::SoilProfile parse_soil(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string tok;
    static const char* names[] = {"nitrogen", "phosphorus", "potassium", "temperature", "ph"};
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            double x = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            v.push_back(x);
        } catch (const std::exception&) {
            const char* field = v.size() < 5 ? names[v.size()] : "soil";
            throw Error(ErrorKind::validation, std::string(field) + ": not a number '" + tok + "'");
        }
    }
    if (v.size() != 5) throw Error(ErrorKind::validation, "soil needs 5 values: n,p,k,temp,ph");
    ratings::SoilProfile s{v[0], v[1], v[2], v[3], v[4]};
    s.validate();
    return s;
}

int cmd_recommend(const Globals& g, const std::string& model_path, const std::string& soil_text,
                  const std::string& soils_path, long long row, std::size_t n, const std::string& log_path,
                  std::ostream& out) {
    auto model = recommender::load_model(model_path);
    ratings::SoilProfile soil;
    if (!soil_text.empty() == !soils_path.empty())
        throw Error(ErrorKind::argument, "give exactly one of --soil or --soils");
    if (!soil_text.empty()) {
        soil = parse_soil(soil_text);
    } else {
        auto soils = ratings::read_soils_csv(soils_path);
        if (row < 0 || static_cast<std::size_t>(row) >= soils.size())
            throw Error(ErrorKind::argument, "--row out of range (0.." + std::to_string(soils.size()) + ")");
        soil = soils[static_cast<std::size_t>(row)];
    }
    auto ranked = recommender::recommend_top_n(model, soil, n);
    auto pred = recommender::predict(model, soil);

    json ranking = json::array();
    for (const auto& r : ranked)
        ranking.push_back({{"plant", r.plant}, {"name", "plant_" + std::to_string(r.plant)}, {"score", r.score}});
    json entry = {{"soil",
                   {{"n_ppm", soil.nitrogen_ppm},
                    {"p_ppm", soil.phosphorus_ppm},
                    {"k_ppm", soil.potassium_ppm},
                    {"temp_c", soil.temperature_c},
                    {"ph", soil.ph}}},
                  {"model", kind_name(model.spec.kind)},
                  {"n", n},
                  {"ranking", ranking},
                  {"ratings", pred.ratings}};

    fs::path log = log_path.empty() ? out_dir(g, ".") / "recommendations.ndjson" : fs::path(log_path);
    if (log.has_parent_path()) fs::create_directories(log.parent_path());
    std::ofstream f(log, std::ios::binary | std::ios::app);
    f << entry.dump() << '\n';
    if (!f) throw Error(ErrorKind::io, "cannot append to " + log.string());

    if (!g.quiet) {
        for (std::size_t i = 0; i < ranked.size(); ++i)
            out << (i + 1) << ". plant_" << ranked[i].plant << "  score " << fixed(ranked[i].score, 3) << "  rating "
                << pred.ratings[ranked[i].plant] << '\n';
    }
    out << entry.dump() << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Smart-microfarming toolkit: LoRa link simulation, telemetry, rating completion and plant "
                 "recommendation."};
    app.name("microfarm");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "master random seed (default 42)");
    app.add_option("--out", g.out, "output file (lora-sim) or directory");
    app.add_flag("--quiet", g.quiet, "suppress the human-readable report");

    auto* lora = app.add_subcommand("lora-sim", "simulate a LoRa scenario");
    std::string config_path;
    bool no_events = false;
    lora->add_option("--config", config_path, "scenario JSON")->required();
    lora->add_flag("--no-events", no_events, "omit the event log from result.json");

    auto* gen = app.add_subcommand("gen-data", "generate soils and plant ratings");
    std::size_t soils = 10626, plants = 15;
    double sparsity = 0.4;
    gen->add_option("--soils", soils, "number of soils");
    gen->add_option("--plants", plants, "number of plants (max 15)");
    gen->add_option("--sparsity", sparsity, "fraction of ratings to remove");

    auto* complete = app.add_subcommand("complete", "fill a sparse rating matrix");
    std::string sparse_path, truth_path, policy = "co-rated";
    std::size_t k = 20;
    complete->add_option("--sparse", sparse_path, "sparse ratings CSV")->required();
    complete->add_option("--k", k, "neighbour count");
    complete->add_option("--truth", truth_path, "ground-truth ratings CSV for a confusion report");
    complete->add_option("--policy", policy, "missing-value handling: co-rated | zero-fill");

    auto* bench = app.add_subcommand("bench", "benchmark the five model kinds");
    std::string sizes, kinds;
    unsigned threads = 1;
    bool timing_strict = false, save_models = false;
    bench->add_option("--sizes", sizes, "comma-separated dataset sizes (default 100..10100 step 1000)");
    bench->add_option("--kinds", kinds, "comma-separated kinds (default all)");
    bench->add_option("--threads", threads, "worker threads per fit");
    bench->add_flag("--timing-strict", timing_strict, "single-threaded fits for clean timings");
    bench->add_flag("--save-models", save_models, "save each model trained at the largest size");

    auto* rec = app.add_subcommand("recommend", "rank plants for a soil");
    std::string model_path, soil_text, soils_path, log_path;
    long long row = 0;
    std::size_t n = 3;
    rec->add_option("--model", model_path, "model JSON")->required();
    rec->add_option("--soil", soil_text, "n,p,k,temp,ph");
    rec->add_option("--soils", soils_path, "soils CSV (with --row)");
    rec->add_option("--row", row, "row of --soils");
    rec->add_option("--n", n, "number of plants to list");
    rec->add_option("--log", log_path, "recommendations log (default <out>/recommendations.ndjson)");

    auto* demo = app.add_subcommand("pipeline-demo", "run the collection and recommendation workflows end to end");
    PipelineOptions popt;
    demo->add_option("--devices", popt.devices, "field devices");
    demo->add_option("--readings", popt.readings, "readings per device");
    demo->add_option("--soils", popt.soils, "soils in the gardener rating set");
    demo->add_option("--sparsity", popt.sparsity, "sparsity of the gardener ratings");
    demo->add_option("--retrain-period", popt.retrain_period, "recommendations between retrains (T)");
    demo->add_option("--n", popt.top_n, "plants per recommendation");
    demo->add_option("--kind", popt.kind, "model kind");

    std::vector<std::string> argv_store{"microfarm"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error[argument]: " << msg << '\n';
        return 2;
    }
    g.seed_given = app.get_option("--seed")->count() > 0;

    try {
        if (lora->parsed()) return cmd_lora_sim(g, config_path, !no_events, out);
        if (gen->parsed()) return cmd_gen_data(g, soils, plants, sparsity, out);
        if (complete->parsed()) return cmd_complete(g, sparse_path, k, truth_path, policy, out);
        if (bench->parsed()) return cmd_bench(g, sizes, kinds, threads, timing_strict, save_models, out);
        if (rec->parsed()) return cmd_recommend(g, model_path, soil_text, soils_path, row, n, log_path, out);
        if (demo->parsed()) return cmd_pipeline_demo(g, popt, out);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error[" << error_kind_name(e.kind()) << "]: " << msg << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error[internal]: " << msg << '\n';
        return 1;
    }
    return 2;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace microfarm::cli
