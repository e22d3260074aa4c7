#include <cstdio>
#include <sstream>

#include "microfarm/error.hpp"
#include "microfarm/random.hpp"
#include "microfarm/recommender.hpp"

namespace microfarm::recommender {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::vector<std::size_t> default_bench_sizes() {
    std::vector<std::size_t> s;
    for (std::size_t n = 100; n <= 10100; n += 1000) s.push_back(n);
    return s;
}

const BenchRow* BenchReport::find(ModelKind kind, std::size_t size) const {
    for (const auto& r : rows)
        if (r.kind == kind && r.size == size) return &r;
    return nullptr;
}

std::string BenchReport::to_csv() const {
    std::ostringstream out;
    out << "kind,size,accuracy,mse,train_ms,infer_ms\n";
    for (const auto& r : rows)
        out << kind_name(r.kind) << ',' << r.size << ',' << fixed(r.accuracy, 6) << ',' << fixed(r.mse, 6) << ','
            << fixed(r.train_ms, 3) << ',' << fixed(r.infer_ms, 3) << '\n';
    return out.str();
}

std::string BenchReport::learning_curve_csv() const {
    std::ostringstream out;
    out << "kind,size,accuracy,mse\n";
    for (const auto& r : rows)
        out << kind_name(r.kind) << ',' << r.size << ',' << fixed(r.accuracy, 6) << ',' << fixed(r.mse, 6) << '\n';
    return out.str();
}

nlohmann::json BenchReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"kind", kind_name(r.kind)},
                       {"size", r.size},
                       {"accuracy", r.accuracy},
                       {"mse", r.mse},
                       {"train_ms", r.train_ms},
                       {"infer_ms", r.infer_ms}});
    return {{"rows", arr}};
}

BenchReport benchmark(const BenchOptions& options) {
    if (options.kinds.empty()) throw Error(ErrorKind::argument, "no model kinds requested");
    if (options.sizes.empty()) throw Error(ErrorKind::argument, "no dataset sizes requested");
    BenchReport report;
    // timing-strict pins every fit to one thread so cells never share the CPU
    FitOptions fit_options{options.timing_strict ? 1u : options.threads};
    for (std::size_t size : options.sizes) {
        // one master dataset seed: smaller sizes are prefixes of larger ones
        auto generated = ratings::generate_dataset(size, ratings::plant_table_size, options.seed);
        auto data = Dataset::from(generated);
        auto [train, test] = split(data, 0.2, derive_seed(options.seed, size));
        for (ModelKind kind : options.kinds) {
            ModelSpec spec{kind, options.params};
            auto model = fit(spec, train, derive_seed(options.seed, 0x100 + static_cast<std::uint64_t>(kind)),
                             fit_options);
            auto eval = evaluate(model, test);
            BenchRow row{kind, size, eval.accuracy, eval.mse, model.meta.train_ms, eval.inference_ms};
            report.rows.push_back(row);
            if (options.on_row) options.on_row(row, model);
        }
    }
    return report;
}

}  // namespace microfarm::recommender
