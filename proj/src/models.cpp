#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "microfarm/error.hpp"
#include "microfarm/random.hpp"
#include "microfarm/recommender.hpp"
#include "tree_builder.hpp"

namespace microfarm::recommender {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename Fn>
void for_each_plant(std::size_t count, unsigned threads, Fn fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t j = 0; j < count; ++j) fn(j);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, count); ++t)
        pool.emplace_back([&] {
            for (std::size_t j; (j = next++) < count;) fn(j);
        });
    for (auto& th : pool) th.join();
}

// Solves A x = b in place (Gaussian elimination, partial pivoting).
template <std::size_t N>
std::array<double, N> solve(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < N; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0) throw Error(ErrorKind::data, "singular normal equations");
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < N; ++r) {
            double f = a[r][c] / a[c][c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < N; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, N> x{};
    for (std::size_t c = N; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < N; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return x;
}

LinearRegressor fit_linear(const std::vector<FeatureRow>& x, const std::vector<double>& y, double ridge) {
    constexpr std::size_t N = feature_count + 1;
    std::array<std::array<double, N>, N> a{};
    std::array<double, N> b{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::array<double, N> row{};
        row[0] = 1.0;
        for (std::size_t f = 0; f < feature_count; ++f) row[f + 1] = x[i][f];
        for (std::size_t r = 0; r < N; ++r) {
            for (std::size_t c = 0; c < N; ++c) a[r][c] += row[r] * row[c];
            b[r] += row[r] * y[i];
        }
    }
    for (std::size_t f = 1; f < N; ++f) a[f][f] += ridge;  // intercept unpenalized
    auto w = solve(a, b);
    LinearRegressor lr;
    lr.intercept = w[0];
    for (std::size_t f = 0; f < feature_count; ++f) lr.weights[f] = w[f + 1];
    return lr;
}

double knn_predict(const KnnRegressor& m, const FeatureRow& q) {
    const auto& pts = *m.points;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.k), pts.size());
    if (k == 0) return 0.0;
    // (distance, index) kept sorted; scanning in index order means an equal
    // distance never displaces an earlier point
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k + 1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double d = 0.0;
        for (std::size_t f = 0; f < feature_count; ++f) {
            double t = pts[i][f] - q[f];
            d += t * t;
        }
        if (best.size() == k && !(d < best.back().first)) continue;
        auto pos = std::upper_bound(best.begin(), best.end(), d,
                                    [](double v, const auto& e) { return v < e.first; });
        best.insert(pos, {d, i});
        if (best.size() > k) best.pop_back();
    }
    double s = 0.0;
    for (const auto& [d, i] : best) s += m.labels[i];
    return s / static_cast<double>(best.size());
}

}  // namespace

double Tree::predict(const FeatureRow& x) const {
    std::int32_t i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
}

std::size_t Tree::depth() const {
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (nodes[i].feature >= 0) {
            stack.push_back({nodes[i].left, d + 1});
            stack.push_back({nodes[i].right, d + 1});
        }
    }
    return best;
}

std::string_view kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::knn: return "knn";
        case ModelKind::linear: return "linear";
        case ModelKind::decision_tree: return "decision_tree";
        case ModelKind::random_forest: return "random_forest";
        case ModelKind::gradient_boost: return "gradient_boost";
    }
    return "?";
}

std::optional<ModelKind> parse_kind(std::string_view name) {
    for (auto k : all_kinds)
        if (kind_name(k) == name) return k;
    if (name == "dt") return ModelKind::decision_tree;
    if (name == "rf") return ModelKind::random_forest;
    if (name == "gb") return ModelKind::gradient_boost;
    return std::nullopt;
}

void Hyperparameters::validate() const {
    if (knn_k < 1 || !(ridge >= 0.0) || tree_max_depth < 1 || tree_min_leaf < 1 || forest_trees < 1 ||
        forest_max_depth < 1 || forest_min_leaf < 1 || forest_features < 1 ||
        forest_features > static_cast<int>(feature_count) || boost_rounds < 1 ||
        !(boost_learning_rate > 0.0) || boost_depth < 1 || boost_min_leaf < 1)
        throw Error(ErrorKind::config, "invalid model hyperparameters");
}

FeatureScaling FeatureScaling::fit(std::span<const FeatureRow> rows) {
    if (rows.empty()) throw Error(ErrorKind::data, "cannot scale an empty dataset");
    FeatureScaling s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < feature_count; ++f) {
        double sum = 0.0;
        for (const auto& r : rows) sum += r[f];
        double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : rows) ss += (r[f] - mean) * (r[f] - mean);
        double sd = std::sqrt(ss / n);
        if (!(sd > 0.0))
            throw Error(ErrorKind::data, "feature column " + std::to_string(f) + " has zero variance");
        s.mean[f] = mean;
        s.stddev[f] = sd;
    }
    return s;
}

FeatureRow FeatureScaling::apply(const FeatureRow& raw) const {
    FeatureRow z;
    for (std::size_t f = 0; f < feature_count; ++f) z[f] = (raw[f] - mean[f]) / stddev[f];
    return z;
}

Dataset Dataset::from(std::span<const ratings::SoilProfile> soils, const ratings::FullRatingMatrix& labels) {
    if (soils.size() != labels.rows()) throw Error(ErrorKind::dimension, "soils and labels differ in rows");
    Dataset d;
    d.features.reserve(soils.size());
    for (const auto& s : soils) d.features.push_back(s.features());
    d.labels = labels;
    return d;
}

Dataset Dataset::from(const ratings::Dataset& generated) { return from(generated.soils, generated.truth); }

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset d;
    d.labels = ratings::FullRatingMatrix(0, 0);
    for (std::size_t r : rows) {
        d.features.push_back(features[r]);
        d.labels.append_row(labels.row(r), ratings::Provenance::observed);
    }
    if (rows.empty()) d.labels = ratings::FullRatingMatrix(0, labels.cols());
    return d;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    const std::size_t m = data.size();
    if (m < 5) throw Error(ErrorKind::size, "need at least 5 rows to split, got " + std::to_string(m));
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::argument, "test_fraction must be in (0, 1)");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
    n_test = std::clamp<std::size_t>(n_test, 1, m - 1);
    std::span<const std::size_t> all(order);
    return {data.subset(all.subspan(n_test)), data.subset(all.first(n_test))};
}

double regress(const PlantRegressor& r, const FeatureRow& z) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnRegressor>) {
                return knn_predict(m, z);
            } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                double s = m.intercept;
                for (std::size_t f = 0; f < feature_count; ++f) s += m.weights[f] * z[f];
                return s;
            } else if constexpr (std::is_same_v<T, TreeRegressor>) {
                return m.tree.predict(z);
            } else if constexpr (std::is_same_v<T, ForestRegressor>) {
                double s = 0.0;
                for (const auto& t : m.trees) s += t.predict(z);
                return s / static_cast<double>(m.trees.size());
            } else {
                double s = m.init;
                for (const auto& t : m.trees) s += m.learning_rate * t.predict(z);
                return s;
            }
        },
        r);
}

TrainedModel fit(const ModelSpec& spec, const Dataset& train, std::uint64_t seed, const FitOptions& options) {
    if (train.size() == 0) throw Error(ErrorKind::data, "training set is empty");
    spec.params.validate();
    const auto t0 = Clock::now();
    const auto& hp = spec.params;

    TrainedModel model;
    model.spec = spec;
    model.scaling = FeatureScaling::fit(train.features);
    model.meta.seed = seed;
    model.meta.dataset_size = train.size();

    std::vector<FeatureRow> z(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) z[i] = model.scaling.apply(train.features[i]);

    const std::size_t np = train.plant_count();
    auto column = [&](std::size_t j) {
        std::vector<double> y(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) y[i] = train.labels.at(i, j);
        return y;
    };

    std::vector<PlantRegressor> plants(np);
    switch (spec.kind) {
        case ModelKind::knn: {
            auto points = std::make_shared<const std::vector<FeatureRow>>(z);
            for (std::size_t j = 0; j < np; ++j) plants[j] = KnnRegressor{points, column(j), hp.knn_k};
            break;
        }
        case ModelKind::linear:
            for_each_plant(np, options.threads, [&](std::size_t j) { plants[j] = fit_linear(z, column(j), hp.ridge); });
            break;
        case ModelKind::decision_tree: {
            auto cols = detail::ColumnData::from(z);
            detail::TreeParams tp{hp.tree_max_depth, hp.tree_min_leaf, 0};
            for_each_plant(np, options.threads, [&](std::size_t j) {
                auto y = column(j);
                plants[j] = TreeRegressor{detail::build_tree(cols, y, {}, tp, nullptr)};
            });
            break;
        }
        case ModelKind::random_forest: {
            auto cols = detail::ColumnData::from(z);
            detail::TreeParams tp{hp.forest_max_depth, hp.forest_min_leaf, hp.forest_features};
            for_each_plant(np, options.threads, [&](std::size_t j) {
                auto y = column(j);
                ForestRegressor forest;
                std::vector<std::uint32_t> counts(train.size());
                for (int t = 0; t < hp.forest_trees; ++t) {
                    Rng rng(derive_seed(derive_seed(seed, j), static_cast<std::uint64_t>(t)));
                    if (hp.forest_bootstrap) {
                        std::fill(counts.begin(), counts.end(), 0u);
                        for (std::size_t s = 0; s < train.size(); ++s) ++counts[uniform_index(rng, train.size())];
                    } else {
                        std::fill(counts.begin(), counts.end(), 1u);
                    }
                    forest.trees.push_back(detail::build_tree(cols, y, counts, tp, &rng));
                }
                plants[j] = std::move(forest);
            });
            break;
        }
        case ModelKind::gradient_boost: {
            auto cols = detail::ColumnData::from(z);
            detail::TreeParams tp{hp.boost_depth, hp.boost_min_leaf, 0};
            for_each_plant(np, options.threads, [&](std::size_t j) {
                auto y = column(j);
                const double n = static_cast<double>(y.size());
                BoostRegressor gb;
                gb.learning_rate = hp.boost_learning_rate;
                gb.init = std::accumulate(y.begin(), y.end(), 0.0) / n;
                std::vector<double> f(y.size(), gb.init), resid(y.size());
                for (int round = 0; round < hp.boost_rounds; ++round) {
                    for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - f[i];
                    Tree t = detail::build_tree(cols, resid, {}, tp, nullptr);
                    double loss = 0.0;
                    for (std::size_t i = 0; i < y.size(); ++i) {
                        f[i] += gb.learning_rate * t.predict(z[i]);
                        loss += (y[i] - f[i]) * (y[i] - f[i]);
                    }
                    gb.train_loss.push_back(loss / n);
                    gb.trees.push_back(std::move(t));
                }
                plants[j] = std::move(gb);
            });
            break;
        }
    }
    model.plants = std::move(plants);
    model.meta.train_ms = ms_since(t0);
    return model;
}

int round_rating(double score) {
    if (!(score >= ratings::min_rating)) return ratings::min_rating;  // also catches NaN
    if (score >= ratings::max_rating) return ratings::max_rating;
    return static_cast<int>(std::floor(score + 0.5));
}

std::vector<double> predict_scores(const TrainedModel& model, std::span<const FeatureRow> rows) {
    const std::size_t np = model.plant_count();
    std::vector<double> out(rows.size() * np);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        FeatureRow z = model.scaling.apply(rows[i]);
        for (std::size_t j = 0; j < np; ++j) out[i * np + j] = regress(model.plants[j], z);
    }
    return out;
}

Prediction predict(const TrainedModel& model, const ratings::SoilProfile& soil) {
    const auto t0 = Clock::now();
    FeatureRow raw = soil.features();
    Prediction p;
    p.scores = predict_scores(model, std::span<const FeatureRow>(&raw, 1));
    for (double s : p.scores) p.ratings.push_back(round_rating(s));
    p.inference_ms = ms_since(t0);
    return p;
}

Evaluation evaluate(const TrainedModel& model, const Dataset& test) {
    if (test.size() == 0) throw Error(ErrorKind::data, "test set is empty");
    if (test.plant_count() != model.plant_count())
        throw Error(ErrorKind::dimension, "test labels do not match model plant count");
    const auto t0 = Clock::now();
    auto scores = predict_scores(model, test.features);
    Evaluation e;
    e.inference_ms = ms_since(t0);
    const std::size_t np = model.plant_count();
    std::size_t hits = 0;
    double se = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i)
        for (std::size_t j = 0; j < np; ++j) {
            double s = scores[i * np + j];
            int truth = test.labels.at(i, j);
            if (round_rating(s) == truth) ++hits;
            se += (s - truth) * (s - truth);
        }
    const double cells = static_cast<double>(test.size() * np);
    e.accuracy = static_cast<double>(hits) / cells;
    e.mse = se / cells;
    return e;
}

std::vector<RankedPlant> recommend_top_n(const TrainedModel& model, const ratings::SoilProfile& soil,
                                         std::size_t n) {
    if (n < 1 || n > model.plant_count())
        throw Error(ErrorKind::argument,
                    "n must be in 1.." + std::to_string(model.plant_count()) + ", got " + std::to_string(n));
    auto p = predict(model, soil);
    std::vector<RankedPlant> ranked;
    for (std::size_t j = 0; j < p.scores.size(); ++j) ranked.push_back({j, p.scores[j]});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedPlant& a, const RankedPlant& b) { return a.score > b.score; });
    ranked.resize(n);
    return ranked;
}

}  // namespace microfarm::recommender
