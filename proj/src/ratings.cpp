#include "microfarm/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "microfarm/error.hpp"
#include "microfarm/random.hpp"

namespace microfarm::ratings {

SparseRatingMatrix::SparseRatingMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}

std::optional<int> SparseRatingMatrix::at(std::size_t i, std::size_t j) const {
    auto v = cells_[i * cols_ + j];
    if (v == 0) return std::nullopt;
    return v;
}

void SparseRatingMatrix::set(std::size_t i, std::size_t j, int rating) {
    if (rating < min_rating || rating > max_rating)
        throw Error(ErrorKind::validation, "rating must be in 1..5, got " + std::to_string(rating));
    cells_[i * cols_ + j] = static_cast<std::uint8_t>(rating);
}

std::size_t SparseRatingMatrix::missing_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{0}));
}

double SparseRatingMatrix::sparsity() const {
    if (cells_.empty()) return 0.0;
    return static_cast<double>(missing_count()) / static_cast<double>(cells_.size());
}

FullRatingMatrix::FullRatingMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 3), prov_(rows * cols, Provenance::observed) {}

void FullRatingMatrix::set(std::size_t i, std::size_t j, int rating, Provenance p) {
    if (rating < min_rating || rating > max_rating)
        throw Error(ErrorKind::validation, "rating must be in 1..5, got " + std::to_string(rating));
    values_[i * cols_ + j] = static_cast<std::uint8_t>(rating);
    prov_[i * cols_ + j] = p;
}

void FullRatingMatrix::append_row(std::span<const std::uint8_t> ratings, Provenance p) {
    if (rows_ == 0 && cols_ == 0) cols_ = ratings.size();
    if (ratings.size() != cols_) throw Error(ErrorKind::dimension, "row length mismatch");
    for (auto v : ratings)
        if (v < min_rating || v > max_rating) throw Error(ErrorKind::validation, "rating must be in 1..5");
    values_.insert(values_.end(), ratings.begin(), ratings.end());
    prov_.insert(prov_.end(), ratings.size(), p);
    ++rows_;
}

SparseRatingMatrix FullRatingMatrix::to_sparse() const {
    SparseRatingMatrix s(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) s.set(i, j, at(i, j));
    return s;
}

std::array<std::size_t, 5> FullRatingMatrix::histogram() const {
    std::array<std::size_t, 5> h{};
    for (auto v : values_) ++h[v - 1];
    return h;
}

void SoilProfile::validate() const {
    auto check = [](double v, double lo, double hi, const char* field) {
        if (!(v >= lo && v <= hi))
            throw Error(ErrorKind::validation, std::string(field) + " out of range: " + std::to_string(v));
    };
    check(nitrogen_ppm, 0.0, 65535.0, "nitrogen");
    check(phosphorus_ppm, 0.0, 65535.0, "phosphorus");
    check(potassium_ppm, 0.0, 65535.0, "potassium");
    check(temperature_c, -40.0, 85.0, "temperature");
    check(ph, 0.0, 14.0, "ph");
}

std::uint64_t ConfusionMatrix5::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
        for (auto c : row) t += c;
    return t;
}

std::uint64_t ConfusionMatrix5::trace() const {
    std::uint64_t t = 0;
    for (int i = 0; i < 5; ++i) t += counts[i][i];
    return t;
}

double ConfusionMatrix5::accuracy() const {
    auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
}

std::pair<int, int> ConfusionMatrix5::max_off_diagonal_pair() const {
    std::pair<int, int> best{1, 2};
    std::uint64_t best_mass = 0;
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b) {
            std::uint64_t mass = counts[a][b] + counts[b][a];
            if (mass > best_mass) {
                best_mass = mass;
                best = {a + 1, b + 1};
            }
        }
    return best;
}

double cosine_similarity(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                         MissingPolicy policy) {
    if (x.size() != y.size())
        throw Error(ErrorKind::dimension, "rows differ in length: " + std::to_string(x.size()) +
                                              " vs " + std::to_string(y.size()));
    std::uint32_t dot = 0, xx = 0, yy = 0;
    if (policy == MissingPolicy::zero_fill) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += x[i] * y[i];
            xx += x[i] * x[i];
            yy += y[i] * y[i];
        }
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0 || y[i] == 0) continue;
            dot += x[i] * y[i];
            xx += x[i] * x[i];
            yy += y[i] * y[i];
        }
    }
    if (xx == 0 || yy == 0) return 0.0;
    if (xx == yy && dot == xx) return 1.0;  // identical support and values
    return static_cast<double>(dot) / std::sqrt(static_cast<double>(xx) * static_cast<double>(yy));
}

std::vector<double> similarity_matrix(const SparseRatingMatrix& s, MissingPolicy policy) {
    const std::size_t m = s.rows();
    std::vector<double> sim(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double v = cosine_similarity(s.row(i), s.row(j), policy);
            sim[i * m + j] = v;
            sim[j * m + i] = v;
        }
    }
    return sim;
}

FullRatingMatrix complete_matrix(const SparseRatingMatrix& s, const CompletionOptions& options) {
    if (options.k < 1) throw Error(ErrorKind::argument, "k must be >= 1");
    const std::size_t m = s.rows(), n = s.cols();
    FullRatingMatrix full(m, n);

    std::vector<int> fallback(n, 3);
    for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t sum = 0, cnt = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (s.present(i, j)) {
                sum += s.raw(i, j);
                ++cnt;
            }
        if (cnt > 0)
            fallback[j] = std::clamp(static_cast<int>(std::lround(static_cast<double>(sum) / cnt)),
                                     min_rating, max_rating);
    }

    std::vector<double> sim(m);
    std::vector<std::size_t> cand;
    cand.reserve(m);
    auto better = [&](std::size_t a, std::size_t b) {
        return sim[a] > sim[b] || (sim[a] == sim[b] && a < b);
    };

    for (std::size_t i = 0; i < m; ++i) {
        bool any_missing = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (s.present(i, j))
                full.set(i, j, s.raw(i, j), Provenance::observed);
            else
                any_missing = true;
        }
        if (!any_missing) continue;

        for (std::size_t r = 0; r < m; ++r)
            sim[r] = r == i ? 0.0 : cosine_similarity(s.row(i), s.row(r), options.policy);

        for (std::size_t j = 0; j < n; ++j) {
            if (s.present(i, j)) continue;
            cand.clear();
            for (std::size_t r = 0; r < m; ++r)
                if (s.present(r, j) && sim[r] > 0.0) cand.push_back(r);
            int predicted = fallback[j];
            if (!cand.empty()) {
                std::size_t take = std::min(options.k, cand.size());
                std::partial_sort(cand.begin(), cand.begin() + take, cand.end(), better);
                double num = 0.0, den = 0.0;
                for (std::size_t t = 0; t < take; ++t) {
                    num += sim[cand[t]] * s.raw(cand[t], j);
                    den += sim[cand[t]];
                }
                predicted = std::clamp(static_cast<int>(std::lround(num / den)), min_rating, max_rating);
            }
            full.set(i, j, predicted, Provenance::predicted);
        }
    }
    return full;
}

namespace {

constexpr std::array<double, 5> feature_lo = {0.0, 0.0, 0.0, 8.0, 3.5};
constexpr std::array<double, 5> feature_hi = {140.0, 140.0, 140.0, 43.0, 9.9};

// Soils scatter around a segment in normalized feature space: correlated soil
// properties (one "soil gradient") plus independent measurement-scale noise.
constexpr std::array<double, 5> gradient_from = {-0.2197, 0.8860, 0.9246, -0.3277, 0.0734};
constexpr std::array<double, 5> gradient_to = {0.5511, 0.1127, 0.2581, 0.4793, 0.2928};
constexpr double gradient_noise = 0.01;

constexpr double rating_slope = 0.85;

const std::array<PlantProfile, plant_table_size> plants = {{
    {{80.51, 103.37, 93.16, 19.73, 5.93}, {77.493, 81.688, 79.965, 4.950, 1.298}},
    {{101.38, 28.44, 96.98, 31.74, 6.58}, {65.928, 48.109, 50.083, 7.676, 1.224}},
    {{53.45, 51.39, 49.41, 24.35, 6.72}, {80.972, 65.198, 49.583, 7.440, 1.041}},
    {{74.49, 111.62, 94.58, 28.07, 8.58}, {79.130, 68.946, 65.927, 5.595, 1.128}},
    {{46.09, 41.46, 79.45, 15.92, 4.92}, {57.804, 59.260, 52.059, 5.528, 1.117}},
    {{71.25, 67.16, 105.04, 28.21, 6.75}, {43.598, 78.801, 61.645, 8.218, 1.263}},
    {{69.74, 48.79, 28.99, 19.04, 7.44}, {65.001, 55.531, 73.556, 6.090, 1.070}},
    {{44.85, 59.04, 28.31, 32.43, 5.37}, {43.058, 57.632, 43.275, 8.232, 1.180}},
    {{50.48, 101.95, 70.82, 32.79, 7.24}, {47.161, 82.620, 69.626, 8.331, 1.226}},
    {{90.31, 35.69, 73.46, 25.66, 8.13}, {59.985, 63.997, 78.658, 6.724, 1.470}},
    {{58.35, 78.25, 32.98, 23.14, 6.02}, {56.457, 66.792, 70.715, 7.500, 1.268}},
    {{40.62, 96.57, 59.87, 35.55, 7.05}, {56.927, 63.802, 74.140, 6.393, 1.458}},
    {{78.82, 81.59, 84.82, 18.17, 6.47}, {80.186, 48.345, 81.204, 6.341, 1.487}},
    {{48.12, 61.81, 36.12, 35.32, 5.61}, {42.218, 73.625, 76.042, 5.141, 1.171}},
    {{84.43, 53.24, 101.42, 28.91, 5.29}, {47.744, 59.594, 76.241, 6.718, 1.505}},
}};

}  // namespace

const std::array<PlantProfile, plant_table_size>& plant_table() { return plants; }

int true_rating(const SoilProfile& soil, const PlantProfile& plant) {
    auto x = soil.features();
    double d2 = 0.0;
    for (std::size_t f = 0; f < 5; ++f) {
        double z = (x[f] - plant.ideal[f]) / plant.tolerance[f];
        d2 += z * z;
    }
    double score = 5.0 - rating_slope * std::sqrt(d2);
    return std::clamp(static_cast<int>(std::floor(score + 0.5)), min_rating, max_rating);
}

Dataset generate_dataset(std::size_t num_soils, std::size_t num_plants, std::uint64_t seed) {
    if (num_soils < 1) throw Error(ErrorKind::argument, "num_soils must be >= 1");
    if (num_plants < 1 || num_plants > plant_table_size)
        throw Error(ErrorKind::argument, "num_plants must be in 1..15");
    Rng rng(seed);
    Dataset out;
    out.soils.reserve(num_soils);
    out.truth = FullRatingMatrix(num_soils, num_plants);
    for (std::size_t i = 0; i < num_soils; ++i) {
        double t = uniform01(rng);
        std::array<double, 5> v{};
        for (std::size_t f = 0; f < 5; ++f) {
            double u = gradient_from[f] + t * (gradient_to[f] - gradient_from[f]);
            u = std::clamp(u + normal(rng, 0.0, gradient_noise), 0.0, 1.0);
            v[f] = feature_lo[f] + u * (feature_hi[f] - feature_lo[f]);
        }
        // quantize to what a field sensor reports (see telemetry frame)
        SoilProfile soil{std::round(v[0]), std::round(v[1]), std::round(v[2]),
                         std::round(v[3] * 100.0) / 100.0, std::round(v[4] * 100.0) / 100.0};
        for (std::size_t j = 0; j < num_plants; ++j)
            out.truth.set(i, j, true_rating(soil, plants[j]), Provenance::observed);
        out.soils.push_back(soil);
    }
    return out;
}

SparseRatingMatrix mask(const FullRatingMatrix& truth, double sparsity, std::uint64_t seed) {
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw Error(ErrorKind::config, "sparsity must be in [0, 1)");
    const std::size_t m = truth.rows(), n = truth.cols();
    const std::size_t cells = m * n;
    const auto target = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(cells)));
    SparseRatingMatrix s = truth.to_sparse();
    if (target == 0) return s;
    if (target + std::max(m, n) > cells)
        throw Error(ErrorKind::config, "sparsity " + std::to_string(sparsity) + " cannot keep a rating in every row and column of a " +
                                           std::to_string(m) + "x" + std::to_string(n) + " matrix");

    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = cells; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    std::vector<std::size_t> row_left(m, n), col_left(n, m);
    std::size_t removed = 0;
    for (std::size_t idx : order) {
        if (removed == target) break;
        std::size_t i = idx / n, j = idx % n;
        if (row_left[i] <= 1 || col_left[j] <= 1) continue;
        s.clear(i, j);
        --row_left[i];
        --col_left[j];
        ++removed;
    }
    if (removed != target)
        throw Error(ErrorKind::config, "could not mask " + std::to_string(target) +
                                           " cells while keeping every row and column rated");
    return s;
}

ConfusionMatrix5 evaluate_completion(const FullRatingMatrix& truth, const FullRatingMatrix& completed,
                                     const SparseRatingMatrix& masked) {
    if (truth.rows() != completed.rows() || truth.cols() != completed.cols() ||
        truth.rows() != masked.rows() || truth.cols() != masked.cols())
        throw Error(ErrorKind::dimension, "matrix dimensions differ");
    ConfusionMatrix5 cm;
    for (std::size_t i = 0; i < truth.rows(); ++i)
        for (std::size_t j = 0; j < truth.cols(); ++j)
            if (!masked.present(i, j)) ++cm.counts[truth.at(i, j) - 1][completed.at(i, j) - 1];
    return cm;
}

nlohmann::json confusion_report(const ConfusionMatrix5& cm, double sparsity, std::uint64_t seed,
                                std::size_t k) {
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& row : cm.counts) counts.push_back(row);
    return {{"counts", counts}, {"accuracy", cm.accuracy()}, {"sparsity", sparsity},
            {"seed", seed}, {"k", k}};
}

}  // namespace microfarm::ratings
