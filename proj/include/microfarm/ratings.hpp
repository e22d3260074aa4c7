#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace microfarm::ratings {

constexpr int min_rating = 1;
constexpr int max_rating = 5;

// m soils x n plants; 0 marks a missing cell.
class SparseRatingMatrix {
public:
    SparseRatingMatrix() = default;
    SparseRatingMatrix(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    bool present(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j] != 0; }
    std::optional<int> at(std::size_t i, std::size_t j) const;
    std::uint8_t raw(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, int rating);
    void clear(std::size_t i, std::size_t j) { cells_[i * cols_ + j] = 0; }

    std::span<const std::uint8_t> row(std::size_t i) const {
        return {cells_.data() + i * cols_, cols_};
    }

    std::size_t missing_count() const;
    double sparsity() const;

    bool operator==(const SparseRatingMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> cells_;
};

enum class Provenance : std::uint8_t { observed, predicted };

class FullRatingMatrix {
public:
    FullRatingMatrix() = default;
    FullRatingMatrix(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    int at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    Provenance provenance(std::size_t i, std::size_t j) const { return prov_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, int rating, Provenance p = Provenance::observed);

    std::span<const std::uint8_t> row(std::size_t i) const {
        return {values_.data() + i * cols_, cols_};
    }
    void append_row(std::span<const std::uint8_t> ratings, Provenance p);

    SparseRatingMatrix to_sparse() const;
    std::array<std::size_t, 5> histogram() const;

    bool same_values(const FullRatingMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && values_ == o.values_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> values_;
    std::vector<Provenance> prov_;
};

struct SoilProfile {
    double nitrogen_ppm = 0.0;
    double phosphorus_ppm = 0.0;
    double potassium_ppm = 0.0;
    double temperature_c = 0.0;
    double ph = 7.0;

    void validate() const;
    std::array<double, 5> features() const {
        return {nitrogen_ppm, phosphorus_ppm, potassium_ppm, temperature_c, ph};
    }
};

struct ConfusionMatrix5 {
    std::array<std::array<std::uint64_t, 5>, 5> counts{};  // [true-1][pred-1]

    std::uint64_t total() const;
    std::uint64_t trace() const;
    double accuracy() const;
    // Unordered class pair {a,b}, a<b (1-based), with the largest a<->b mass.
    std::pair<int, int> max_off_diagonal_pair() const;
};

// How missing cells enter the cosine. co_rated restricts dot product and
// norms to items both rows rated; zero_fill treats missing as 0.
enum class MissingPolicy { co_rated, zero_fill };

double cosine_similarity(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                         MissingPolicy policy = MissingPolicy::co_rated);

// Dense m x m row-major matrix.
std::vector<double> similarity_matrix(const SparseRatingMatrix& s,
                                      MissingPolicy policy = MissingPolicy::co_rated);

struct CompletionOptions {
    std::size_t k = 20;
    MissingPolicy policy = MissingPolicy::co_rated;
};

FullRatingMatrix complete_matrix(const SparseRatingMatrix& s, const CompletionOptions& options = {});

struct Dataset {
    std::vector<SoilProfile> soils;
    FullRatingMatrix truth;
};

constexpr std::size_t plant_table_size = 15;

struct PlantProfile {
    std::array<double, 5> ideal;      // n, p, k, temp, ph
    std::array<double, 5> tolerance;
};

const std::array<PlantProfile, plant_table_size>& plant_table();

// Rating of a soil for one plant under the generator's ground-truth rule.
int true_rating(const SoilProfile& soil, const PlantProfile& plant);

Dataset generate_dataset(std::size_t num_soils, std::size_t num_plants, std::uint64_t seed);

SparseRatingMatrix mask(const FullRatingMatrix& truth, double sparsity, std::uint64_t seed);

ConfusionMatrix5 evaluate_completion(const FullRatingMatrix& truth,
                                     const FullRatingMatrix& completed,
                                     const SparseRatingMatrix& masked);

nlohmann::json confusion_report(const ConfusionMatrix5& cm, double sparsity, std::uint64_t seed,
                                std::size_t k);

// CSV I/O. Ratings: header plant_0..plant_{n-1}, empty field = missing.
void write_ratings_csv(const std::filesystem::path& path, const SparseRatingMatrix& s);
void write_ratings_csv(const std::filesystem::path& path, const FullRatingMatrix& f);
SparseRatingMatrix read_ratings_csv(const std::filesystem::path& path);
void write_soils_csv(const std::filesystem::path& path, std::span<const SoilProfile> soils);
std::vector<SoilProfile> read_soils_csv(const std::filesystem::path& path);

}  // namespace microfarm::ratings
