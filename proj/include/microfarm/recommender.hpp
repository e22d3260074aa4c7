#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "microfarm/ratings.hpp"

namespace microfarm::recommender {

constexpr std::size_t feature_count = 5;
using FeatureRow = std::array<double, feature_count>;

struct FeatureScaling {
    FeatureRow mean{};
    FeatureRow stddev{};

    // Throws a data error on a zero-variance column.
    static FeatureScaling fit(std::span<const FeatureRow> rows);
    FeatureRow apply(const FeatureRow& raw) const;
};

struct Dataset {
    std::vector<FeatureRow> features;  // n, p, k, temp, ph
    ratings::FullRatingMatrix labels;

    static Dataset from(const ratings::Dataset& generated);
    static Dataset from(std::span<const ratings::SoilProfile> soils,
                        const ratings::FullRatingMatrix& labels);

    std::size_t size() const { return features.size(); }
    std::size_t plant_count() const { return labels.cols(); }
    Dataset subset(std::span<const std::size_t> rows) const;
};

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

enum class ModelKind { knn, linear, decision_tree, random_forest, gradient_boost };

constexpr std::array<ModelKind, 5> all_kinds = {ModelKind::knn, ModelKind::linear,
                                                ModelKind::decision_tree,
                                                ModelKind::random_forest,
                                                ModelKind::gradient_boost};

std::string_view kind_name(ModelKind kind);
std::optional<ModelKind> parse_kind(std::string_view name);

struct Hyperparameters {
    int knn_k = 5;
    double ridge = 1e-6;
    int tree_max_depth = 12;
    int tree_min_leaf = 2;
    int forest_trees = 100;
    int forest_max_depth = 12;
    int forest_min_leaf = 2;
    int forest_features = 2;
    bool forest_bootstrap = true;
    int boost_rounds = 100;
    double boost_learning_rate = 0.1;
    int boost_depth = 3;
    int boost_min_leaf = 1;

    void validate() const;
};

struct ModelSpec {
    ModelKind kind = ModelKind::gradient_boost;
    Hyperparameters params;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;
    std::int32_t right = -1;
    double threshold = 0.0;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const FeatureRow& x) const;
    std::size_t depth() const;
};

struct KnnRegressor {
    std::shared_ptr<const std::vector<FeatureRow>> points;  // standardized
    std::vector<double> labels;
    int k = 5;
};

struct LinearRegressor {
    double intercept = 0.0;
    FeatureRow weights{};
};

struct TreeRegressor {
    Tree tree;
};

struct ForestRegressor {
    std::vector<Tree> trees;
};

struct BoostRegressor {
    double init = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    std::vector<double> train_loss;  // MSE after each round; not persisted
};

using PlantRegressor =
    std::variant<KnnRegressor, LinearRegressor, TreeRegressor, ForestRegressor, BoostRegressor>;

double regress(const PlantRegressor& r, const FeatureRow& standardized);

struct TrainingMeta {
    std::uint64_t seed = 0;
    std::size_t dataset_size = 0;
    double train_ms = 0.0;
};

struct TrainedModel {
    ModelSpec spec;
    FeatureScaling scaling;
    std::vector<PlantRegressor> plants;
    TrainingMeta meta;

    std::size_t plant_count() const { return plants.size(); }
};

struct FitOptions {
    unsigned threads = 1;
};

TrainedModel fit(const ModelSpec& spec, const Dataset& train, std::uint64_t seed,
                 const FitOptions& options = {});

struct Prediction {
    std::vector<double> scores;
    std::vector<int> ratings;
    double inference_ms = 0.0;
};

int round_rating(double score);

Prediction predict(const TrainedModel& model, const ratings::SoilProfile& soil);

// Scores for many raw feature rows, row-major rows x plants.
std::vector<double> predict_scores(const TrainedModel& model, std::span<const FeatureRow> rows);

struct Evaluation {
    double accuracy = 0.0;
    double mse = 0.0;
    double inference_ms = 0.0;
};

Evaluation evaluate(const TrainedModel& model, const Dataset& test);

struct RankedPlant {
    std::size_t plant;
    double score;
};

std::vector<RankedPlant> recommend_top_n(const TrainedModel& model,
                                         const ratings::SoilProfile& soil, std::size_t n);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

struct BenchRow {
    ModelKind kind;
    std::size_t size;
    double accuracy;
    double mse;
    double train_ms;
    double infer_ms;
};

struct BenchReport {
    std::vector<BenchRow> rows;

    const BenchRow* find(ModelKind kind, std::size_t size) const;
    std::string to_csv() const;          // kind,size,accuracy,mse,train_ms,infer_ms
    std::string learning_curve_csv() const;  // timing-free columns only
    nlohmann::json to_json() const;
};

std::vector<std::size_t> default_bench_sizes();

struct BenchOptions {
    std::vector<ModelKind> kinds{all_kinds.begin(), all_kinds.end()};
    std::vector<std::size_t> sizes = default_bench_sizes();
    std::uint64_t seed = 42;
    unsigned threads = 1;
    bool timing_strict = false;
    Hyperparameters params;
    // called after each cell, with the model that produced it
    std::function<void(const BenchRow&, const TrainedModel&)> on_row;
};

BenchReport benchmark(const BenchOptions& options);

}  // namespace microfarm::recommender
