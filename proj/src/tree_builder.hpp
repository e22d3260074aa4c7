#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "microfarm/random.hpp"
#include "microfarm/recommender.hpp"

namespace microfarm::recommender::detail {

struct TreeParams {
    int max_depth = 12;
    int min_leaf = 2;
    int feature_subsample = 0;  // 0 = consider every feature at each split
};

// Standardized features in column-major form with per-feature row orderings,
// computed once and shared by every tree grown on the same rows.
struct ColumnData {
    std::size_t rows = 0;
    std::array<std::vector<double>, feature_count> col;
    std::array<std::vector<std::uint32_t>, feature_count> sorted;

    static ColumnData from(std::span<const FeatureRow> x);
};

// Grows a variance-reduction regression tree. `counts` gives each row's
// multiplicity (bootstrap); empty means every row once. `rng` is only used
// when feature_subsample > 0.
Tree build_tree(const ColumnData& data, std::span<const double> y,
                std::span<const std::uint32_t> counts, const TreeParams& params, Rng* rng);

}  // namespace microfarm::recommender::detail
