#include "tree_builder.hpp"

#include <algorithm>
#include <numeric>

namespace microfarm::recommender::detail {

namespace {

using Lists = std::array<std::vector<std::uint32_t>, feature_count>;

struct Builder {
    const ColumnData& data;
    std::span<const double> y;
    const TreeParams& params;
    Rng* rng;
    Tree tree;
    std::vector<std::uint8_t> goes_left;
    std::vector<double> centered;

    std::int32_t grow(Lists& lists, int depth) {
        const auto& any = lists[0];
        const std::size_t n = any.size();
        double sum = 0.0;
        for (auto r : any) sum += y[r];
        const double mean = sum / static_cast<double>(n);

        auto idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, -1, -1, 0.0, mean});

        if (depth >= params.max_depth || n < 2 * static_cast<std::size_t>(params.min_leaf)) return idx;

        std::array<int, feature_count> feats{};
        std::iota(feats.begin(), feats.end(), 0);
        std::size_t nf = feature_count;
        if (params.feature_subsample > 0 && static_cast<std::size_t>(params.feature_subsample) < feature_count) {
            nf = static_cast<std::size_t>(params.feature_subsample);
            for (std::size_t i = 0; i < nf; ++i)
                std::swap(feats[i], feats[i + uniform_index(*rng, feature_count - i)]);
            std::sort(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(nf));
        }

        // centring keeps the gain of a pure node at (numerically) zero
        for (auto r : any) centered[r] = y[r] - mean;

        double best_gain = 1e-12;
        int best_f = -1;
        double best_thr = 0.0;
        const auto min_leaf = static_cast<std::size_t>(params.min_leaf);
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const int f = feats[fi];
            const auto& list = lists[f];
            const auto& x = data.col[f];
            double left = 0.0, total = 0.0;
            for (auto r : list) total += centered[r];
            for (std::size_t p = 0; p + 1 < n; ++p) {
                left += centered[list[p]];
                const std::size_t nl = p + 1, nr = n - nl;
                if (nl < min_leaf) continue;
                if (nr < min_leaf) break;
                const double xa = x[list[p]], xb = x[list[p + 1]];
                if (xa == xb) continue;
                const double right = total - left;
                const double gain = left * left / static_cast<double>(nl) +
                                    right * right / static_cast<double>(nr) -
                                    total * total / static_cast<double>(n);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    best_thr = xa + (xb - xa) * 0.5;
                    if (!(best_thr < xb)) best_thr = xa;
                }
            }
        }
        if (best_f < 0) return idx;

        const auto& xs = data.col[best_f];
        for (auto r : any) goes_left[r] = xs[r] <= best_thr ? 1 : 0;

        Lists left_lists, right_lists;
        for (std::size_t f = 0; f < feature_count; ++f) {
            left_lists[f].reserve(n);
            right_lists[f].reserve(n);
            for (auto r : lists[f]) (goes_left[r] ? left_lists[f] : right_lists[f]).push_back(r);
        }
        for (auto& l : lists) std::vector<std::uint32_t>().swap(l);

        tree.nodes[idx].feature = best_f;
        tree.nodes[idx].threshold = best_thr;
        std::int32_t l = grow(left_lists, depth + 1);
        tree.nodes[idx].left = l;
        std::int32_t r = grow(right_lists, depth + 1);
        tree.nodes[idx].right = r;
        return idx;
    }
};

}  // namespace

ColumnData ColumnData::from(std::span<const FeatureRow> x) {
    ColumnData d;
    d.rows = x.size();
    for (std::size_t f = 0; f < feature_count; ++f) {
        d.col[f].resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d.col[f][i] = x[i][f];
        auto& s = d.sorted[f];
        s.resize(x.size());
        std::iota(s.begin(), s.end(), 0u);
        const auto& c = d.col[f];
        std::stable_sort(s.begin(), s.end(), [&](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
    }
    return d;
}

Tree build_tree(const ColumnData& data, std::span<const double> y, std::span<const std::uint32_t> counts,
                const TreeParams& params, Rng* rng) {
    Builder b{data, y, params, rng, {}, std::vector<std::uint8_t>(data.rows, 0),
              std::vector<double>(data.rows, 0.0)};
    Lists lists;
    for (std::size_t f = 0; f < feature_count; ++f) {
        auto& l = lists[f];
        if (counts.empty()) {
            l = data.sorted[f];
        } else {
            for (auto r : data.sorted[f])
                for (std::uint32_t c = 0; c < counts[r]; ++c) l.push_back(r);
        }
    }
    if (lists[0].empty()) {
        b.tree.nodes.push_back(TreeNode{-1, -1, -1, 0.0, 0.0});
        return std::move(b.tree);
    }
    b.grow(lists, 0);
    return std::move(b.tree);
}

}  // namespace microfarm::recommender::detail
