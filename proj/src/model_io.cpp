#include <fstream>
#include <sstream>

#include "microfarm/error.hpp"
#include "microfarm/recommender.hpp"

namespace microfarm::recommender {

namespace {

using nlohmann::json;

constexpr const char* model_format = "microfarm-model";
constexpr int model_version = 1;

json tree_to_json(const Tree& t) {
    json feature = json::array(), left = json::array(), right = json::array(), thr = json::array(),
         value = json::array();
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        left.push_back(n.left);
        right.push_back(n.right);
        thr.push_back(n.threshold);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"left", left}, {"right", right}, {"threshold", thr}, {"value", value}};
}

Tree tree_from_json(const json& j) {
    Tree t;
    const auto& feature = j.at("feature");
    const std::size_t n = feature.size();
    if (n == 0) throw Error(ErrorKind::parse, "empty tree in model file");
    for (std::size_t i = 0; i < n; ++i) {
        TreeNode node;
        node.feature = feature.at(i).get<std::int32_t>();
        node.left = j.at("left").at(i).get<std::int32_t>();
        node.right = j.at("right").at(i).get<std::int32_t>();
        node.threshold = j.at("threshold").at(i).get<double>();
        node.value = j.at("value").at(i).get<double>();
        if (node.feature >= static_cast<std::int32_t>(feature_count) ||
            (node.feature >= 0 && (node.left <= static_cast<std::int32_t>(i) || node.right <= static_cast<std::int32_t>(i) ||
                                   node.left >= static_cast<std::int32_t>(n) || node.right >= static_cast<std::int32_t>(n))))
            throw Error(ErrorKind::parse, "malformed tree node in model file");
        t.nodes.push_back(node);
    }
    return t;
}

json params_to_json(ModelKind kind, const Hyperparameters& p) {
    switch (kind) {
        case ModelKind::knn: return {{"k", p.knn_k}};
        case ModelKind::linear: return {{"ridge", p.ridge}};
        case ModelKind::decision_tree: return {{"max_depth", p.tree_max_depth}, {"min_leaf", p.tree_min_leaf}};
        case ModelKind::random_forest:
            return {{"trees", p.forest_trees}, {"max_depth", p.forest_max_depth}, {"min_leaf", p.forest_min_leaf},
                    {"feature_subsample", p.forest_features}, {"bootstrap", p.forest_bootstrap}};
        case ModelKind::gradient_boost:
            return {{"rounds", p.boost_rounds}, {"learning_rate", p.boost_learning_rate},
                    {"tree_depth", p.boost_depth}, {"min_leaf", p.boost_min_leaf}};
    }
    return json::object();
}

Hyperparameters params_from_json(ModelKind kind, const json& j) {
    Hyperparameters p;
    switch (kind) {
        case ModelKind::knn: p.knn_k = j.at("k").get<int>(); break;
        case ModelKind::linear: p.ridge = j.at("ridge").get<double>(); break;
        case ModelKind::decision_tree:
            p.tree_max_depth = j.at("max_depth").get<int>();
            p.tree_min_leaf = j.at("min_leaf").get<int>();
            break;
        case ModelKind::random_forest:
            p.forest_trees = j.at("trees").get<int>();
            p.forest_max_depth = j.at("max_depth").get<int>();
            p.forest_min_leaf = j.at("min_leaf").get<int>();
            p.forest_features = j.at("feature_subsample").get<int>();
            p.forest_bootstrap = j.at("bootstrap").get<bool>();
            break;
        case ModelKind::gradient_boost:
            p.boost_rounds = j.at("rounds").get<int>();
            p.boost_learning_rate = j.at("learning_rate").get<double>();
            p.boost_depth = j.at("tree_depth").get<int>();
            p.boost_min_leaf = j.at("min_leaf").get<int>();
            break;
    }
    p.validate();
    return p;
}

json row_to_json(const FeatureRow& r) { return json(std::vector<double>(r.begin(), r.end())); }

FeatureRow row_from_json(const json& j) {
    if (!j.is_array() || j.size() != feature_count) throw Error(ErrorKind::parse, "feature row must have 5 values");
    FeatureRow r;
    for (std::size_t f = 0; f < feature_count; ++f) r[f] = j.at(f).get<double>();
    return r;
}

}  // namespace

json model_to_json(const TrainedModel& m) {
    json out = {{"format", model_format},
                {"version", model_version},
                {"kind", kind_name(m.spec.kind)},
                {"params", params_to_json(m.spec.kind, m.spec.params)},
                {"scaling", {{"mean", row_to_json(m.scaling.mean)}, {"stddev", row_to_json(m.scaling.stddev)}}},
                {"meta", {{"seed", m.meta.seed}, {"dataset_size", m.meta.dataset_size}}}};
    json plants = json::array();
    if (m.spec.kind == ModelKind::knn && !m.plants.empty()) {
        json pts = json::array();
        for (const auto& p : *std::get<KnnRegressor>(m.plants[0]).points) pts.push_back(row_to_json(p));
        out["knn_points"] = std::move(pts);
    }
    for (const auto& r : m.plants) {
        plants.push_back(std::visit(
            [](const auto& p) -> json {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, KnnRegressor>) {
                    return {{"labels", p.labels}};
                } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                    return {{"intercept", p.intercept}, {"weights", row_to_json(p.weights)}};
                } else if constexpr (std::is_same_v<T, TreeRegressor>) {
                    return {{"tree", tree_to_json(p.tree)}};
                } else if constexpr (std::is_same_v<T, ForestRegressor>) {
                    json trees = json::array();
                    for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
                    return {{"trees", trees}};
                } else {
                    json trees = json::array();
                    for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
                    return {{"init", p.init}, {"learning_rate", p.learning_rate}, {"trees", trees}};
                }
            },
            r));
    }
    out["plants"] = std::move(plants);
    return out;
}

TrainedModel model_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != model_format) throw Error(ErrorKind::parse, "not a model file");
        if (j.at("version").get<int>() != model_version)
            throw Error(ErrorKind::version, "unsupported model version " + j.at("version").dump());
        auto kind = parse_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorKind::parse, "unknown model kind " + j.at("kind").dump());
        TrainedModel m;
        m.spec.kind = *kind;
        m.spec.params = params_from_json(*kind, j.at("params"));
        m.scaling.mean = row_from_json(j.at("scaling").at("mean"));
        m.scaling.stddev = row_from_json(j.at("scaling").at("stddev"));
        m.meta.seed = j.at("meta").at("seed").get<std::uint64_t>();
        m.meta.dataset_size = j.at("meta").at("dataset_size").get<std::size_t>();

        std::shared_ptr<const std::vector<FeatureRow>> points;
        if (*kind == ModelKind::knn) {
            auto pts = std::make_shared<std::vector<FeatureRow>>();
            for (const auto& p : j.at("knn_points")) pts->push_back(row_from_json(p));
            points = pts;
        }
        for (const auto& p : j.at("plants")) {
            switch (*kind) {
                case ModelKind::knn: {
                    KnnRegressor r{points, p.at("labels").get<std::vector<double>>(), m.spec.params.knn_k};
                    if (r.labels.size() != points->size()) throw Error(ErrorKind::parse, "knn labels/points mismatch");
                    m.plants.emplace_back(std::move(r));
                    break;
                }
                case ModelKind::linear:
                    m.plants.emplace_back(LinearRegressor{p.at("intercept").get<double>(), row_from_json(p.at("weights"))});
                    break;
                case ModelKind::decision_tree: m.plants.emplace_back(TreeRegressor{tree_from_json(p.at("tree"))}); break;
                case ModelKind::random_forest: {
                    ForestRegressor f;
                    for (const auto& t : p.at("trees")) f.trees.push_back(tree_from_json(t));
                    if (f.trees.empty()) throw Error(ErrorKind::parse, "forest without trees");
                    m.plants.emplace_back(std::move(f));
                    break;
                }
                case ModelKind::gradient_boost: {
                    BoostRegressor b;
                    b.init = p.at("init").get<double>();
                    b.learning_rate = p.at("learning_rate").get<double>();
                    for (const auto& t : p.at("trees")) b.trees.push_back(tree_from_json(t));
                    m.plants.emplace_back(std::move(b));
                    break;
                }
            }
        }
        if (m.plants.empty()) throw Error(ErrorKind::parse, "model has no plants");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("malformed model file: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << model_to_json(model).dump() << '\n';
    if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace microfarm::recommender
