#include "riskalign/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error("tree has no nodes");
    const int n = static_cast<int>(nodes_.size());
    for (const auto& node : nodes_) {
        if (node.is_leaf()) {
            if (!std::isfinite(node.value)) throw Error("tree leaf value is not finite");
        } else if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
            throw Error("tree node has a missing child");
        }
    }
}

std::size_t Tree::leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& node = nodes_[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left
                                                                                                   : node.right);
    }
    return i;
}

std::size_t Tree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

bool Tree::uses_feature(std::size_t feature) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const TreeNode& n) { return n.feature == static_cast<int>(feature); });
}

void to_json(nlohmann::json& j, const Tree& t) {
    j = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
        if (n.is_leaf())
            j.push_back({{"leaf", n.value}});
        else
            j.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
}

void from_json(const nlohmann::json& j, Tree& t) {
    std::vector<TreeNode> nodes;
    for (const auto& item : j) {
        TreeNode n;
        if (item.contains("leaf")) {
            n.value = item.at("leaf").get<double>();
        } else {
            n.feature = item.at("feature").get<int>();
            n.threshold = item.at("threshold").get<double>();
            n.left = item.at("left").get<int>();
            n.right = item.at("right").get<int>();
        }
        nodes.push_back(n);
    }
    t = Tree(std::move(nodes));
}

void TreeConfig::validate() const {
    if (max_depth < 1) throw Error("max_depth must be at least 1");
    if (min_samples_leaf < 1) throw Error("min_samples_leaf must be at least 1");
    if (!(feature_subsample_fraction > 0.0 && feature_subsample_fraction <= 1.0))
        throw Error("feature_subsample_fraction must lie in (0, 1]");
    if (!(lambda >= 0.0)) throw Error("lambda must be non-negative");
    if (!(gamma >= 0.0)) throw Error("gamma must be non-negative");
}

SortedColumns::SortedColumns(const Matrix& x) : order_(x.cols()), rows_(x.rows()) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
        auto& idx = order_[c];
        idx.resize(x.rows());
        std::iota(idx.begin(), idx.end(), std::uint32_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x(a, c) < x(b, c); });
    }
}

namespace {

// Greedy builder over per-feature sorted row segments. A node owns the same
// [begin, end) segment in every feature's array; splitting stably partitions
// each array so children stay sorted.
class Builder {
public:
    Builder(const Matrix& x, const SortedColumns& sorted, std::span<const double> stat_a,
            std::span<const double> stat_b, std::span<const std::uint8_t> active, const TreeConfig& config)
        : x_(x), a_(stat_a), b_(stat_b), config_(config), rng_(config.seed), goes_left_(x.rows(), 0) {
        config_.validate();
        if (sorted.rows() != x.rows() || sorted.cols() != x.cols()) throw Error("sorted columns do not match matrix");
        if (a_.size() != x.rows() || b_.size() != x.rows()) throw Error("row statistics do not match matrix rows");
        if (!active.empty() && active.size() != x.rows()) throw Error("active mask does not match matrix rows");

        std::size_t n_active = 0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            if (!active.empty() && !active[r]) continue;
            if (!std::isfinite(a_[r]) || !std::isfinite(b_[r])) throw Error("non-finite target statistic in tree fit");
            for (double v : x.row(r))
                if (!std::isfinite(v)) throw Error("non-finite feature value in tree fit");
            ++n_active;
        }
        if (n_active == 0) throw Error("tree fit needs at least one row");

        order_.resize(x.cols());
        for (std::size_t c = 0; c < x.cols(); ++c) {
            auto& seg = order_[c];
            seg.reserve(n_active);
            for (auto r : sorted.column(c))
                if (active.empty() || active[r]) seg.push_back(r);
        }
        scratch_.resize(n_active);
        n_active_ = n_active;

        tree_features_.resize(x.cols());
        std::iota(tree_features_.begin(), tree_features_.end(), std::size_t{0});
        if (!config_.per_split_sampling) tree_features_ = sample_features(tree_features_);
    }

    Tree build() {
        grow(0, n_active_, 0);
        return Tree(std::move(nodes_));
    }

private:
    struct Split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    std::vector<std::size_t> sample_features(std::vector<std::size_t> pool) {
        const auto m = pool.size();
        auto k = static_cast<std::size_t>(std::llround(config_.feature_subsample_fraction * static_cast<double>(m)));
        k = std::clamp<std::size_t>(k, 1, m);
        if (k == m) return pool;
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + rng_.below(m - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    double leaf_value(double sum_a, double sum_b) const {
        if (config_.criterion == SplitCriterion::gini) return sum_b > 0.0 ? sum_a / sum_b : 0.0;
        return -sum_a / (sum_b + config_.lambda);
    }

    // Impurity-type score; larger is better for children.
    double score(double sum_a, double sum_b) const {
        if (config_.criterion == SplitCriterion::gini)
            return sum_b > 0.0 ? -2.0 * sum_a * (sum_b - sum_a) / sum_b : 0.0;
        return sum_a * sum_a / (sum_b + config_.lambda);
    }

    double gain(double la, double lb, double ra, double rb, double parent) const {
        const double raw = score(la, lb) + score(ra, rb) - parent;
        return config_.criterion == SplitCriterion::gini ? raw : 0.5 * raw - config_.gamma;
    }

    int grow(std::size_t begin, std::size_t end, int depth) {
        double sum_a = 0.0;
        double sum_b = 0.0;
        const auto& any = order_[0];
        for (std::size_t i = begin; i < end; ++i) {
            sum_a += a_[any[i]];
            sum_b += b_[any[i]];
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{.value = leaf_value(sum_a, sum_b)});

        const std::size_t count = end - begin;
        if (depth >= config_.max_depth || count < 2 * config_.min_samples_leaf) return id;
        if (config_.criterion == SplitCriterion::gini && (sum_a <= 0.0 || sum_a >= sum_b)) return id;

        const auto features = config_.per_split_sampling ? sample_features(tree_features_) : tree_features_;
        const double parent = score(sum_a, sum_b);
        // Gini gains below this are rounding noise on an unsplittable node.
        const double min_gain = config_.criterion == SplitCriterion::gini ? 1e-12 * sum_b : 0.0;
        Split best{.gain = min_gain};

        for (auto f : features) {
            const auto& seg = order_[f];
            double la = 0.0;
            double lb = 0.0;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                const auto r = seg[i];
                la += a_[r];
                lb += b_[r];
                const double v = x_(r, f);
                const double next = x_(seg[i + 1], f);
                if (!(v < next)) continue;
                const std::size_t n_left = i + 1 - begin;
                if (n_left < config_.min_samples_leaf) continue;
                if (count - n_left < config_.min_samples_leaf) break;
                const double g = gain(la, lb, sum_a - la, sum_b - lb, parent);
                if (g > best.gain) {
                    double threshold = v + (next - v) / 2.0;
                    if (!(threshold > v)) threshold = next;
                    best = {g, static_cast<int>(f), threshold};
                }
            }
        }
        if (best.feature < 0) return id;

        const auto f = static_cast<std::size_t>(best.feature);
        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = order_[f][i];
            goes_left_[r] = x_(r, f) < best.threshold ? 1 : 0;
            n_left += goes_left_[r];
        }
        for (auto& seg : order_) {
            std::size_t l = begin;
            std::size_t s = 0;
            for (std::size_t i = begin; i < end; ++i) {
                const auto r = seg[i];
                if (goes_left_[r])
                    seg[l++] = r;
                else
                    scratch_[s++] = r;
            }
            std::copy_n(scratch_.begin(), s, seg.begin() + static_cast<std::ptrdiff_t>(l));
        }

        const int left = grow(begin, begin + n_left, depth + 1);
        const int right = grow(begin + n_left, end, depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        node.value = 0.0;
        return id;
    }

    const Matrix& x_;
    std::span<const double> a_;
    std::span<const double> b_;
    TreeConfig config_;
    Rng rng_;
    std::vector<std::vector<std::uint32_t>> order_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::size_t> tree_features_;
    std::vector<TreeNode> nodes_;
    std::size_t n_active_ = 0;
};

}  // namespace

Tree fit_gini_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> labels,
                   std::span<const double> weights, const TreeConfig& config) {
    if (labels.size() != x.rows() || weights.size() != x.rows()) throw Error("labels/weights do not match rows");
    std::vector<double> wy(x.rows());
    std::vector<std::uint8_t> active(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        if (weights[r] < 0.0) throw Error("negative sample weight");
        wy[r] = weights[r] * labels[r];
        active[r] = weights[r] > 0.0 ? 1 : 0;
    }
    TreeConfig cfg = config;
    cfg.criterion = SplitCriterion::gini;
    return Builder(x, sorted, wy, weights, active, cfg).build();
}

Tree fit_gini_tree(const Matrix& x, std::span<const double> labels, std::span<const double> weights,
                   const TreeConfig& config) {
    return fit_gini_tree(x, SortedColumns(x), labels, weights, config);
}

Tree fit_second_order_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> grad,
                           std::span<const double> hess, std::span<const std::uint8_t> active,
                           const TreeConfig& config) {
    for (double h : hess)
        if (h < 0.0) throw Error("hessian must be non-negative");
    TreeConfig cfg = config;
    cfg.criterion = SplitCriterion::second_order;
    return Builder(x, sorted, grad, hess, active, cfg).build();
}

Tree fit_second_order_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                           const TreeConfig& config) {
    return fit_second_order_tree(x, SortedColumns(x), grad, hess, {}, config);
}

}  // namespace riskalign
