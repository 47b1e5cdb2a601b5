#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/matrix.hpp"

namespace riskalign {

// Internal node when feature >= 0 (rows with x[feature] < threshold go left), leaf otherwise.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class Tree {
public:
    Tree() = default;
    explicit Tree(std::vector<TreeNode> nodes);

    // Single leaf.
    static Tree constant(double value) { return Tree({TreeNode{.value = value}}); }

    double predict(std::span<const double> row) const { return nodes_[leaf_index(row)].value; }
    std::size_t leaf_index(std::span<const double> row) const;

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;
    std::size_t leaf_count() const;
    bool uses_feature(std::size_t feature) const;

    friend bool operator==(const Tree&, const Tree&) = default;

private:
    std::vector<TreeNode> nodes_;
};

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);

enum class SplitCriterion { gini, second_order };

struct TreeConfig {
    int max_depth = 6;
    std::size_t min_samples_leaf = 1;
    double feature_subsample_fraction = 1.0;
    // Resample features at every split (random forest) instead of once per tree.
    bool per_split_sampling = false;
    SplitCriterion criterion = SplitCriterion::gini;
    double lambda = 1.0;  // second_order only
    double gamma = 0.0;   // second_order only
    std::uint64_t seed = 0;

    void validate() const;
};

// Row indices of a matrix sorted by each column; reusable across trees on the same rows.
class SortedColumns {
public:
    explicit SortedColumns(const Matrix& x);
    const std::vector<std::uint32_t>& column(std::size_t c) const { return order_[c]; }
    std::size_t cols() const noexcept { return order_.size(); }
    std::size_t rows() const noexcept { return rows_; }

private:
    std::vector<std::vector<std::uint32_t>> order_;
    std::size_t rows_ = 0;
};

/// Gini tree on labels in [0,1] with non-negative row weights; rows with zero
/// weight are ignored. Leaves hold the weighted positive-class fraction.
Tree fit_gini_tree(const Matrix& x, std::span<const double> labels, std::span<const double> weights,
                   const TreeConfig& config);
Tree fit_gini_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> labels,
                   std::span<const double> weights, const TreeConfig& config);

/// Newton tree on per-row gradient/hessian. Leaves hold -G/(H+lambda); a split
/// is kept only when its gain exceeds gamma. `active` selects rows (empty = all).
Tree fit_second_order_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                           const TreeConfig& config);
Tree fit_second_order_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> grad,
                           std::span<const double> hess, std::span<const std::uint8_t> active,
                           const TreeConfig& config);

}  // namespace riskalign
