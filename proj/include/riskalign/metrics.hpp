#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <nlohmann/json.hpp>

namespace riskalign {

struct EvalReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::size_t n = 0;
    double threshold = 0.5;
    double accuracy = 0.0;
    double precision = 0.0;  // 0 when nothing is predicted positive
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;  // empty when labels hold a single class
};

/// Confusion counts at `threshold` (label 1 iff p >= threshold) plus
/// threshold-free ROC AUC. Throws Error on empty or mismatched input.
EvalReport evaluate(std::span<const int> labels, std::span<const double> probabilities, double threshold = 0.5);

// Mann-Whitney form of the ROC AUC; tied scores count one half.
std::optional<double> roc_auc(std::span<const int> labels, std::span<const double> scores);

void to_json(nlohmann::json& j, const EvalReport& r);

}  // namespace riskalign
