#include "riskalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "riskalign/error.hpp"

namespace riskalign {

std::optional<double> roc_auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw Error("labels and scores differ in length");
    const std::size_t n = labels.size();
    for (double s : scores)
        if (std::isnan(s)) throw Error("NaN score");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

    // Sum of 1-based mid-ranks of the positives, kept doubled to stay integral.
    double doubled_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double doubled_mid_rank = static_cast<double>(i + 1 + j);  // (i+1) + j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                doubled_rank_sum += doubled_mid_rank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;
    const double p = static_cast<double>(positives);
    const double doubled_u = doubled_rank_sum - p * (p + 1.0);
    return doubled_u / (2.0 * p * static_cast<double>(negatives));
}

EvalReport evaluate(std::span<const int> labels, std::span<const double> probabilities, double threshold) {
    if (labels.size() != probabilities.size()) throw Error("labels and probabilities differ in length");
    if (labels.empty()) throw Error("cannot evaluate an empty prediction set");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0,1]");
    EvalReport r;
    r.n = labels.size();
    r.threshold = threshold;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw Error("labels must be 0 or 1");
        if (!(probabilities[i] >= 0.0 && probabilities[i] <= 1.0)) throw Error("probability outside [0,1]");
        const bool predicted = probabilities[i] >= threshold;
        if (labels[i] == 1)
            predicted ? ++r.tp : ++r.fn;
        else
            predicted ? ++r.fp : ++r.tn;
    }
    const auto frac = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = frac(r.tp + r.tn, r.n);
    r.precision = frac(r.tp, r.tp + r.fp);
    r.recall = frac(r.tp, r.tp + r.fn);
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.auc = roc_auc(labels, probabilities);
    return r;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"tp", r.tp},           {"fp", r.fp},
                       {"tn", r.tn},           {"fn", r.fn},
                       {"n", r.n},             {"threshold", r.threshold},
                       {"accuracy", r.accuracy}, {"precision", r.precision},
                       {"recall", r.recall},   {"f1", r.f1}};
    j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
}

}  // namespace riskalign
