#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/shapley.hpp"

namespace riskalign {

// Model players compared against the survey: the nine continuous inputs and the grouped country.
std::vector<std::string> canonical_players();

/// Analyst feature weights. points[a][f] is analyst a's weight on features[f];
/// each analyst's points are non-negative and sum to 100.
struct ExpertSurvey {
    std::vector<std::string> features;
    std::vector<std::string> analysts;
    std::vector<std::vector<double>> points;
};

/// Parse "analyst_id,feature,points" rows. Features an analyst does not list
/// get 0 points. Throws Error on unknown features, negative points or an
/// analyst whose points do not sum to 100.
ExpertSurvey parse_survey(std::istream& in, std::span<const std::string> features);
ExpertSurvey load_survey(const std::filesystem::path& path, std::span<const std::string> features);
ExpertSurvey load_survey(const std::filesystem::path& path);

struct ExpertRanking {
    std::vector<std::string> features;  // survey order
    std::vector<double> totals;         // summed points per feature
    std::vector<std::string> ranking;   // descending total; ties keep survey feature order
};

ExpertRanking aggregate_and_rank(const ExpertSurvey& survey);

// Mid-ranks (1-based) with ties averaged.
std::vector<double> average_ranks(std::span<const double> values);
// Pearson correlation of average ranks; empty when either side is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);
// Kendall tau-b; empty when either side is constant.
std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b);
// |top-k(a) intersect top-k(b)| / k over two rankings of the same items.
double top_k_overlap(std::span<const std::string> a, std::span<const std::string> b, std::size_t k);

struct AnalystAgreement {
    std::string analyst;
    std::optional<double> spearman;
    std::optional<double> kendall;
};

struct AlignmentReport {
    std::vector<std::string> features;
    std::vector<double> expert_weights;
    std::vector<std::string> expert_ranking;
    std::vector<double> model_importance;  // aligned to `features`
    std::vector<std::string> model_ranking;  // ties broken like the expert ranking
    std::optional<double> spearman;
    std::optional<double> kendall;
    double top3_overlap = 0.0;
    double top5_overlap = 0.0;
    std::vector<double> delta;  // expert share - model share, per feature
    std::vector<AnalystAgreement> per_analyst;
};

// Throws Error listing the difference when the feature sets disagree.
AlignmentReport align(const ExpertRanking& expert, std::span<const std::string> model_players,
                      std::span<const double> model_importance);
// As above, plus per-analyst agreement.
AlignmentReport align(const ExpertSurvey& survey, const AttributionReport& attribution);

void to_json(nlohmann::json& j, const AlignmentReport& r);

}  // namespace riskalign
