#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/dataprep.hpp"
#include "riskalign/matrix.hpp"
#include "riskalign/models.hpp"

namespace riskalign {

// Maps a batch of rows to one model output per row.
using BatchPredictor = std::function<std::vector<double>(const Matrix&)>;

BatchPredictor probability_predictor(const FittedModel& model);

// A player of the attribution game: one or more matrix columns that move together.
struct Player {
    std::string name;
    std::vector<std::size_t> columns;

    friend bool operator==(const Player&, const Player&) = default;
};

// One player per column, or with group_countries the one-hot country columns
// collapsed into a single "country_code" player placed after the others.
std::vector<Player> make_players(std::span<const std::string> feature_names, bool group_countries);

struct AttributionConfig {
    Matrix background;            // reference rows for absent players
    std::vector<Player> players;  // must partition the columns; empty = one per column
    std::size_t max_features = 20;
};

// Seeded sample of `size` distinct rows (all rows when size >= rows).
Matrix sample_background(const Matrix& rows, std::size_t size, std::uint64_t seed);

/// v(S): mean model output over background rows with the columns of the
/// players in `coalition` (bit i = player i) replaced by the instance's values.
double value_function(const BatchPredictor& predict, std::span<const double> instance, std::uint64_t coalition,
                      const AttributionConfig& config);

/// Exact Shapley values by enumerating all 2^M coalitions.
/// Throws Error when the number of players exceeds max_features.
std::vector<double> shapley_values(const BatchPredictor& predict, std::span<const double> instance,
                                   const AttributionConfig& config);

struct AttributionReport {
    std::vector<std::string> players;
    double base_value = 0.0;                // v(empty set)
    std::vector<std::vector<double>> phi;   // per instance, per player
    std::vector<double> outputs;            // model output per instance
    std::vector<double> importance;         // mean |phi| per player
    std::vector<std::string> ranking;       // players by descending importance, ties by name
};

AttributionReport global_importance(const BatchPredictor& predict, const Matrix& instances,
                                    const AttributionConfig& config);

// Players ordered by descending importance; equal importances by name.
std::vector<std::string> rank_by_importance(std::span<const std::string> players, std::span<const double> importance);

void to_json(nlohmann::json& j, const AttributionReport& r);
void from_json(const nlohmann::json& j, AttributionReport& r);

}  // namespace riskalign
