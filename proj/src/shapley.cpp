#include "riskalign/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

BatchPredictor probability_predictor(const FittedModel& model) {
    return [&model](const Matrix& rows) { return model.predict_proba(rows); };
}

std::vector<Player> make_players(std::span<const std::string> feature_names, bool group_countries) {
    std::vector<Player> players;
    Player country{std::string(kCountryPlayer), {}};
    for (std::size_t c = 0; c < feature_names.size(); ++c) {
        if (group_countries && feature_names[c].starts_with(kCountryPrefix))
            country.columns.push_back(c);
        else
            players.push_back({feature_names[c], {c}});
    }
    if (!country.columns.empty()) players.push_back(std::move(country));
    return players;
}

Matrix sample_background(const Matrix& rows, std::size_t size, std::uint64_t seed) {
    if (rows.rows() == 0) throw Error("background source is empty");
    if (size >= rows.rows()) return rows;
    std::vector<std::size_t> idx(rows.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "background"));
    for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return rows.select_rows(idx);
}

namespace {

std::vector<Player> resolve_players(const AttributionConfig& config, std::size_t width) {
    if (config.background.rows() == 0) throw Error("attribution background is empty");
    if (config.background.cols() != width)
        throw Error("background has " + std::to_string(config.background.cols()) + " columns, instance has " +
                    std::to_string(width));
    std::vector<Player> players = config.players;
    if (players.empty())
        for (std::size_t c = 0; c < width; ++c) players.push_back({"x" + std::to_string(c), {c}});
    std::vector<int> owner(width, -1);
    for (std::size_t p = 0; p < players.size(); ++p)
        for (auto c : players[p].columns) {
            if (c >= width || owner[c] >= 0) throw Error("players must partition the feature columns");
            owner[c] = static_cast<int>(p);
        }
    if (std::find(owner.begin(), owner.end(), -1) != owner.end())
        throw Error("players must partition the feature columns");
    if (players.size() > config.max_features)
        throw Error(std::to_string(players.size()) + " players exceed max_features=" +
                    std::to_string(config.max_features) + "; group columns or reduce the feature set");
    if (players.size() >= 63) throw Error("too many players for exact enumeration");
    return players;
}

// Background rows with the coalition's columns overwritten by the instance.
void compose(Matrix& rows, std::span<const double> instance, std::uint64_t coalition, std::span<const Player> players) {
    for (std::size_t p = 0; p < players.size(); ++p) {
        if (!(coalition >> p & 1U)) continue;
        for (std::size_t r = 0; r < rows.rows(); ++r)
            for (auto c : players[p].columns) rows(r, c) = instance[c];
    }
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> coalition_values(const BatchPredictor& predict, std::span<const double> instance,
                                     const AttributionConfig& config, std::span<const Player> players) {
    const std::uint64_t n_coalitions = std::uint64_t{1} << players.size();
    std::vector<double> v(n_coalitions);
    Matrix rows;
    for (std::uint64_t s = 0; s < n_coalitions; ++s) {
        rows = config.background;
        compose(rows, instance, s, players);
        const auto out = predict(rows);
        if (out.size() != rows.rows()) throw Error("predictor returned the wrong number of outputs");
        v[s] = mean(out);
    }
    return v;
}

std::vector<double> shapley_from_values(std::span<const double> v, std::size_t m) {
    // weight[s] = s! (m - s - 1)! / m!  =  1 / (m * C(m-1, s))
    std::vector<double> weight(m);
    double binom = 1.0;
    for (std::size_t s = 0; s < m; ++s) {
        weight[s] = 1.0 / (static_cast<double>(m) * binom);
        binom = binom * static_cast<double>(m - 1 - s) / static_cast<double>(s + 1);
    }
    std::vector<double> phi(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        for (std::uint64_t s = 0; s < v.size(); ++s) {
            if (s & bit) continue;
            phi[i] += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
    }
    return phi;
}

}  // namespace

double value_function(const BatchPredictor& predict, std::span<const double> instance, std::uint64_t coalition,
                      const AttributionConfig& config) {
    const auto players = resolve_players(config, instance.size());
    Matrix rows = config.background;
    compose(rows, instance, coalition, players);
    return mean(predict(rows));
}

std::vector<double> shapley_values(const BatchPredictor& predict, std::span<const double> instance,
                                   const AttributionConfig& config) {
    const auto players = resolve_players(config, instance.size());
    const auto v = coalition_values(predict, instance, config, players);
    return shapley_from_values(v, players.size());
}

std::vector<std::string> rank_by_importance(std::span<const std::string> players, std::span<const double> importance) {
    std::vector<std::size_t> order(players.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (importance[a] != importance[b]) return importance[a] > importance[b];
        return players[a] < players[b];
    });
    std::vector<std::string> out;
    for (auto i : order) out.push_back(players[i]);
    return out;
}

AttributionReport global_importance(const BatchPredictor& predict, const Matrix& instances,
                                    const AttributionConfig& config) {
    if (instances.rows() == 0) throw Error("global importance needs at least one instance");
    const auto players = resolve_players(config, instances.cols());
    const std::size_t m = players.size();
    AttributionReport report;
    for (const auto& p : players) report.players.push_back(p.name);
    report.importance.assign(m, 0.0);
    for (std::size_t r = 0; r < instances.rows(); ++r) {
        const auto v = coalition_values(predict, instances.row(r), config, players);
        report.base_value = v.front();
        report.outputs.push_back(v.back());
        auto phi = shapley_from_values(v, m);
        for (std::size_t i = 0; i < m; ++i) report.importance[i] += std::abs(phi[i]);
        report.phi.push_back(std::move(phi));
    }
    for (auto& imp : report.importance) imp /= static_cast<double>(instances.rows());
    report.ranking = rank_by_importance(report.players, report.importance);
    return report;
}

void to_json(nlohmann::json& j, const AttributionReport& r) {
    j = nlohmann::json{{"players", r.players},       {"base_value", r.base_value},
                       {"phi", r.phi},               {"outputs", r.outputs},
                       {"importance", r.importance}, {"ranking", r.ranking}};
}

void from_json(const nlohmann::json& j, AttributionReport& r) {
    j.at("players").get_to(r.players);
    j.at("base_value").get_to(r.base_value);
    j.at("importance").get_to(r.importance);
    r.phi = j.value("phi", std::vector<std::vector<double>>{});
    r.outputs = j.value("outputs", std::vector<double>{});
    if (r.importance.size() != r.players.size()) throw Error("attribution importance does not match players");
    r.ranking = j.contains("ranking") ? j.at("ranking").get<std::vector<std::string>>()
                                      : rank_by_importance(r.players, r.importance);
}

}  // namespace riskalign
