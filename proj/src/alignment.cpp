#include "riskalign/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "riskalign/csv.hpp"
#include "riskalign/dataprep.hpp"
#include "riskalign/error.hpp"

namespace riskalign {

std::vector<std::string> canonical_players() {
    std::vector<std::string> out(kRatioNames.begin(), kRatioNames.end());
    out.emplace_back(kCountryPlayer);
    return out;
}

ExpertSurvey parse_survey(std::istream& in, std::span<const std::string> features) {
    const auto table = csv::parse(in);
    const int c_analyst = table.require_column("analyst_id");
    const int c_feature = table.require_column("feature");
    const int c_points = table.require_column("points");

    ExpertSurvey survey;
    survey.features.assign(features.begin(), features.end());
    std::vector<std::vector<bool>> seen;
    for (const auto& row : table.rows) {
        const auto& analyst = row[c_analyst];
        const auto f = std::find(features.begin(), features.end(), row[c_feature]);
        if (f == features.end()) throw Error("survey names unknown feature '" + row[c_feature] + "'");
        const double pts = csv::parse_double(row[c_points], "survey points");
        if (!(pts >= 0.0)) throw Error("analyst '" + analyst + "' gives negative points");
        auto a = std::find(survey.analysts.begin(), survey.analysts.end(), analyst);
        if (a == survey.analysts.end()) {
            survey.analysts.push_back(analyst);
            survey.points.emplace_back(features.size(), 0.0);
            seen.emplace_back(features.size(), false);
            a = survey.analysts.end() - 1;
        }
        const auto ai = static_cast<std::size_t>(a - survey.analysts.begin());
        const auto fi = static_cast<std::size_t>(f - features.begin());
        if (seen[ai][fi]) throw Error("analyst '" + analyst + "' lists '" + row[c_feature] + "' twice");
        seen[ai][fi] = true;
        survey.points[ai][fi] = pts;
    }
    if (survey.analysts.empty()) throw Error("survey has no analysts");
    for (std::size_t a = 0; a < survey.analysts.size(); ++a) {
        const double total = std::accumulate(survey.points[a].begin(), survey.points[a].end(), 0.0);
        if (std::abs(total - 100.0) > 1e-9)
            throw Error("analyst '" + survey.analysts[a] + "' distributes " + csv::format_double(total) +
                        " points instead of 100");
    }
    return survey;
}

ExpertSurvey load_survey(const std::filesystem::path& path, std::span<const std::string> features) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return parse_survey(in, features);
}

ExpertSurvey load_survey(const std::filesystem::path& path) { return load_survey(path, canonical_players()); }

namespace {

// Descending weight; ties keep the order of `features`.
std::vector<std::string> rank_in_feature_order(std::span<const std::string> features, std::span<const double> w) {
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
    std::vector<std::string> out;
    for (auto i : order) out.push_back(features[i]);
    return out;
}

}  // namespace

ExpertRanking aggregate_and_rank(const ExpertSurvey& survey) {
    ExpertRanking out;
    out.features = survey.features;
    out.totals.assign(survey.features.size(), 0.0);
    for (const auto& analyst : survey.points)
        for (std::size_t f = 0; f < analyst.size(); ++f) out.totals[f] += analyst[f];
    out.ranking = rank_in_feature_order(out.features, out.totals);
    return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
        i = j;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("rank correlation inputs differ in length");
    if (a.size() < 2) return std::nullopt;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("rank correlation inputs differ in length");
    double concordant = 0.0;
    double discordant = 0.0;
    double ties_a = 0.0;
    double ties_b = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            pairs += 1.0;
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ties_a += 1.0;
            if (db == 0.0) ties_b += 1.0;
            if (da == 0.0 || db == 0.0) continue;
            ((da > 0.0) == (db > 0.0) ? concordant : discordant) += 1.0;
        }
    const double denom = std::sqrt((pairs - ties_a) * (pairs - ties_b));
    if (denom == 0.0) return std::nullopt;
    return std::clamp((concordant - discordant) / denom, -1.0, 1.0);
}

double top_k_overlap(std::span<const std::string> a, std::span<const std::string> b, std::size_t k) {
    k = std::min({k, a.size(), b.size()});
    if (k == 0) return 0.0;
    std::size_t shared = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (std::find(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(k), a[i]) != b.begin() + static_cast<std::ptrdiff_t>(k))
            ++shared;
    return static_cast<double>(shared) / static_cast<double>(k);
}

namespace {

std::vector<double> importance_in_order(std::span<const std::string> features, std::span<const std::string> players,
                                        std::span<const double> importance) {
    std::string missing;
    std::string extra;
    for (const auto& f : features)
        if (std::find(players.begin(), players.end(), f) == players.end()) missing += (missing.empty() ? "" : ",") + f;
    for (const auto& p : players)
        if (std::find(features.begin(), features.end(), p) == features.end()) extra += (extra.empty() ? "" : ",") + p;
    if (!missing.empty() || !extra.empty())
        throw Error("feature sets differ; only in survey: [" + missing + "], only in model: [" + extra + "]");
    std::vector<double> out;
    for (const auto& f : features)
        out.push_back(importance[static_cast<std::size_t>(std::find(players.begin(), players.end(), f) - players.begin())]);
    return out;
}

std::vector<double> shares(std::span<const double> w, const char* what) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) throw Error(std::string(what) + " weights sum to zero");
    std::vector<double> out;
    for (double x : w) out.push_back(x / total);
    return out;
}

}  // namespace

AlignmentReport align(const ExpertRanking& expert, std::span<const std::string> model_players,
                      std::span<const double> model_importance) {
    if (model_players.size() != model_importance.size()) throw Error("model players and importances differ in length");
    AlignmentReport r;
    r.features = expert.features;
    r.expert_weights = expert.totals;
    r.expert_ranking = expert.ranking;
    r.model_importance = importance_in_order(r.features, model_players, model_importance);
    r.model_ranking = rank_in_feature_order(r.features, r.model_importance);
    r.spearman = spearman(r.expert_weights, r.model_importance);
    r.kendall = kendall_tau_b(r.expert_weights, r.model_importance);
    r.top3_overlap = top_k_overlap(r.expert_ranking, r.model_ranking, 3);
    r.top5_overlap = top_k_overlap(r.expert_ranking, r.model_ranking, 5);
    const auto es = shares(r.expert_weights, "expert");
    const auto ms = shares(r.model_importance, "model");
    for (std::size_t i = 0; i < es.size(); ++i) r.delta.push_back(es[i] - ms[i]);
    return r;
}

AlignmentReport align(const ExpertSurvey& survey, const AttributionReport& attribution) {
    auto r = align(aggregate_and_rank(survey), attribution.players, attribution.importance);
    for (std::size_t a = 0; a < survey.analysts.size(); ++a)
        r.per_analyst.push_back({survey.analysts[a], spearman(survey.points[a], r.model_importance),
                                 kendall_tau_b(survey.points[a], r.model_importance)});
    return r;
}

void to_json(nlohmann::json& j, const AlignmentReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json per = nlohmann::json::array();
    for (const auto& a : r.per_analyst)
        per.push_back({{"analyst", a.analyst}, {"spearman", opt(a.spearman)}, {"kendall", opt(a.kendall)}});
    j = nlohmann::json{{"features", r.features},
                       {"expert_weights", r.expert_weights},
                       {"expert_ranking", r.expert_ranking},
                       {"model_importance", r.model_importance},
                       {"model_ranking", r.model_ranking},
                       {"spearman", opt(r.spearman)},
                       {"kendall_tau_b", opt(r.kendall)},
                       {"top3_overlap", r.top3_overlap},
                       {"top5_overlap", r.top5_overlap},
                       {"delta", r.delta},
                       {"per_analyst", per}};
}

}  // namespace riskalign
