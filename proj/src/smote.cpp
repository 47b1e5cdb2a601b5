#include "riskalign/smote.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "riskalign/csv.hpp"
#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

void SmoteConfig::validate() const {
    if (k < 1) throw Error("SMOTE k must be at least 1");
    if (!(target_ratio > 0.0 && target_ratio <= 1.0)) throw Error("SMOTE target_ratio must lie in (0, 1]");
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

}  // namespace

SmoteResult smote_resample(const Dataset& train, const SmoteConfig& config) {
    config.validate();
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train.labels[i] == 1) minority.push_back(i);
    const std::size_t majority = train.size() - minority.size();

    SmoteResult result{train, {}};
    const auto wanted = static_cast<std::size_t>(std::floor(config.target_ratio * static_cast<double>(majority)));
    if (wanted <= minority.size()) return result;
    if (minority.size() <= config.k)
        throw Error("SMOTE needs more than k=" + std::to_string(config.k) + " minority rows, found " +
                    std::to_string(minority.size()) + "; use a smaller k");

    // k nearest minority neighbours of each minority row, as positions in `minority`.
    const std::size_t m = minority.size();
    std::vector<std::vector<std::size_t>> neighbours(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t a = 0; a < m; ++a) {
        dist.clear();
        for (std::size_t b = 0; b < m; ++b)
            if (b != a) dist.emplace_back(squared_distance(train.x.row(minority[a]), train.x.row(minority[b])), b);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(config.k), dist.end());
        for (std::size_t n = 0; n < config.k; ++n) neighbours[a].push_back(dist[n].second);
    }

    Rng rng(derive_seed(config.seed, "smote"));
    const std::size_t n_new = wanted - minority.size();
    std::vector<double> row(train.x.cols());
    result.parents.reserve(n_new);
    for (std::size_t s = 0; s < n_new; ++s) {
        const auto a = static_cast<std::size_t>(rng.below(m));
        const auto b = neighbours[a][rng.below(config.k)];
        const double gap = rng.uniform();
        const auto base = train.x.row(minority[a]);
        const auto other = train.x.row(minority[b]);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = base[j] + gap * (other[j] - base[j]);
        result.data.x.append_row(row);
        result.data.labels.push_back(1);
        result.data.company_ids.push_back("smote-" + std::to_string(s));
        result.data.years.push_back(train.years[minority[a]]);
        result.parents.push_back({minority[a], minority[b], gap});
    }
    return result;
}

void write_parents(std::ostream& out, const SmoteResult& result, std::size_t original_rows) {
    csv::write_row(out, {"synthetic_row", "base_row", "neighbor_row", "gap"});
    for (std::size_t s = 0; s < result.parents.size(); ++s) {
        const auto& p = result.parents[s];
        csv::write_row(out, {std::to_string(original_rows + s), std::to_string(p.base), std::to_string(p.neighbor),
                             csv::format_double(p.gap)});
    }
}

}  // namespace riskalign
