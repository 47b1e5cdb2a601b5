#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "riskalign/csv.hpp"
#include "riskalign/error.hpp"
#include "riskalign/smote.hpp"
#include "test_support.hpp"

using namespace riskalign;

namespace {

Dataset imbalanced(std::size_t minority, std::size_t majority, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t c = 0; c < cols; ++c) d.feature_names.push_back("f" + std::to_string(c));
    d.x = Matrix(0, cols);
    std::vector<double> row(cols);
    const std::size_t step = (minority + majority) / minority;
    std::size_t placed = 0;
    for (std::size_t i = 0; i < minority + majority; ++i) {
        const bool pos = i % step == 0 && placed < minority;
        placed += pos;
        for (auto& v : row) v = rng.normal(pos ? 1.0 : 0.0, 1.0);
        d.x.append_row(row);
        d.labels.push_back(pos ? 1 : 0);
        d.company_ids.push_back("c" + std::to_string(i));
        d.years.push_back(2004 + static_cast<int>(i % 9));
    }
    REQUIRE(static_cast<std::size_t>(std::count(d.labels.begin(), d.labels.end(), 1)) == minority);
    return d;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

}  // namespace

TEST_CASE("10 minority against 1000 majority gains 490 synthetic rows") {
    const auto d = imbalanced(10, 1000, 3, 1);
    SmoteConfig cfg{5, 0.5, 2};
    const auto r = smote_resample(d, cfg);
    CHECK(r.parents.size() == 490);
    CHECK(r.data.size() == 1500);
    CHECK(r.data.positives() == 500);
}

TEST_CASE("originals are kept verbatim and first") {
    const auto d = imbalanced(30, 300, 4, 3);
    const auto r = smote_resample(d, SmoteConfig{10, 0.5, 1});
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(std::equal(d.x.row(i).begin(), d.x.row(i).end(), r.data.x.row(i).begin()));
        CHECK(r.data.labels[i] == d.labels[i]);
        CHECK(r.data.company_ids[i] == d.company_ids[i]);
    }
    for (std::size_t i = d.size(); i < r.data.size(); ++i) CHECK(r.data.labels[i] == 1);
}

TEST_CASE("duplicated minority points give duplicates") {
    auto d = imbalanced(12, 100, 2, 4);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.labels[i] == 1) {
            d.x(i, 0) = 0.25;
            d.x(i, 1) = -3.0;
        }
    const auto r = smote_resample(d, SmoteConfig{3, 0.5, 9});
    REQUIRE(!r.parents.empty());
    for (std::size_t i = d.size(); i < r.data.size(); ++i) {
        CHECK(r.data.x(i, 0) == 0.25);
        CHECK(r.data.x(i, 1) == -3.0);
    }
}

TEST_CASE("synthetic rows lie on the segment to one of the k nearest minority neighbours") {
    const auto d = imbalanced(40, 400, 5, 6);
    const std::size_t k = 7;
    const auto r = smote_resample(d, SmoteConfig{k, 0.5, 11});
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.labels[i] == 1) minority.push_back(i);

    for (std::size_t s = 0; s < r.parents.size(); ++s) {
        const auto& p = r.parents[s];
        REQUIRE(d.labels[p.base] == 1);
        REQUIRE(d.labels[p.neighbor] == 1);
        CHECK(p.base != p.neighbor);
        CHECK(p.gap >= 0.0);
        CHECK(p.gap <= 1.0);
        const auto syn = r.data.x.row(d.size() + s);
        for (std::size_t j = 0; j < d.x.cols(); ++j) {
            const double lo = std::min(d.x(p.base, j), d.x(p.neighbor, j));
            const double hi = std::max(d.x(p.base, j), d.x(p.neighbor, j));
            CHECK(syn[j] >= lo - 1e-12);
            CHECK(syn[j] <= hi + 1e-12);
        }
        // Brute-force neighbour check: fewer than k other minority rows are strictly closer.
        const double dn = sq_dist(d.x.row(p.base), d.x.row(p.neighbor));
        std::size_t closer = 0;
        for (auto m : minority)
            if (m != p.base && sq_dist(d.x.row(p.base), d.x.row(m)) < dn) ++closer;
        CHECK(closer < k);
    }
}

TEST_CASE("target already met returns the input unchanged") {
    const auto d = imbalanced(60, 100, 2, 7);
    const auto r = smote_resample(d, SmoteConfig{5, 0.5, 1});
    CHECK(r.parents.empty());
    CHECK(r.data.x == d.x);
}

TEST_CASE("too few minority rows for k") {
    const auto d = imbalanced(10, 1000, 2, 8);
    CHECK_THROWS_WITH_AS(smote_resample(d, SmoteConfig{10, 0.5, 1}), doctest::Contains("smaller k"), Error);
    CHECK_NOTHROW(smote_resample(d, SmoteConfig{9, 0.5, 1}));
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS((SmoteConfig{0, 0.5, 1}).validate(), Error);
    CHECK_THROWS_AS((SmoteConfig{3, 0.0, 1}).validate(), Error);
    CHECK_THROWS_AS((SmoteConfig{3, 1.5, 1}).validate(), Error);
    CHECK_NOTHROW((SmoteConfig{3, 1.0, 1}).validate());
}

TEST_CASE("same seed, same output; different seed, different output") {
    const auto d = imbalanced(20, 200, 3, 9);
    const auto a = smote_resample(d, SmoteConfig{5, 0.5, 1});
    const auto b = smote_resample(d, SmoteConfig{5, 0.5, 1});
    const auto c = smote_resample(d, SmoteConfig{5, 0.5, 2});
    CHECK(a.data.x == b.data.x);
    CHECK(a.data.x != c.data.x);
}

TEST_CASE("parents sidecar lists one row per synthetic point") {
    const auto d = imbalanced(15, 100, 2, 10);
    const auto r = smote_resample(d, SmoteConfig{4, 0.5, 1});
    std::stringstream out;
    write_parents(out, r, d.size());
    const auto t = csv::parse(out);
    REQUIRE(t.rows.size() == r.parents.size());
    CHECK(t.header == std::vector<std::string>{"synthetic_row", "base_row", "neighbor_row", "gap"});
    CHECK(t.rows[0][0] == std::to_string(d.size()));
    CHECK(csv::parse_double(t.rows[0][3], "gap") == r.parents[0].gap);
}
