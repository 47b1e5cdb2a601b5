#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "riskalign/dataprep.hpp"

namespace riskalign {

struct SmoteConfig {
    std::size_t k = 10;
    double target_ratio = 0.5;  // minority / majority after resampling
    std::uint64_t seed = 0;

    void validate() const;
};

// Provenance of one synthetic row: s = x[base] + gap * (x[neighbor] - x[base]).
struct SyntheticParent {
    std::size_t base = 0;
    std::size_t neighbor = 0;
    double gap = 0.0;
};

struct SmoteResult {
    Dataset data;  // originals first, in input order, then synthetic rows
    std::vector<SyntheticParent> parents;
};

/// Oversample label-1 rows by interpolating towards one of their k nearest
/// label-1 neighbours (Euclidean, exact search, distance ties by row index).
/// Adds floor(target_ratio * majority) - minority rows; returns the input
/// unchanged when the target is already met. Throws Error when the minority
/// class has k or fewer rows.
SmoteResult smote_resample(const Dataset& train, const SmoteConfig& config);

// CSV columns: synthetic_row,base_row,neighbor_row,gap
void write_parents(std::ostream& out, const SmoteResult& result, std::size_t original_rows);

}  // namespace riskalign
