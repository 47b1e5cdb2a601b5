#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/dataprep.hpp"
#include "riskalign/models.hpp"
#include "riskalign/smote.hpp"
#include "riskalign/synthgen.hpp"

namespace riskalign {

struct AttributionSettings {
    std::size_t background_size = 100;
    std::size_t instances = 100;
    bool group_countries = true;
    std::size_t max_features = 20;
};

struct GradingSettings {
    bool fixed = false;                  // false: calibrate from reference grades
    std::filesystem::path intervals;     // used when fixed
};

/// Everything a full run needs. Stage seeds left unset in the JSON are
/// derived from `seed`, so one number pins the whole run.
struct RunConfig {
    std::uint64_t seed = 42;
    GeneratorConfig generator;
    SplitSpec split;
    SmoteConfig smote;
    std::vector<ModelKind> models{ModelKind::logistic, ModelKind::adaboost, ModelKind::random_forest, ModelKind::gbt};
    std::map<ModelKind, Hyperparameters> hyperparameters;
    ModelKind explained_model = ModelKind::gbt;
    AttributionSettings attribution;
    GradingSettings grading;
    std::filesystem::path survey;

    // Relative paths in j resolve against base_dir.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    Hyperparameters hyper(ModelKind kind) const;
    std::uint64_t model_seed(ModelKind kind) const;
    std::string hash() const;  // 16 hex digits over the canonical JSON
};

/// generate -> prepare -> resample -> train -> evaluate -> explain -> map-grades -> align.
/// Writes every stage artifact plus report.json and the CSV tables into
/// out_dir, and returns the report bundle. A failing stage throws StageError;
/// files already written are left in place.
nlohmann::json run_pipeline(const RunConfig& config, const std::filesystem::path& out_dir);

// Plain-text tables for a report bundle.
std::string format_report(const nlohmann::json& bundle);
std::string format_percent(double fraction);   // 0.9539 -> "95.39"
std::string format_fraction(double value);     // 0.0536 -> "0.0536"

// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace riskalign
