#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/dataprep.hpp"
#include "riskalign/matrix.hpp"
#include "riskalign/tree.hpp"

namespace riskalign {

enum class ModelKind { logistic, adaboost, random_forest, gbt };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // lr | adaboost | rf | gbt

struct LogisticParams {
    double learning_rate = 0.5;
    int epochs = 500;
    double l2 = 1e-4;
};

struct AdaBoostParams {
    double learning_rate = 0.8;
    int n_estimators = 100;
    int max_depth = 1;
};

struct ForestParams {
    int n_estimators = 1500;
    int max_depth = 12;
    double bootstrap_fraction = 1.0;
    std::size_t min_samples_leaf = 1;
};

struct BoostingParams {
    double learning_rate = 0.1;
    int n_estimators = 100;
    int max_depth = 10;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double gamma = 0.7;
    double lambda = 1.0;
    std::size_t min_samples_leaf = 1;
};

using Hyperparameters = std::variant<LogisticParams, AdaBoostParams, ForestParams, BoostingParams>;

ModelKind kind_of(const Hyperparameters& h);
Hyperparameters default_hyperparameters(ModelKind kind);
void validate(const Hyperparameters& h);
// Reads the fields present in j over the defaults of `kind`.
Hyperparameters hyperparameters_from_json(ModelKind kind, const nlohmann::json& j);
nlohmann::json to_json(const Hyperparameters& h);

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
};

struct AdaBoostModel {
    std::vector<Tree> learners;
    std::vector<double> alphas;
};

struct ForestModel {
    std::vector<Tree> trees;
};

struct BoostingModel {
    double base_score = 0.0;  // logit of the training positive rate
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    std::vector<double> training_loss;  // regularized loss after each round, index 0 = base score only
};

using ModelParams = std::variant<LogisticModel, AdaBoostModel, ForestModel, BoostingModel>;

/// A trained classifier. Immutable once built; predict_* are const and thread-safe.
class FittedModel {
public:
    FittedModel(Hyperparameters hyper, ModelParams params, std::vector<std::string> feature_names,
                std::uint64_t seed);

    ModelKind kind() const { return kind_of(hyper_); }
    const Hyperparameters& hyperparameters() const noexcept { return hyper_; }
    const ModelParams& params() const noexcept { return params_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    std::uint64_t seed() const noexcept { return seed_; }

    // Probability of label 1 per row. Throws on column count mismatch.
    std::vector<double> predict_proba(const Matrix& x) const;
    // Also checks column names against the training features.
    std::vector<double> predict_proba(const Dataset& data) const;
    double predict_one(std::span<const double> row) const;

    nlohmann::json to_json() const;
    static FittedModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static FittedModel load(const std::filesystem::path& path);

private:
    Hyperparameters hyper_;
    ModelParams params_;
    std::vector<std::string> feature_names_;
    std::uint64_t seed_ = 0;
};

// Throws Error on single-class labels or non-finite training loss.
FittedModel fit(const Dataset& train, const Hyperparameters& hyper, std::uint64_t seed);

// label 1 iff probability >= threshold; threshold must lie in [0,1].
std::vector<int> classify(std::span<const double> probabilities, double threshold = 0.5);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

// Mean logistic loss plus (l2/2)*|w|^2 (bias unpenalised), with its analytic gradient.
LossAndGradient logistic_loss_and_gradient(const Matrix& x, std::span<const int> labels,
                                           std::span<const double> weights, double bias, double l2);

double sigmoid(double z);

}  // namespace riskalign
