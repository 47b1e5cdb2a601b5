#include "riskalign/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// log(1 + e^z)
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double log_loss(int label, double margin) { return softplus(margin) - label * margin; }

void require_two_classes(std::span<const int> labels) {
    bool zero = false;
    bool one = false;
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
        (y ? one : zero) = true;
    }
    if (!zero || !one) throw Error("training labels contain a single class");
}

std::vector<double> to_double(std::span<const int> labels) { return {labels.begin(), labels.end()}; }

LogisticModel fit_logistic(const Dataset& train, const LogisticParams& p) {
    LogisticModel m;
    m.weights.assign(train.x.cols(), 0.0);
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
        const auto lg = logistic_loss_and_gradient(train.x, train.labels, m.weights, m.bias, p.l2);
        if (!std::isfinite(lg.loss)) throw Error("non-finite logistic loss at epoch " + std::to_string(epoch));
        for (std::size_t j = 0; j < m.weights.size(); ++j) m.weights[j] -= p.learning_rate * lg.grad_weights[j];
        m.bias -= p.learning_rate * lg.grad_bias;
    }
    return m;
}

AdaBoostModel fit_adaboost(const Dataset& train, const AdaBoostParams& p, std::uint64_t seed) {
    const std::size_t n = train.size();
    const auto y = to_double(train.labels);
    const SortedColumns sorted(train.x);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<int> h(n);
    AdaBoostModel m;
    for (int round = 0; round < p.n_estimators; ++round) {
        TreeConfig cfg{.max_depth = p.max_depth, .seed = derive_seed(seed, static_cast<std::uint64_t>(round))};
        Tree tree = fit_gini_tree(train.x, sorted, y, w, cfg);
        double total = 0.0;
        double miss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = tree.predict(train.x.row(i)) >= 0.5 ? 1 : 0;
            total += w[i];
            if (h[i] != train.labels[i]) miss += w[i];
        }
        const double err = miss / total;
        if (err <= 0.0) {
            m.learners.push_back(std::move(tree));
            m.alphas.push_back(1.0);
            break;
        }
        if (err >= 0.5) break;  // no better than chance
        const double alpha = p.learning_rate * std::log((1.0 - err) / err);
        if (!std::isfinite(alpha)) throw Error("non-finite AdaBoost weight at round " + std::to_string(round));
        m.learners.push_back(std::move(tree));
        m.alphas.push_back(alpha);
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (h[i] != train.labels[i]) w[i] *= std::exp(alpha);
            norm += w[i];
        }
        for (auto& wi : w) wi /= norm;
    }
    if (m.learners.empty()) throw Error("AdaBoost weak learner is no better than chance");
    return m;
}

ForestModel fit_forest(const Dataset& train, const ForestParams& p, std::uint64_t seed) {
    const std::size_t n = train.size();
    const auto y = to_double(train.labels);
    const SortedColumns sorted(train.x);
    const double m_features = static_cast<double>(train.x.cols());
    const auto n_boot = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(p.bootstrap_fraction * static_cast<double>(n))));
    ForestModel m;
    m.trees.reserve(static_cast<std::size_t>(p.n_estimators));
    std::vector<double> counts(n);
    for (int t = 0; t < p.n_estimators; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::fill(counts.begin(), counts.end(), 0.0);
        for (std::size_t k = 0; k < n_boot; ++k) counts[rng.below(n)] += 1.0;
        TreeConfig cfg{.max_depth = p.max_depth,
                       .min_samples_leaf = p.min_samples_leaf,
                       .feature_subsample_fraction = std::floor(std::sqrt(m_features)) / m_features,
                       .per_split_sampling = true,
                       .seed = rng.next()};
        m.trees.push_back(fit_gini_tree(train.x, sorted, y, counts, cfg));
    }
    return m;
}

BoostingModel fit_boosting(const Dataset& train, const BoostingParams& p, std::uint64_t seed) {
    const std::size_t n = train.size();
    const double rate = static_cast<double>(train.positives()) / static_cast<double>(n);
    BoostingModel m;
    m.base_score = std::log(rate / (1.0 - rate));
    m.learning_rate = p.learning_rate;

    const SortedColumns sorted(train.x);
    std::vector<double> margin(n, m.base_score);
    std::vector<double> grad(n);
    std::vector<double> hess(n);
    std::vector<std::uint8_t> active;
    std::vector<std::size_t> rows(n);
    double penalty = 0.0;

    auto total_loss = [&] {
        double loss = penalty;
        for (std::size_t i = 0; i < n; ++i) loss += log_loss(train.labels[i], margin[i]);
        return loss;
    };
    m.training_loss.push_back(total_loss());

    Rng rng(derive_seed(seed, "gbt-rows"));
    const auto n_sub = static_cast<std::size_t>(std::llround(p.subsample * static_cast<double>(n)));
    for (int round = 0; round < p.n_estimators; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double prob = sigmoid(margin[i]);
            grad[i] = prob - train.labels[i];
            hess[i] = prob * (1.0 - prob);
        }
        if (p.subsample < 1.0) {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            active.assign(n, 0);
            for (std::size_t k = 0; k < std::max<std::size_t>(1, n_sub); ++k) {
                const auto j = k + rng.below(n - k);
                std::swap(rows[k], rows[j]);
                active[rows[k]] = 1;
            }
        }
        TreeConfig cfg{.max_depth = p.max_depth,
                       .min_samples_leaf = p.min_samples_leaf,
                       .feature_subsample_fraction = p.colsample_bytree,
                       .criterion = SplitCriterion::second_order,
                       .lambda = p.lambda,
                       .gamma = p.gamma,
                       .seed = derive_seed(seed, static_cast<std::uint64_t>(round))};
        Tree tree = fit_second_order_tree(train.x, sorted, grad, hess, active, cfg);
        for (std::size_t i = 0; i < n; ++i) margin[i] += p.learning_rate * tree.predict(train.x.row(i));
        for (const auto& node : tree.nodes())
            if (node.is_leaf()) penalty += 0.5 * p.lambda * std::pow(p.learning_rate * node.value, 2);
        const double loss = total_loss();
        if (!std::isfinite(loss)) throw Error("non-finite boosting loss at round " + std::to_string(round));
        m.training_loss.push_back(loss);
        m.trees.push_back(std::move(tree));
    }
    return m;
}

nlohmann::json trees_json(const std::vector<Tree>& trees) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : trees) out.push_back(t);
    return out;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::logistic: return "lr";
        case ModelKind::adaboost: return "adaboost";
        case ModelKind::random_forest: return "rf";
        case ModelKind::gbt: return "gbt";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "lr") return ModelKind::logistic;
    if (text == "adaboost") return ModelKind::adaboost;
    if (text == "rf") return ModelKind::random_forest;
    if (text == "gbt") return ModelKind::gbt;
    throw Error("unknown model kind '" + std::string(text) + "' (expected lr, adaboost, rf or gbt)");
}

ModelKind kind_of(const Hyperparameters& h) { return static_cast<ModelKind>(h.index()); }

Hyperparameters default_hyperparameters(ModelKind kind) {
    switch (kind) {
        case ModelKind::logistic: return LogisticParams{};
        case ModelKind::adaboost: return AdaBoostParams{};
        case ModelKind::random_forest: return ForestParams{};
        case ModelKind::gbt: return BoostingParams{};
    }
    throw Error("unknown model kind");
}

void validate(const Hyperparameters& h) {
    std::visit(overloaded{
                   [](const LogisticParams& p) {
                       if (!(p.learning_rate > 0.0) || p.epochs < 1 || !(p.l2 >= 0.0))
                           throw Error("lr: learning_rate > 0, epochs >= 1 and l2 >= 0 required");
                   },
                   [](const AdaBoostParams& p) {
                       if (!(p.learning_rate > 0.0) || p.n_estimators < 1 || p.max_depth < 1)
                           throw Error("adaboost: learning_rate > 0, n_estimators >= 1, max_depth >= 1 required");
                   },
                   [](const ForestParams& p) {
                       if (p.n_estimators < 1 || p.max_depth < 1 || !(p.bootstrap_fraction > 0.0) ||
                           p.min_samples_leaf < 1)
                           throw Error("rf: n_estimators, max_depth, min_samples_leaf >= 1 and bootstrap_fraction > 0 required");
                   },
                   [](const BoostingParams& p) {
                       // n_estimators = 0 is allowed: the model is the base score alone.
                       if (!(p.learning_rate > 0.0) || p.n_estimators < 0 || p.max_depth < 1 ||
                           !(p.subsample > 0.0 && p.subsample <= 1.0) ||
                           !(p.colsample_bytree > 0.0 && p.colsample_bytree <= 1.0) || !(p.gamma >= 0.0) ||
                           !(p.lambda >= 0.0) || p.min_samples_leaf < 1)
                           throw Error("gbt: invalid hyperparameters");
                   },
               },
               h);
}

Hyperparameters hyperparameters_from_json(ModelKind kind, const nlohmann::json& j) {
    Hyperparameters h = default_hyperparameters(kind);
    if (!j.is_object()) throw Error("hyperparameters must be a JSON object");
    const auto known = to_json(h);
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw Error("unknown hyperparameter '" + key + "' for " + std::string(to_string(kind)));
    std::visit(overloaded{
                   [&](LogisticParams& p) {
                       p.learning_rate = j.value("learning_rate", p.learning_rate);
                       p.epochs = j.value("epochs", p.epochs);
                       p.l2 = j.value("l2", p.l2);
                   },
                   [&](AdaBoostParams& p) {
                       p.learning_rate = j.value("learning_rate", p.learning_rate);
                       p.n_estimators = j.value("n_estimators", p.n_estimators);
                       p.max_depth = j.value("max_depth", p.max_depth);
                   },
                   [&](ForestParams& p) {
                       p.n_estimators = j.value("n_estimators", p.n_estimators);
                       p.max_depth = j.value("max_depth", p.max_depth);
                       p.bootstrap_fraction = j.value("bootstrap_fraction", p.bootstrap_fraction);
                       p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
                   },
                   [&](BoostingParams& p) {
                       p.learning_rate = j.value("learning_rate", p.learning_rate);
                       p.n_estimators = j.value("n_estimators", p.n_estimators);
                       p.max_depth = j.value("max_depth", p.max_depth);
                       p.subsample = j.value("subsample", p.subsample);
                       p.colsample_bytree = j.value("colsample_bytree", p.colsample_bytree);
                       p.gamma = j.value("gamma", p.gamma);
                       p.lambda = j.value("lambda", p.lambda);
                       p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
                   },
               },
               h);
    validate(h);
    return h;
}

nlohmann::json to_json(const Hyperparameters& h) {
    return std::visit(
        overloaded{
            [](const LogisticParams& p) -> nlohmann::json {
                return {{"learning_rate", p.learning_rate}, {"epochs", p.epochs}, {"l2", p.l2}};
            },
            [](const AdaBoostParams& p) -> nlohmann::json {
                return {{"learning_rate", p.learning_rate}, {"n_estimators", p.n_estimators}, {"max_depth", p.max_depth}};
            },
            [](const ForestParams& p) -> nlohmann::json {
                return {{"n_estimators", p.n_estimators},
                        {"max_depth", p.max_depth},
                        {"bootstrap_fraction", p.bootstrap_fraction},
                        {"min_samples_leaf", p.min_samples_leaf}};
            },
            [](const BoostingParams& p) -> nlohmann::json {
                return {{"learning_rate", p.learning_rate}, {"n_estimators", p.n_estimators},
                        {"max_depth", p.max_depth},         {"subsample", p.subsample},
                        {"colsample_bytree", p.colsample_bytree}, {"gamma", p.gamma},
                        {"lambda", p.lambda},               {"min_samples_leaf", p.min_samples_leaf}};
            },
        },
        h);
}

FittedModel::FittedModel(Hyperparameters hyper, ModelParams params, std::vector<std::string> feature_names,
                         std::uint64_t seed)
    : hyper_(std::move(hyper)), params_(std::move(params)), feature_names_(std::move(feature_names)), seed_(seed) {
    if (hyper_.index() != params_.index()) throw Error("model parameters do not match the hyperparameter kind");
    if (const auto* lr = std::get_if<LogisticModel>(&params_); lr && lr->weights.size() != feature_names_.size())
        throw Error("logistic weights do not match the feature list");
}

double FittedModel::predict_one(std::span<const double> row) const {
    return std::visit(overloaded{
                          [&](const LogisticModel& m) {
                              double z = m.bias;
                              for (std::size_t j = 0; j < row.size(); ++j) z += m.weights[j] * row[j];
                              return sigmoid(z);
                          },
                          [&](const AdaBoostModel& m) {
                              double vote = 0.0;
                              double total = 0.0;
                              for (std::size_t t = 0; t < m.learners.size(); ++t) {
                                  vote += m.alphas[t] * (m.learners[t].predict(row) >= 0.5 ? 1.0 : -1.0);
                                  total += m.alphas[t];
                              }
                              return sigmoid(vote / total);
                          },
                          [&](const ForestModel& m) {
                              double sum = 0.0;
                              for (const auto& t : m.trees) sum += t.predict(row);
                              return sum / static_cast<double>(m.trees.size());
                          },
                          [&](const BoostingModel& m) {
                              double f = m.base_score;
                              for (const auto& t : m.trees) f += m.learning_rate * t.predict(row);
                              return sigmoid(f);
                          },
                      },
                      params_);
}

std::vector<double> FittedModel::predict_proba(const Matrix& x) const {
    if (x.cols() != feature_names_.size())
        throw Error("model expects " + std::to_string(feature_names_.size()) + " columns, got " +
                    std::to_string(x.cols()));
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = std::clamp(predict_one(x.row(r)), 0.0, 1.0);
    return out;
}

std::vector<double> FittedModel::predict_proba(const Dataset& data) const {
    if (data.feature_names != feature_names_) throw Error("row columns do not match the model's training features");
    return predict_proba(data.x);
}

nlohmann::json FittedModel::to_json() const {
    nlohmann::json params = std::visit(
        overloaded{
            [](const LogisticModel& m) -> nlohmann::json { return {{"weights", m.weights}, {"bias", m.bias}}; },
            [](const AdaBoostModel& m) -> nlohmann::json {
                return {{"alphas", m.alphas}, {"learners", trees_json(m.learners)}};
            },
            [](const ForestModel& m) -> nlohmann::json { return {{"trees", trees_json(m.trees)}}; },
            [](const BoostingModel& m) -> nlohmann::json {
                return {{"base_score", m.base_score},
                        {"learning_rate", m.learning_rate},
                        {"training_loss", m.training_loss},
                        {"trees", trees_json(m.trees)}};
            },
        },
        params_);
    return {{"kind", std::string(to_string(kind()))},
            {"hyperparameters", riskalign::to_json(hyper_)},
            {"feature_names", feature_names_},
            {"seed", seed_},
            {"parameters", params}};
}

FittedModel FittedModel::from_json(const nlohmann::json& j) {
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    auto hyper = hyperparameters_from_json(kind, j.at("hyperparameters"));
    const auto& p = j.at("parameters");
    ModelParams params;
    switch (kind) {
        case ModelKind::logistic:
            params = LogisticModel{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>()};
            break;
        case ModelKind::adaboost:
            params = AdaBoostModel{p.at("learners").get<std::vector<Tree>>(), p.at("alphas").get<std::vector<double>>()};
            break;
        case ModelKind::random_forest:
            params = ForestModel{p.at("trees").get<std::vector<Tree>>()};
            break;
        case ModelKind::gbt:
            params = BoostingModel{p.at("base_score").get<double>(), p.at("learning_rate").get<double>(),
                                   p.at("trees").get<std::vector<Tree>>(),
                                   p.value("training_loss", std::vector<double>{})};
            break;
    }
    return FittedModel(std::move(hyper), std::move(params), j.at("feature_names").get<std::vector<std::string>>(),
                       j.at("seed").get<std::uint64_t>());
}

void FittedModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << to_json().dump() << '\n';
}

FittedModel FittedModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return from_json(nlohmann::json::parse(in));
}

FittedModel fit(const Dataset& train, const Hyperparameters& hyper, std::uint64_t seed) {
    validate(hyper);
    if (train.size() == 0) throw Error("training set is empty");
    require_two_classes(train.labels);
    ModelParams params = std::visit(
        overloaded{
            [&](const LogisticParams& p) -> ModelParams { return fit_logistic(train, p); },
            [&](const AdaBoostParams& p) -> ModelParams { return fit_adaboost(train, p, seed); },
            [&](const ForestParams& p) -> ModelParams { return fit_forest(train, p, seed); },
            [&](const BoostingParams& p) -> ModelParams { return fit_boosting(train, p, seed); },
        },
        hyper);
    return FittedModel(hyper, std::move(params), train.feature_names, seed);
}

std::vector<int> classify(std::span<const double> probabilities, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0,1]");
    std::vector<int> out(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
    return out;
}

LossAndGradient logistic_loss_and_gradient(const Matrix& x, std::span<const int> labels,
                                           std::span<const double> weights, double bias, double l2) {
    if (labels.size() != x.rows() || weights.size() != x.cols()) throw Error("logistic problem shape mismatch");
    LossAndGradient out;
    out.grad_weights.assign(x.cols(), 0.0);
    const double n = static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        double z = bias;
        for (std::size_t j = 0; j < row.size(); ++j) z += weights[j] * row[j];
        out.loss += log_loss(labels[r], z);
        const double residual = sigmoid(z) - labels[r];
        for (std::size_t j = 0; j < row.size(); ++j) out.grad_weights[j] += residual * row[j];
        out.grad_bias += residual;
    }
    out.loss /= n;
    out.grad_bias /= n;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        out.grad_weights[j] = out.grad_weights[j] / n + l2 * weights[j];
        norm2 += weights[j] * weights[j];
    }
    out.loss += 0.5 * l2 * norm2;
    return out;
}

}  // namespace riskalign
