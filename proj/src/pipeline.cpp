#include "riskalign/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "riskalign/alignment.hpp"
#include "riskalign/csv.hpp"
#include "riskalign/error.hpp"
#include "riskalign/grading.hpp"
#include "riskalign/metrics.hpp"
#include "riskalign/random.hpp"
#include "riskalign/shapley.hpp"

namespace riskalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <class F>
auto stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::string grade_key(const std::string& id, int year) { return id + "\x1f" + std::to_string(year); }

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.generator.seed = derive_seed(c.seed, "generate");
    c.split.seed = derive_seed(c.seed, "split");
    c.smote.seed = derive_seed(c.seed, "smote");

    if (j.contains("generator")) riskalign::from_json(j.at("generator"), c.generator);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        if (s.contains("train_years"))
            c.split.train_years = {s.at("train_years").at(0).get<int>(), s.at("train_years").at(1).get<int>()};
        if (s.contains("validation_years"))
            c.split.validation_years = {s.at("validation_years").at(0).get<int>(),
                                        s.at("validation_years").at(1).get<int>()};
        c.split.test_fraction = s.value("test_fraction", c.split.test_fraction);
        c.split.seed = s.value("seed", c.split.seed);
    }
    c.split.validate();
    if (j.contains("smote")) {
        const auto& s = j.at("smote");
        c.smote.k = s.value("k", c.smote.k);
        c.smote.target_ratio = s.value("target_ratio", c.smote.target_ratio);
        c.smote.seed = s.value("seed", c.smote.seed);
    }
    c.smote.validate();
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("hyperparameters"))
        for (const auto& [name, params] : j.at("hyperparameters").items()) {
            const auto kind = parse_model_kind(name);
            c.hyperparameters.insert_or_assign(kind, hyperparameters_from_json(kind, params));
        }
    if (j.contains("explained_model")) c.explained_model = parse_model_kind(j.at("explained_model").get<std::string>());
    if (j.contains("attribution")) {
        const auto& a = j.at("attribution");
        c.attribution.background_size = a.value("background_size", c.attribution.background_size);
        c.attribution.instances = a.value("instances", c.attribution.instances);
        c.attribution.group_countries = a.value("group_countries", c.attribution.group_countries);
        c.attribution.max_features = a.value("max_features", c.attribution.max_features);
    }
    if (j.contains("grading")) {
        const auto& g = j.at("grading");
        const auto mode = g.value("mode", std::string("calibrate"));
        if (mode != "calibrate" && mode != "fixed") throw Error("grading mode must be 'calibrate' or 'fixed'");
        c.grading.fixed = mode == "fixed";
        if (c.grading.fixed) c.grading.intervals = resolve(base_dir, g.at("intervals").get<std::string>());
    }
    if (j.contains("survey")) c.survey = resolve(base_dir, j.at("survey").get<std::string>());
    if (std::find(c.models.begin(), c.models.end(), c.explained_model) == c.models.end())
        throw Error("explained_model must be one of the trained models");
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path.string() + "'");
    return from_json(json::parse(in), path.parent_path());
}

json RunConfig::to_json() const {
    json hyper = json::object();
    for (auto kind : models) hyper[std::string(to_string(kind))] = riskalign::to_json(this->hyper(kind));
    json model_names = json::array();
    for (auto kind : models) model_names.push_back(std::string(to_string(kind)));
    return {
        {"seed", seed},
        {"generator", generator},
        {"split",
         {{"train_years", {split.train_years.first, split.train_years.last}},
          {"validation_years", {split.validation_years.first, split.validation_years.last}},
          {"test_fraction", split.test_fraction},
          {"seed", split.seed}}},
        {"smote", {{"k", smote.k}, {"target_ratio", smote.target_ratio}, {"seed", smote.seed}}},
        {"models", model_names},
        {"hyperparameters", hyper},
        {"explained_model", std::string(to_string(explained_model))},
        {"attribution",
         {{"background_size", attribution.background_size},
          {"instances", attribution.instances},
          {"group_countries", attribution.group_countries},
          {"max_features", attribution.max_features}}},
        {"grading",
         {{"mode", grading.fixed ? "fixed" : "calibrate"}, {"intervals", grading.intervals.generic_string()}}},
        {"survey", survey.filename().generic_string()},
    };
}

Hyperparameters RunConfig::hyper(ModelKind kind) const {
    const auto it = hyperparameters.find(kind);
    return it == hyperparameters.end() ? default_hyperparameters(kind) : it->second;
}

std::uint64_t RunConfig::model_seed(ModelKind kind) const {
    return derive_seed(seed, "train-" + std::string(to_string(kind)));
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(to_json().dump())));
    return buf;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(bytes)));
    return buf;
}

json run_pipeline(const RunConfig& config, const fs::path& out_dir) {
    fs::create_directories(out_dir / "models");
    std::vector<std::string> artifacts;
    auto artifact = [&](const std::string& name) {
        artifacts.push_back(name);
        return out_dir / name;
    };

    json bundle;
    bundle["config_hash"] = config.hash();
    bundle["config"] = config.to_json();

    const auto panel = stage("generate", [&] {
        auto p = generate_panel(config.generator);
        write_records(artifact("raw_records.csv"), p.records);
        std::ofstream ref(artifact("reference_grades.csv"));
        write_reference_grades(ref, synthesize_reference_grades(p, derive_seed(config.seed, "reference")));
        return p;
    });

    const auto prepared = stage("prepare", [&] {
        PrepareConfig pc{config.split, config.generator.countries};
        auto data = prepare(panel.records, pc);
        write_dataset(artifact("train.csv"), data.train);
        write_dataset(artifact("test.csv"), data.test);
        write_dataset(artifact("validation.csv"), data.validation);
        write_json(artifact("prepare.json"), data.sidecar());
        return data;
    });

    stage("prepare", [&] {
        json rates = json::array();
        for (const auto& r : default_rate_report(label_records(panel.records)))
            rates.push_back({{"year", r.year}, {"companies", r.companies}, {"defaults", r.defaults}, {"rate", r.rate}});
        bundle["default_rates"] = rates;
        bundle["rejections"] = prepared.rejections;
        return 0;
    });

    const auto resampled = stage("resample", [&] {
        auto rs = smote_resample(prepared.train, config.smote);
        write_dataset(artifact("train_resampled.csv"), rs.data);
        std::ofstream parents(artifact("smote_parents.csv"));
        write_parents(parents, rs, prepared.train.size());
        return rs;
    });

    struct Trained {
        ModelKind kind;
        FittedModel plain;
        FittedModel resampled;
    };
    std::vector<Trained> trained;
    stage("train", [&] {
        for (auto kind : config.models) {
            const auto hyper = config.hyper(kind);
            const auto name = std::string(to_string(kind));
            auto plain = fit(prepared.train, hyper, config.model_seed(kind));
            auto rs = fit(resampled.data, hyper, config.model_seed(kind));
            plain.save(artifact("models/" + name + "_wrs.json"));
            rs.save(artifact("models/" + name + "_rs.json"));
            trained.push_back({kind, std::move(plain), std::move(rs)});
        }
        return 0;
    });

    stage("evaluate", [&] {
        json rows = json::array();
        for (const auto& t : trained) {
            const std::pair<const char*, std::pair<const FittedModel*, const Dataset*>> settings[] = {
                {"WRS", {&t.plain, &prepared.test}},
                {"WRS+VS", {&t.plain, &prepared.validation}},
                {"RS", {&t.resampled, &prepared.test}},
                {"RS+VS", {&t.resampled, &prepared.validation}},
            };
            for (const auto& [setting, pair] : settings) {
                const auto& [model, data] = pair;
                const auto report = evaluate(data->labels, model->predict_proba(*data));
                json row = report;
                row["model"] = std::string(to_string(t.kind));
                row["setting"] = setting;
                rows.push_back(row);
            }
        }
        bundle["performance"] = rows;
        write_json(artifact("evaluation.json"), rows);
        return 0;
    });

    const auto& explained = std::find_if(trained.begin(), trained.end(), [&](const Trained& t) {
                                return t.kind == config.explained_model;
                            })->resampled;

    const auto attribution = stage("explain", [&] {
        AttributionConfig ac;
        ac.background = sample_background(prepared.train.x, config.attribution.background_size,
                                          derive_seed(config.seed, "explain"));
        ac.players = make_players(prepared.train.feature_names, config.attribution.group_countries);
        ac.max_features = config.attribution.max_features;
        const auto instances = sample_background(prepared.test.x, config.attribution.instances,
                                                 derive_seed(config.seed, "explain-instances"));
        auto report = global_importance(probability_predictor(explained), instances, ac);
        write_json(artifact("attributions.json"), report);
        return report;
    });
    bundle["importance"] = {{"players", attribution.players},
                            {"importance", attribution.importance},
                            {"ranking", attribution.ranking},
                            {"base_value", attribution.base_value}};

    stage("map-grades", [&] {
        std::unordered_map<std::string, Grade> reference;
        for (const auto& g : read_reference_grades(out_dir / "reference_grades.csv"))
            if (g.statement_year) reference.emplace(grade_key(g.company_id, *g.statement_year), g.grade);
        auto paired = [&](const Dataset& d) {
            std::vector<Grade> grades;
            std::vector<double> probs;
            const auto p = explained.predict_proba(d);
            for (std::size_t i = 0; i < d.size(); ++i) {
                const auto it = reference.find(grade_key(d.company_ids[i], d.years[i]));
                if (it == reference.end()) continue;
                grades.push_back(it->second);
                probs.push_back(p[i]);
            }
            return std::pair{grades, probs};
        };
        const auto [cal_grades, cal_probs] = paired(prepared.test);
        const auto cal = config.grading.fixed ? load_fixed_intervals(config.grading.intervals)
                                              : calibrate(cal_grades, cal_probs);
        const auto [val_grades, val_probs] = paired(prepared.validation);
        std::vector<Grade> mapped;
        for (double p : val_probs) mapped.push_back(assign_grade(p, cal));
        const auto confusion = grade_confusion(val_grades, mapped);
        json g = {{"calibration", cal}, {"confusion", confusion}};
        write_json(artifact("grading.json"), g);
        bundle["grading"] = g;
        return 0;
    });

    stage("align", [&] {
        const auto survey = load_survey(config.survey);
        const auto alignment = align(survey, attribution);
        write_json(artifact("alignment.json"), alignment);
        bundle["alignment"] = alignment;
        return 0;
    });

    stage("report", [&] {
        std::ostringstream perf;
        csv::write_row(perf, {"model", "setting", "n", "accuracy", "precision", "recall", "f1", "auc"});
        for (const auto& r : bundle["performance"])
            csv::write_row(perf, {r["model"].get<std::string>(), r["setting"].get<std::string>(),
                                  std::to_string(r["n"].get<std::size_t>()), csv::format_double(r["accuracy"]),
                                  csv::format_double(r["precision"]), csv::format_double(r["recall"]),
                                  csv::format_double(r["f1"]),
                                  r["auc"].is_null() ? "" : csv::format_double(r["auc"])});
        write_text(artifact("performance.csv"), perf.str());

        std::ostringstream rates;
        csv::write_row(rates, {"year", "companies", "defaults", "rate"});
        for (const auto& r : bundle["default_rates"])
            csv::write_row(rates, {std::to_string(r["year"].get<int>()), std::to_string(r["companies"].get<std::size_t>()),
                                   std::to_string(r["defaults"].get<std::size_t>()), csv::format_double(r["rate"])});
        write_text(artifact("default_rate.csv"), rates.str());

        std::ostringstream conf;
        csv::write_row(conf, {"reference", "A", "B", "C", "D", "E", "F"});
        const auto& counts = bundle["grading"]["confusion"]["counts"];
        for (std::size_t g = 0; g < kGradeCount; ++g) {
            std::vector<std::string> cells{std::string(1, to_char(kGrades[g]))};
            for (std::size_t m = 0; m < kGradeCount; ++m) cells.push_back(std::to_string(counts[g][m].get<std::size_t>()));
            csv::write_row(conf, cells);
        }
        write_text(artifact("grade_confusion.csv"), conf.str());

        std::ostringstream imp;
        csv::write_row(imp, {"rank", "player", "mean_abs_shap"});
        for (std::size_t r = 0; r < attribution.ranking.size(); ++r) {
            const auto& name = attribution.ranking[r];
            const auto i = static_cast<std::size_t>(
                std::find(attribution.players.begin(), attribution.players.end(), name) - attribution.players.begin());
            csv::write_row(imp, {std::to_string(r + 1), name, csv::format_double(attribution.importance[i])});
        }
        write_text(artifact("importance.csv"), imp.str());

        std::ostringstream al;
        csv::write_row(al, {"feature", "expert_weight", "model_importance", "delta", "expert_rank", "model_rank"});
        const auto& a = bundle["alignment"];
        const auto features = a["features"].get<std::vector<std::string>>();
        const auto er = a["expert_ranking"].get<std::vector<std::string>>();
        const auto mr = a["model_ranking"].get<std::vector<std::string>>();
        for (std::size_t i = 0; i < features.size(); ++i) {
            const auto rank_in = [&](const std::vector<std::string>& v) {
                return std::to_string(std::find(v.begin(), v.end(), features[i]) - v.begin() + 1);
            };
            csv::write_row(al, {features[i], csv::format_double(a["expert_weights"][i]),
                                csv::format_double(a["model_importance"][i]), csv::format_double(a["delta"][i]),
                                rank_in(er), rank_in(mr)});
        }
        write_text(artifact("alignment.csv"), al.str());

        json manifest = json::object();
        for (const auto& name : artifacts) manifest[name] = file_digest(out_dir / name);
        bundle["artifacts"] = manifest;
        write_json(out_dir / "report.json", bundle);
        return 0;
    });
    return bundle;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

std::string format_fraction(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    return buf;
}

namespace {

bool has_rows(const json& bundle, const char* key) {
    return bundle.contains(key) && !bundle.at(key).is_null() && !bundle.at(key).empty();
}

void omitted(std::ostringstream& out, const char* title) { out << title << "\n  (section omitted: no data)\n\n"; }

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace

std::string format_report(const json& bundle) {
    std::ostringstream out;

    const char* perf_title = "Model performance (accuracy/precision/recall in %, F1 and AUC as fractions)";
    if (has_rows(bundle, "performance")) {
        out << perf_title << "\n";
        out << "  " << pad("model", 10) << pad("setting", 9) << pad("accuracy", 10) << pad("precision", 11)
            << pad("recall", 9) << pad("f1", 9) << "auc\n";
        for (const auto& r : bundle.at("performance")) {
            out << "  " << pad(r.at("model").get<std::string>(), 10) << pad(r.at("setting").get<std::string>(), 9)
                << pad(format_percent(r.at("accuracy")), 10) << pad(format_percent(r.at("precision")), 11)
                << pad(format_percent(r.at("recall")), 9) << pad(format_fraction(r.at("f1")), 9)
                << (r.at("auc").is_null() ? std::string("n/a") : format_fraction(r.at("auc"))) << "\n";
        }
        out << "\n";
    } else {
        omitted(out, perf_title);
    }

    const char* rate_title = "Default rate by statement year";
    if (has_rows(bundle, "default_rates")) {
        out << rate_title << "\n  " << pad("year", 6) << pad("companies", 11) << pad("defaults", 10) << "rate %\n";
        for (const auto& r : bundle.at("default_rates"))
            out << "  " << pad(std::to_string(r.at("year").get<int>()), 6)
                << pad(std::to_string(r.at("companies").get<std::size_t>()), 11)
                << pad(std::to_string(r.at("defaults").get<std::size_t>()), 10) << format_percent(r.at("rate")) << "\n";
        out << "\n";
    } else {
        omitted(out, rate_title);
    }

    const char* grade_title = "Grade mapping (rows: reference grade, columns: mapped grade)";
    if (has_rows(bundle, "grading")) {
        const auto& g = bundle.at("grading");
        out << grade_title << "\n  intervals:";
        for (const auto& iv : g.at("calibration").at("intervals"))
            out << " " << iv.at("grade").get<std::string>() << "=[" << format_fraction(iv.at("lower")) << ","
                << format_fraction(iv.at("upper")) << "]";
        out << "\n  " << pad("", 4);
        for (char c : std::string("ABCDEF")) out << pad(std::string(1, c), 8);
        out << "\n";
        const auto& counts = g.at("confusion").at("counts");
        for (std::size_t r = 0; r < kGradeCount; ++r) {
            out << "  " << pad(std::string(1, static_cast<char>('A' + r)), 4);
            for (std::size_t c = 0; c < kGradeCount; ++c) out << pad(std::to_string(counts[r][c].get<std::size_t>()), 8);
            out << "\n";
        }
        const auto& conf = g.at("confusion");
        out << "  riskier " << format_percent(conf.at("riskier_fraction")) << "%, safer "
            << format_percent(conf.at("safer_fraction")) << "%, equal " << format_percent(conf.at("equal_fraction"))
            << "%, critical underestimation " << conf.at("critical_underestimation").get<std::size_t>() << "\n\n";
    } else {
        omitted(out, grade_title);
    }

    const char* imp_title = "Global feature importance (mean |SHAP|)";
    if (has_rows(bundle, "importance")) {
        const auto& imp = bundle.at("importance");
        const auto players = imp.at("players").get<std::vector<std::string>>();
        const auto values = imp.at("importance").get<std::vector<double>>();
        out << imp_title << "\n";
        std::size_t rank = 0;
        for (const auto& name : imp.at("ranking")) {
            const auto i = static_cast<std::size_t>(std::find(players.begin(), players.end(), name.get<std::string>()) -
                                                    players.begin());
            out << "  " << pad(std::to_string(++rank), 4) << pad(name.get<std::string>(), 20)
                << format_fraction(values[i]) << "\n";
        }
        out << "\n";
    } else {
        omitted(out, imp_title);
    }

    const char* align_title = "Expert alignment";
    if (has_rows(bundle, "alignment")) {
        const auto& a = bundle.at("alignment");
        auto opt = [](const json& v) { return v.is_null() ? std::string("n/a") : format_fraction(v); };
        out << align_title << "\n  spearman " << opt(a.at("spearman")) << ", kendall tau-b "
            << opt(a.at("kendall_tau_b")) << ", top-3 overlap " << format_fraction(a.at("top3_overlap"))
            << ", top-5 overlap " << format_fraction(a.at("top5_overlap")) << "\n";
        out << "  " << pad("feature", 20) << pad("expert", 8) << pad("model", 10) << "delta\n";
        const auto features = a.at("features").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < features.size(); ++i)
            out << "  " << pad(features[i], 20) << pad(csv::format_double(a.at("expert_weights")[i]), 8)
                << pad(format_fraction(a.at("model_importance")[i]), 10) << format_fraction(a.at("delta")[i]) << "\n";
        out << "\n";
    } else {
        omitted(out, align_title);
    }
    return out.str();
}

}  // namespace riskalign
