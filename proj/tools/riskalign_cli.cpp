#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riskalign/alignment.hpp"
#include "riskalign/error.hpp"
#include "riskalign/grading.hpp"
#include "riskalign/metrics.hpp"
#include "riskalign/pipeline.hpp"
#include "riskalign/random.hpp"
#include "riskalign/shapley.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskalign;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--seed", c.seed, "RNG seed (overrides the config)");
    cmd->add_option("--config", c.config, "run config JSON")->check(CLI::ExistingFile);
    auto* out = cmd->add_option("--out", c.out, "output path");
    if (out_required) out->required();
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return json::parse(in);
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

RunConfig run_config(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig::from_json(json::object()) : RunConfig::load(c.config);
    if (c.seed && c.config.empty()) cfg = RunConfig::from_json(json{{"seed", *c.seed}});
    else if (c.seed) {
        auto j = read_json(c.config);
        j["seed"] = *c.seed;
        cfg = RunConfig::from_json(j, fs::path(c.config).parent_path());
    }
    return cfg;
}

// Runs one stage body, mapping any failure to a "[stage] cause" diagnostic.
template <class F>
void guarded(const char* stage, F&& body) {
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"riskalign: default prediction, attribution and expert alignment on synthetic company panels"};
    app.require_subcommand(1);

    // generate
    Common gen;
    std::string gen_reference;
    auto* generate_cmd = app.add_subcommand("generate", "simulate a company panel");
    add_common(generate_cmd, gen);
    generate_cmd->add_option("--reference", gen_reference, "also write synthetic reference grades here");

    // prepare
    Common prep;
    std::string prep_in;
    auto* prepare_cmd = app.add_subcommand("prepare", "label, compute ratios, split and scale");
    add_common(prepare_cmd, prep);
    prepare_cmd->add_option("--in", prep_in, "raw records CSV")->required()->check(CLI::ExistingFile);

    // resample
    Common res;
    std::string res_in, res_parents;
    std::size_t res_k = 10;
    double res_ratio = 0.5;
    auto* resample_cmd = app.add_subcommand("resample", "SMOTE oversampling of the minority class");
    add_common(resample_cmd, res);
    resample_cmd->add_option("--in", res_in, "dataset CSV")->required()->check(CLI::ExistingFile);
    resample_cmd->add_option("--k", res_k, "nearest neighbours")->capture_default_str();
    resample_cmd->add_option("--ratio", res_ratio, "target minority/majority ratio")->capture_default_str();
    resample_cmd->add_option("--parents", res_parents, "audit sidecar (default <out>.parents.csv)");

    // train
    Common tr;
    std::string tr_model, tr_params, tr_in;
    auto* train_cmd = app.add_subcommand("train", "fit one model");
    add_common(train_cmd, tr);
    train_cmd->add_option("--model", tr_model, "lr | adaboost | rf | gbt")->required();
    train_cmd->add_option("--params", tr_params, "hyperparameter JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--in", tr_in, "training dataset CSV")->required()->check(CLI::ExistingFile);

    // evaluate
    Common ev;
    std::string ev_model, ev_in;
    double ev_threshold = 0.5;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a model on a dataset");
    add_common(evaluate_cmd, ev, false);
    evaluate_cmd->add_option("--model", ev_model, "model JSON")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--in", ev_in, "dataset CSV")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--report", ev.out, "report JSON (same as --out)");
    evaluate_cmd->add_option("--threshold", ev_threshold)->capture_default_str();

    // explain
    Common ex;
    std::string ex_model, ex_in, ex_background;
    bool ex_group = false;
    std::size_t ex_background_size = 100, ex_max_features = 20;
    auto* explain_cmd = app.add_subcommand("explain", "exact Shapley attribution of every input row");
    add_common(explain_cmd, ex);
    explain_cmd->add_option("--model", ex_model, "model JSON")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("--in", ex_in, "rows to explain")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("--background", ex_background, "background rows CSV")->required()->check(CLI::ExistingFile);
    explain_cmd->add_flag("--group-countries", ex_group, "treat the one-hot country columns as one player");
    explain_cmd->add_option("--background-size", ex_background_size, "rows sampled from --background")
        ->capture_default_str();
    explain_cmd->add_option("--max-features", ex_max_features)->capture_default_str();

    // map-grades
    Common mg;
    std::string mg_model, mg_reference, mg_in, mg_fixed, mg_calibrate;
    auto* grades_cmd = app.add_subcommand("map-grades", "map probabilities to rating grades");
    add_common(grades_cmd, mg);
    grades_cmd->add_option("--model", mg_model, "model JSON")->required()->check(CLI::ExistingFile);
    grades_cmd->add_option("--reference", mg_reference, "reference grades CSV")->required()->check(CLI::ExistingFile);
    grades_cmd->add_option("--in", mg_in, "rows to grade")->required()->check(CLI::ExistingFile);
    grades_cmd->add_option("--calibrate-on", mg_calibrate, "rows used for calibration (default --in)")
        ->check(CLI::ExistingFile);
    grades_cmd->add_option("--fixed-intervals", mg_fixed, "published interval table JSON")->check(CLI::ExistingFile);

    // align
    Common al;
    std::string al_survey, al_attribution;
    auto* align_cmd = app.add_subcommand("align", "compare attribution ranking with analyst weights");
    add_common(align_cmd, al);
    align_cmd->add_option("--survey", al_survey, "analyst survey CSV")->required()->check(CLI::ExistingFile);
    align_cmd->add_option("--attribution", al_attribution, "attributions JSON")->required()->check(CLI::ExistingFile);

    // run
    Common rn;
    auto* run_cmd = app.add_subcommand("run", "full pipeline into one output directory");
    add_common(run_cmd, rn);

    // report
    Common rp;
    std::string rp_in;
    auto* report_cmd = app.add_subcommand("report", "print the tables of a report bundle");
    add_common(report_cmd, rp, false);
    report_cmd->add_option("--in", rp_in, "report.json or run directory")->required()->check(CLI::ExistingPath);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate_cmd) {
            guarded("generate", [&] {
                GeneratorConfig cfg;
                if (!gen.config.empty()) {
                    const auto j = read_json(gen.config);
                    if (j.contains("generator")) {
                        cfg = RunConfig::from_json(j, fs::path(gen.config).parent_path()).generator;
                    } else {
                        from_json(j, cfg);
                    }
                }
                if (gen.seed) cfg.seed = *gen.seed;
                cfg.validate();
                const auto panel = generate_panel(cfg);
                write_records(fs::path(gen.out), panel.records);
                if (!gen_reference.empty()) {
                    std::ofstream ref(gen_reference, std::ios::binary);
                    write_reference_grades(ref, synthesize_reference_grades(panel, derive_seed(cfg.seed, "reference")));
                }
                std::fprintf(stderr, "generate: %zu statements\n", panel.records.size());
            });
        } else if (*prepare_cmd) {
            guarded("prepare", [&] {
                const auto cfg = run_config(prep);
                const auto data = prepare(read_records(fs::path(prep_in)), {cfg.split, cfg.generator.countries});
                const fs::path dir(prep.out);
                fs::create_directories(dir);
                write_dataset(dir / "train.csv", data.train);
                write_dataset(dir / "test.csv", data.test);
                write_dataset(dir / "validation.csv", data.validation);
                write_json(dir / "prepare.json", data.sidecar());
                std::fprintf(stderr, "prepare: train %zu, test %zu, validation %zu\n", data.train.size(),
                             data.test.size(), data.validation.size());
            });
        } else if (*resample_cmd) {
            guarded("resample", [&] {
                SmoteConfig cfg{res_k, res_ratio, res.seed.value_or(run_config(res).smote.seed)};
                cfg.validate();
                const auto train = read_dataset(fs::path(res_in));
                const auto result = smote_resample(train, cfg);
                write_dataset(fs::path(res.out), result.data);
                std::ofstream parents(res_parents.empty() ? res.out + ".parents.csv" : res_parents,
                                      std::ios::binary);
                write_parents(parents, result, train.size());
                std::fprintf(stderr, "resample: %zu synthetic rows\n", result.parents.size());
            });
        } else if (*train_cmd) {
            guarded("train", [&] {
                const auto kind = parse_model_kind(tr_model);
                const auto cfg = run_config(tr);
                const auto hyper = tr_params.empty() ? cfg.hyper(kind)
                                                     : hyperparameters_from_json(kind, read_json(tr_params));
                const auto seed = tr.seed.value_or(cfg.model_seed(kind));
                fit(read_dataset(fs::path(tr_in)), hyper, seed).save(tr.out);
            });
        } else if (*evaluate_cmd) {
            guarded("evaluate", [&] {
                const auto model = FittedModel::load(ev_model);
                const auto data = read_dataset(fs::path(ev_in));
                const json report = evaluate(data.labels, model.predict_proba(data), ev_threshold);
                if (ev.out.empty()) std::cout << report.dump(2) << "\n";
                else write_json(ev.out, report);
            });
        } else if (*explain_cmd) {
            guarded("explain", [&] {
                const auto model = FittedModel::load(ex_model);
                const auto rows = read_dataset(fs::path(ex_in));
                const auto background = read_dataset(fs::path(ex_background));
                AttributionConfig ac;
                const auto seed = ex.seed.value_or(derive_seed(run_config(ex).seed, "explain"));
                ac.background = sample_background(background.x, ex_background_size, seed);
                ac.players = make_players(rows.feature_names, ex_group);
                ac.max_features = ex_max_features;
                if (rows.feature_names != model.feature_names())
                    throw Error("input columns do not match the model's features");
                write_json(ex.out, global_importance(probability_predictor(model), rows.x, ac));
            });
        } else if (*grades_cmd) {
            guarded("map-grades", [&] {
                const auto model = FittedModel::load(mg_model);
                std::unordered_map<std::string, Grade> by_id;
                std::unordered_map<std::string, Grade> by_id_year;
                for (const auto& g : read_reference_grades(fs::path(mg_reference))) {
                    if (g.statement_year)
                        by_id_year.insert_or_assign(g.company_id + "@" + std::to_string(*g.statement_year), g.grade);
                    else
                        by_id.insert_or_assign(g.company_id, g.grade);
                }
                auto lookup = [&](const std::string& id, int year) -> std::optional<Grade> {
                    if (auto it = by_id_year.find(id + "@" + std::to_string(year)); it != by_id_year.end())
                        return it->second;
                    if (auto it = by_id.find(id); it != by_id.end()) return it->second;
                    return std::nullopt;
                };
                auto paired = [&](const Dataset& d, std::vector<Grade>& grades, std::vector<double>& probs) {
                    const auto p = model.predict_proba(d);
                    for (std::size_t i = 0; i < d.size(); ++i)
                        if (const auto g = lookup(d.company_ids[i], d.years[i])) {
                            grades.push_back(*g);
                            probs.push_back(p[i]);
                        }
                };
                std::vector<Grade> ref;
                std::vector<double> probs;
                paired(read_dataset(fs::path(mg_in)), ref, probs);
                GradeCalibration cal;
                if (!mg_fixed.empty()) {
                    cal = load_fixed_intervals(mg_fixed);
                } else if (mg_calibrate.empty()) {
                    cal = calibrate(ref, probs);
                } else {
                    std::vector<Grade> cref;
                    std::vector<double> cprobs;
                    paired(read_dataset(fs::path(mg_calibrate)), cref, cprobs);
                    cal = calibrate(cref, cprobs);
                }
                std::vector<Grade> mapped;
                mapped.reserve(probs.size());
                for (double p : probs) mapped.push_back(assign_grade(p, cal));
                write_json(mg.out, json{{"calibration", cal}, {"confusion", grade_confusion(ref, mapped)}});
            });
        } else if (*align_cmd) {
            guarded("align", [&] {
                AttributionReport attribution = read_json(al_attribution).get<AttributionReport>();
                write_json(al.out, align(load_survey(al_survey), attribution));
            });
        } else if (*run_cmd) {
            const auto cfg = [&] {
                std::optional<RunConfig> c;
                guarded("config", [&] { c = run_config(rn); });
                return *c;
            }();
            const auto bundle = run_pipeline(cfg, rn.out);
            std::cout << format_report(bundle);
        } else if (*report_cmd) {
            guarded("report", [&] {
                fs::path in(rp_in);
                if (fs::is_directory(in)) in /= "report.json";
                const auto text = format_report(read_json(in));
                if (rp.out.empty()) {
                    std::cout << text;
                } else {
                    std::ofstream out(rp.out, std::ios::binary);
                    out << text;
                }
            });
        }
    } catch (const StageError& e) {
        std::cerr << "riskalign: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "riskalign: [cli] " << e.what() << "\n";
        return 2;
    }
    return 0;
}
