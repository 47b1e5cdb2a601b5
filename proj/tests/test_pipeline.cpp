#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "riskalign/error.hpp"
#include "riskalign/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskalign;

namespace {

const fs::path kData = RISKALIGN_DATA_DIR;

json small_config(std::uint64_t seed) {
    auto j = json::parse(R"({
      "generator": {"n_companies": 1200, "imbalance_ratio": 30, "signal_strength": 0.9},
      "smote": {"k": 5, "target_ratio": 0.5},
      "models": ["lr", "gbt"],
      "hyperparameters": {
        "lr": {"learning_rate": 0.5, "epochs": 50},
        "gbt": {"n_estimators": 10, "max_depth": 3}
      },
      "attribution": {"background_size": 10, "instances": 8}
    })");
    j["seed"] = seed;
    j["survey"] = (kData / "expert_survey.csv").string();
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("riskalign_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("number formatting follows the report conventions") {
    CHECK(format_percent(0.9539) == "95.39");
    CHECK(format_fraction(0.0536) == "0.0536");
    CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("empty sections are omitted with a notice") {
    const auto text = format_report(json::object());
    CHECK(text.find("Model performance") != std::string::npos);
    CHECK(text.find("(section omitted: no data)") != std::string::npos);
    json bundle{{"performance", json::array()}};
    CHECK(format_report(bundle).find("(section omitted: no data)") != std::string::npos);
}

TEST_CASE("run config derives stage seeds and hashes stably") {
    const auto a = RunConfig::from_json(json{{"seed", 5}});
    const auto b = RunConfig::from_json(json{{"seed", 5}});
    const auto c = RunConfig::from_json(json{{"seed", 6}});
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
    CHECK(a.generator.seed != c.generator.seed);
    CHECK(a.split.seed != a.smote.seed);

    const auto round = RunConfig::from_json(a.to_json());
    CHECK(round.to_json() == a.to_json());

    CHECK_THROWS_AS(RunConfig::from_json(json{{"models", {"lr"}}, {"explained_model", "gbt"}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"models", {"svm"}}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"hyperparameters", {{"gbt", {{"depth", 3}}}}}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"grading", {{"mode", "guess"}}}}), Error);
}

TEST_CASE("demo config loads") {
    const auto cfg = RunConfig::load(kData / "demo_config.json");
    CHECK(cfg.seed == 42);
    CHECK(cfg.models.size() == 4);
    CHECK(cfg.explained_model == ModelKind::gbt);
    CHECK(fs::exists(cfg.survey));
}

TEST_CASE("small end-to-end run is deterministic") {
    const auto cfg = RunConfig::from_json(small_config(3));
    const auto d1 = scratch("run1");
    const auto d2 = scratch("run2");
    const auto bundle = run_pipeline(cfg, d1);
    run_pipeline(cfg, d2);

    for (const char* name : {"report.json", "performance.csv", "default_rate.csv", "grade_confusion.csv",
                             "importance.csv", "alignment.csv", "attributions.json", "models/gbt_rs.json"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(d1 / name));
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
    CHECK(bundle.at("config_hash") == cfg.hash());
    CHECK(bundle.at("performance").size() == 8);  // 2 models x 4 settings
    for (const auto& [name, digest] : bundle.at("artifacts").items()) CHECK(digest == file_digest(d1 / name));

    const auto text = format_report(bundle);
    CHECK(text.find("section omitted") == std::string::npos);
    CHECK(text.find("gbt") != std::string::npos);
}

TEST_CASE("a failing stage is named in the error") {
    auto j = small_config(3);
    j["survey"] = (kData / "no_such_survey.csv").string();
    const auto cfg = RunConfig::from_json(j);
    try {
        run_pipeline(cfg, scratch("fail"));
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(std::string(e.what()).rfind("[align]", 0) == 0);
    }
}

#ifdef RISKALIGN_CLI
namespace {

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + RISKALIGN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc;
}

}  // namespace

TEST_CASE("cli stages chain through files") {
    const auto dir = scratch("cli");
    const auto log = dir / "log.txt";
    REQUIRE(cli("generate --seed 11 --out " + (dir / "raw.csv").string() + " --reference " +
                    (dir / "ref.csv").string(),
                log) == 0);
    REQUIRE(cli("prepare --seed 11 --in " + (dir / "raw.csv").string() + " --out " + (dir / "prep").string(), log) ==
            0);
    CHECK(fs::exists(dir / "prep" / "train.csv"));
    CHECK(fs::exists(dir / "prep" / "validation.csv"));
    REQUIRE(cli("resample --seed 11 --k 5 --ratio 0.5 --in " + (dir / "prep" / "train.csv").string() + " --out " +
                    (dir / "rs.csv").string(),
                log) == 0);
    CHECK(fs::exists(dir / "rs.csv.parents.csv"));
    REQUIRE(cli("train --seed 11 --model lr --in " + (dir / "rs.csv").string() + " --out " +
                    (dir / "lr.json").string(),
                log) == 0);
    REQUIRE(cli("evaluate --model " + (dir / "lr.json").string() + " --in " +
                    (dir / "prep" / "validation.csv").string() + " --out " + (dir / "eval.json").string(),
                log) == 0);
    std::ifstream in(dir / "eval.json");
    const auto eval = json::parse(in);
    CHECK(eval.contains("auc"));
    CHECK(eval.contains("recall"));
}

TEST_CASE("cli failure exits nonzero with a stage tag") {
    const auto dir = scratch("cli_fail");
    const auto log = dir / "log.txt";
    std::ofstream(dir / "bad.csv") << "company_id,statement_year\n";
    const int rc = cli("prepare --in " + (dir / "bad.csv").string() + " --out " + (dir / "out").string(), log);
    CHECK(rc != 0);
    const auto text = slurp(log);
    CHECK(text.find("[prepare]") != std::string::npos);

    CHECK(cli("train --model svm --in " + (dir / "bad.csv").string() + " --out x.json", log) != 0);
    CHECK(cli("frobnicate", log) != 0);
}
#endif
