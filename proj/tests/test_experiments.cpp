#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "polab/errors.hpp"
#include "polab/experiments.hpp"
#include "polab/numerics.hpp"

using namespace polab;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_SUITE("experiments") {

namespace {
fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "polab_exp_test" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_train_config() {
  return json{
      {"kind", "train"},
      {"seed", 5},
      {"model", {{"d", 8}, {"vocab", 16}}},
      {"data", {{"style", "long_suffix"}, {"n_prompts", 2}, {"prompt_len", 3}}},
      {"loss", {{"algo", "dpo"}, {"hyper", {{"beta", 1.0}}}}},
      {"train", {{"eta", 0.1}, {"steps", 5}}},
  };
}
}  // namespace

TEST_CASE("train run writes trace, report and manifest that agree") {
  fs::path dir = fresh_dir("train");
  RunSummary s = run_experiment(small_train_config(), dir.string(),
                                {std::nullopt, true});
  CHECK(s.kind == "train");
  CHECK(s.pass);

  std::string trace = slurp(dir / "trace.csv");
  CHECK(trace.rfind("step,logp_w,logp_l,margin,norm_w,norm_l,cosine,d_w,d_l,"
                    "case,loss\n",
                    0) == 0);
  int lines = 0;
  for (char ch : trace) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 1 + 6);  // header + steps+1 rows

  json report = json::parse(slurp(dir / "report.json"));
  CHECK(report["kind"] == "train");
  CHECK(report["steps"] == 5);

  json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["kind"] == "train");
  REQUIRE(manifest["artifacts"].is_array());
  bool saw_trace = false;
  for (const auto& a : manifest["artifacts"]) {
    std::string name = a["name"];
    std::string content = slurp(dir / name);
    CHECK(a["bytes"].get<uint64_t>() == content.size());
    CHECK(a["fnv1a64"].get<std::string>() ==
          fnv1a64_hex(content));
    saw_trace |= name == "trace.csv";
  }
  CHECK(saw_trace);
}

TEST_CASE("reruns are byte-identical; the seed changes the bytes") {
  fs::path a = fresh_dir("rerun_a");
  fs::path b = fresh_dir("rerun_b");
  fs::path c = fresh_dir("rerun_c");
  run_experiment(small_train_config(), a.string(), {std::nullopt, true});
  run_experiment(small_train_config(), b.string(), {std::nullopt, true});
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

  run_experiment(small_train_config(), c.string(), {uint64_t{99}, true});
  CHECK(slurp(a / "trace.csv") != slurp(c / "trace.csv"));
}

TEST_CASE("config validation rejects malformed inputs") {
  fs::path dir = fresh_dir("bad");
  RunOptions q{std::nullopt, true};

  json unknown_top = small_train_config();
  unknown_top["extra"] = 1;
  CHECK_THROWS_AS(run_experiment(unknown_top, dir.string(), q), config_error);

  json unknown_kind = small_train_config();
  unknown_kind["kind"] = "wat";
  CHECK_THROWS_AS(run_experiment(unknown_kind, dir.string(), q), config_error);

  json bad_algo = small_train_config();
  bad_algo["loss"]["algo"] = "wat";
  CHECK_THROWS_AS(run_experiment(bad_algo, dir.string(), q), config_error);

  json bad_seed = small_train_config();
  bad_seed["seed"] = 1.5;
  CHECK_THROWS_AS(run_experiment(bad_seed, dir.string(), q), config_error);

  json bad_hyper = small_train_config();
  bad_hyper["loss"]["hyper"]["gamma"] = 0.3;  // not a dpo knob
  CHECK_THROWS_AS(run_experiment(bad_hyper, dir.string(), q), config_error);

  json bad_style = small_train_config();
  bad_style["data"]["style"] = "wat";
  CHECK_THROWS_AS(run_experiment(bad_style, dir.string(), q), config_error);

  json both_sources = small_train_config();
  both_sources["data"]["file"] = "x.jsonl";
  CHECK_THROWS_AS(run_experiment(both_sources, dir.string(), q), config_error);

  json bad_rule = small_train_config();
  bad_rule["train"]["rule"] = "wat";
  CHECK_THROWS_AS(run_experiment(bad_rule, dir.string(), q), config_error);
}

TEST_CASE("theorem kinds report pass and write their artifacts") {
  fs::path dir = fresh_dir("thm1");
  json cfg{{"kind", "theorem1"}};
  RunSummary s = run_experiment(cfg, dir.string(), {std::nullopt, true});
  CHECK(s.kind == "theorem1");
  CHECK(s.pass);
  json report = json::parse(slurp(dir / "report.json"));
  CHECK(report["pass"] == true);
  CHECK(report["claims"].is_array());
  CHECK(report["claims"].size() > 0);

  fs::path dir2 = fresh_dir("thm2");
  json cfg2{{"kind", "theorem2"},
            {"theorem", {{"L", 4}, {"m", 2}, {"sweep_max_suffix", 6}}}};
  RunSummary s2 = run_experiment(cfg2, dir2.string(), {std::nullopt, true});
  CHECK(s2.pass);
  json r2 = json::parse(slurp(dir2 / "report.json"));
  bool saw_sweep = false;
  for (const auto& c : r2["claims"])
    saw_sweep |= c["name"] == "suffix_sweep_monotone";
  CHECK(saw_sweep);

  fs::path dir3 = fresh_dir("cor1");
  RunSummary s3 =
      run_experiment(json{{"kind", "corollary1"}}, dir3.string(),
                     {std::nullopt, true});
  CHECK(s3.kind == "corollary1");
  CHECK(s3.pass);
}

TEST_CASE("heatmap run reports the edit-position dip") {
  fs::path dir = fresh_dir("heatmap");
  json cfg{{"kind", "heatmap"},
           {"seed", 4},
           {"model", {{"d", 12}, {"vocab", 32}}},
           {"data", {{"style", "prefix_suffix"}, {"n_prompts", 2},
                     {"prompt_len", 3}}}};
  RunSummary s = run_experiment(cfg, dir.string(), {std::nullopt, true});
  CHECK(s.kind == "heatmap");

  json report = json::parse(slurp(dir / "report.json"));
  CHECK(report["edit_pos"] == 4);  // 1-based
  CHECK(report["rows"] == 9);
  CHECK(report["diag_at_edit"].get<double>() < 0.0);
  CHECK(report["mean_diag_shared_suffix"].get<double>() > 0.5);

  std::string csv = slurp(dir / "heatmap.csv");
  CHECK(csv.rfind("pos,1,2,3,4,5,6,7,8,9\n", 0) == 0);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 10);
}

TEST_CASE("algorithm comparison writes one trace per algorithm") {
  fs::path dir = fresh_dir("compare");
  json cfg{{"kind", "algo_compare"},
           {"seed", 6},
           {"model", {{"d", 8}, {"vocab", 16}}},
           {"data", {{"style", "long_suffix"}, {"n_prompts", 2},
                     {"prompt_len", 3}}},
           {"train", {{"eta", 0.05}, {"steps", 3}}},
           {"compare", {{"algos", {"dpo", "simpo", "sppo"}}}}};
  RunSummary s = run_experiment(cfg, dir.string(), {std::nullopt, true});
  CHECK(s.kind == "algo_compare");
  for (const char* algo : {"dpo", "simpo", "sppo"})
    CHECK(fs::exists(dir / algo / "trace.csv"));
  json report = json::parse(slurp(dir / "report.json"));
  REQUIRE(report["algos"].is_array());
  CHECK(report["algos"].size() == 3);
}

TEST_CASE("file-backed data feeds a training run") {
  fs::path dir = fresh_dir("filedata");
  fs::path triples = dir / "pairs.jsonl";
  std::ofstream(triples)
      << R"({"prompt": [3, 1], "chosen": [0, 2], "rejected": [1, 2]})" << "\n";
  json cfg = small_train_config();
  cfg["data"] = json{{"file", triples.string()}};
  fs::path out = dir / "out";
  fs::create_directories(out);
  RunSummary s = run_experiment(cfg, out.string(), {std::nullopt, true});
  CHECK(s.pass);
  CHECK(fs::exists(out / "trace.csv"));
}

TEST_CASE("load_config error paths") {
  CHECK_THROWS_AS(load_config("/definitely/not/here.json"), io_error);
  fs::path dir = fresh_dir("loadcfg");
  fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ nope";
  CHECK_THROWS_AS(load_config(bad.string()), config_error);
  fs::path good = dir / "good.json";
  std::ofstream(good) << R"({"kind": "theorem1"})";
  json j = load_config(good.string());
  CHECK(j["kind"] == "theorem1");
}

TEST_CASE("catalog text names every algorithm") {
  std::string text = catalog_text();
  for (const char* name : {"dpo", "rdpo", "simpo", "ipo", "rrhf", "slichf",
                           "cpo", "dpop", "kto", "sppo"})
    CHECK(text.find(name) != std::string::npos);
}

}  // TEST_SUITE
