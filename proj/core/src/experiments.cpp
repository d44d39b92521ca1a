#include "polab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polab/claims.hpp"
#include "polab/datasets.hpp"
#include "polab/diagnostics.hpp"
#include "polab/errors.hpp"
#include "polab/losses.hpp"
#include "polab/models.hpp"
#include "polab/numerics.hpp"
#include "polab/rng.hpp"
#include "polab/training.hpp"

namespace polab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kProviderTag = 1;
constexpr uint64_t kHeadTag = 2;
constexpr uint64_t kDataTag = 3;

// --- strict config access -------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* block) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw config_error(std::string(block) + ": unknown key '" + it.key() +
                         "'");
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_num(const json& j, const char* key, double def, const char* block) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number())
    throw config_error(std::string(block) + "." + key + ": expected a number");
  double x = v->get<double>();
  if (!std::isfinite(x))
    throw config_error(std::string(block) + "." + key + ": must be finite");
  return x;
}

int get_int(const json& j, const char* key, int def, const char* block) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number_integer())
    throw config_error(std::string(block) + "." + key +
                       ": expected an integer");
  return v->get<int>();
}

bool get_bool(const json& j, const char* key, bool def, const char* block) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_boolean())
    throw config_error(std::string(block) + "." + key + ": expected a bool");
  return v->get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& def,
                    const char* block) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_string())
    throw config_error(std::string(block) + "." + key + ": expected a string");
  return v->get<std::string>();
}

const json& get_block(const json& root, const char* key) {
  static const json empty = json::object();
  const json* v = find(root, key);
  if (!v) return empty;
  if (!v->is_object())
    throw config_error(std::string(key) + ": expected an object");
  return *v;
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0))
    throw config_error(std::string(what) + ": must be > 0");
}

// --- parsed blocks --------------------------------------------------------

struct ModelCfg {
  int d = 16, vocab = 32;
  double init_scale = 0.0;
  bool unit_norm = true;
};

ModelCfg parse_model(const json& root) {
  ModelCfg m;
  const json& j = get_block(root, "model");
  check_keys(j, {"d", "vocab", "init_scale", "unit_norm_hidden"}, "model");
  m.d = get_int(j, "d", m.d, "model");
  m.vocab = get_int(j, "vocab", m.vocab, "model");
  m.init_scale = get_num(j, "init_scale", m.init_scale, "model");
  m.unit_norm = get_bool(j, "unit_norm_hidden", m.unit_norm, "model");
  if (m.d < 1 || m.vocab < 2)
    throw config_error("model: need d >= 1 and vocab >= 2");
  if (m.init_scale < 0.0) throw config_error("model.init_scale: must be >= 0");
  return m;
}

struct DataCfg {
  std::string file;  // empty -> templated pairs
  PairStyle style = PairStyle::long_suffix;
  int n_prompts = 8, prompt_len = 8;
};

DataCfg parse_data(const json& root) {
  DataCfg d;
  const json& j = get_block(root, "data");
  check_keys(j, {"file", "style", "n_prompts", "prompt_len"}, "data");
  d.file = get_str(j, "file", "", "data");
  std::string style = get_str(j, "style", pair_style_name(d.style), "data");
  auto s = pair_style_from_name(style);
  if (!s) throw config_error("data.style: unknown style '" + style + "'");
  d.style = *s;
  d.n_prompts = get_int(j, "n_prompts", d.n_prompts, "data");
  d.prompt_len = get_int(j, "prompt_len", d.prompt_len, "data");
  if (d.n_prompts < 1 || d.prompt_len < 0)
    throw config_error("data: need n_prompts >= 1 and prompt_len >= 0");
  if (!d.file.empty() && find(j, "style"))
    throw config_error("data: give either 'file' or 'style', not both");
  return d;
}

struct SparseCfg {
  double k = 50.0, r = 0.0, eta_sparse = 0.01;
  double eta_mask = -1.0;  // -1: follow the model step size
};

struct TrainBlk {
  UpdateRule rule = UpdateRule::vanilla;
  double eta = 0.1;
  int steps = 100;
  bool use_ref = true;
  int sft_steps = 0;
  double sft_eta = 0.05;
  double npo_eps = 1e-8;
  SparseCfg sparse;
};

TrainBlk parse_train(const json& root) {
  TrainBlk t;
  const json& j = get_block(root, "train");
  check_keys(j,
             {"rule", "eta", "steps", "use_ref", "sft_steps", "sft_eta",
              "npo_eps", "sparse"},
             "train");
  std::string rule = get_str(j, "rule", "vanilla", "train");
  if (rule == "vanilla")
    t.rule = UpdateRule::vanilla;
  else if (rule == "npo")
    t.rule = UpdateRule::npo;
  else if (rule == "sparse")
    t.rule = UpdateRule::sparse;
  else
    throw config_error("train.rule: unknown rule '" + rule + "'");
  t.eta = get_num(j, "eta", t.eta, "train");
  t.steps = get_int(j, "steps", t.steps, "train");
  t.use_ref = get_bool(j, "use_ref", t.use_ref, "train");
  t.sft_steps = get_int(j, "sft_steps", t.sft_steps, "train");
  t.sft_eta = get_num(j, "sft_eta", t.sft_eta, "train");
  t.npo_eps = get_num(j, "npo_eps", t.npo_eps, "train");
  require_positive(t.eta, "train.eta");
  require_positive(t.npo_eps, "train.npo_eps");
  if (t.steps < 0 || t.sft_steps < 0)
    throw config_error("train: step counts must be >= 0");
  if (t.sft_steps > 0) require_positive(t.sft_eta, "train.sft_eta");
  const json& sj = get_block(j, "sparse");
  check_keys(sj, {"k", "r", "eta_sparse", "eta_mask"}, "train.sparse");
  t.sparse.k = get_num(sj, "k", t.sparse.k, "train.sparse");
  t.sparse.r = get_num(sj, "r", t.sparse.r, "train.sparse");
  t.sparse.eta_sparse = get_num(sj, "eta_sparse", t.sparse.eta_sparse,
                                "train.sparse");
  t.sparse.eta_mask = get_num(sj, "eta_mask", t.sparse.eta_mask,
                              "train.sparse");
  require_positive(t.sparse.k, "train.sparse.k");
  if (t.sparse.eta_sparse < 0.0)
    throw config_error("train.sparse.eta_sparse: must be >= 0");
  return t;
}

struct LossBlk {
  Algo algo = Algo::dpo;
  std::map<std::string, double> hyper;
};

std::map<std::string, double> parse_hyper(const json& j, const char* block) {
  std::map<std::string, double> out;
  if (!j.is_object())
    throw config_error(std::string(block) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number())
      throw config_error(std::string(block) + "." + it.key() +
                         ": expected a number");
    out[it.key()] = it.value().get<double>();
  }
  return out;
}

LossBlk parse_loss(const json& root) {
  LossBlk l;
  const json& j = get_block(root, "loss");
  check_keys(j, {"algo", "hyper"}, "loss");
  std::string name = get_str(j, "algo", "dpo", "loss");
  auto a = algo_from_name(name);
  if (!a) throw config_error("loss.algo: unknown algorithm '" + name + "'");
  l.algo = *a;
  if (const json* h = find(j, "hyper")) l.hyper = parse_hyper(*h, "loss.hyper");
  return l;
}

struct TheoremBlk {
  int M = 4, L = 3, m = 2, d = 16, vocab = 32;
  double eta = 1e-4, beta = 1.0;
  int steps = 1;
  double peak_w = 0.6, peak_l = 0.5;
  double tol = 1e-10, tol_scale = 10.0;
  int sweep_max_suffix = 0;
};

TheoremBlk parse_theorem(const json& root, const std::string& kind) {
  TheoremBlk t;
  if (kind == "theorem2") t.vocab = 8;
  const json& j = get_block(root, "theorem");
  check_keys(j,
             {"M", "L", "m", "d", "vocab", "eta", "beta", "steps", "peak_w",
              "peak_l", "tol", "tol_scale", "sweep_max_suffix"},
             "theorem");
  t.M = get_int(j, "M", t.M, "theorem");
  t.L = get_int(j, "L", t.L, "theorem");
  t.m = get_int(j, "m", t.m, "theorem");
  t.d = get_int(j, "d", t.d, "theorem");
  t.vocab = get_int(j, "vocab", t.vocab, "theorem");
  t.eta = get_num(j, "eta", t.eta, "theorem");
  t.beta = get_num(j, "beta", t.beta, "theorem");
  t.steps = get_int(j, "steps", t.steps, "theorem");
  t.peak_w = get_num(j, "peak_w", t.peak_w, "theorem");
  t.peak_l = get_num(j, "peak_l", t.peak_l, "theorem");
  t.tol = get_num(j, "tol", t.tol, "theorem");
  t.tol_scale = get_num(j, "tol_scale", t.tol_scale, "theorem");
  t.sweep_max_suffix = get_int(j, "sweep_max_suffix", t.sweep_max_suffix,
                               "theorem");
  require_positive(t.eta, "theorem.eta");
  require_positive(t.beta, "theorem.beta");
  require_positive(t.tol, "theorem.tol");
  if (t.steps < 0 || t.sweep_max_suffix < 0)
    throw config_error("theorem: counts must be >= 0");
  return t;
}

// --- serialization --------------------------------------------------------

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out =
      "step,logp_w,logp_l,margin,norm_w,norm_l,cosine,d_w,d_l,case,loss\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    out += fmt_g17(r.logp_w);
    out += ',';
    out += fmt_g17(r.logp_l);
    out += ',';
    out += fmt_g17(r.margin);
    out += ',';
    out += fmt_g17(r.norm_w);
    out += ',';
    out += fmt_g17(r.norm_l);
    out += ',';
    out += fmt_g17(r.cosine);
    out += ',';
    out += fmt_g17(r.d_w);
    out += ',';
    out += fmt_g17(r.d_l);
    out += ',';
    out += r.case_label;
    out += ',';
    out += fmt_g17(r.loss);
    out += '\n';
  }
  return out;
}

json row_json(const TraceRow& r) {
  json j;
  j["step"] = r.step;
  j["logp_w"] = r.logp_w;
  j["logp_l"] = r.logp_l;
  j["margin"] = r.margin;
  j["norm_w"] = r.norm_w;
  j["norm_l"] = r.norm_l;
  j["cosine"] = r.cosine;
  j["d_w"] = r.d_w;
  j["d_l"] = r.d_l;
  j["case"] = r.case_label;
  j["loss"] = r.loss;
  return j;
}

json claims_json(const TheoremReport& rep) {
  json j;
  j["kind"] = rep.kind;
  j["pass"] = rep.pass;
  json arr = json::array();
  for (const ClaimRecord& c : rep.claims) {
    json cj;
    cj["name"] = c.name;
    cj["expected"] = c.expected;
    cj["observed"] = c.observed;
    cj["err"] = c.err;
    cj["tol"] = c.tol;
    cj["relative"] = c.relative;
    cj["pass"] = c.pass;
    if (!c.note.empty()) cj["note"] = c.note;
    arr.push_back(std::move(cj));
  }
  j["claims"] = std::move(arr);
  j["notes"] = rep.notes;
  return j;
}

struct Artifact {
  std::string name, content;
};

void write_all(const std::string& out_dir, std::vector<Artifact> arts,
               const json& resolved, const std::string& kind, uint64_t seed) {
  fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw io_error("cannot create output dir: " + out_dir);

  std::sort(arts.begin(), arts.end(),
            [](const Artifact& a, const Artifact& b) { return a.name < b.name; });
  json man;
  man["kind"] = kind;
  man["seed"] = seed;
  man["config"] = resolved;
  json arr = json::array();
  for (const Artifact& a : arts) {
    json e;
    e["name"] = a.name;
    e["bytes"] = a.content.size();
    e["fnv1a64"] = fnv1a64_hex(a.content);
    arr.push_back(std::move(e));
  }
  man["artifacts"] = std::move(arr);
  arts.push_back({"manifest.json", man.dump(2) + "\n"});

  for (const Artifact& a : arts) {
    fs::path p = root / a.name;
    if (p.has_parent_path()) {
      fs::create_directories(p.parent_path(), ec);
      if (ec) throw io_error("cannot create dir for: " + a.name);
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + p.string());
    out.write(a.content.data(),
              static_cast<std::streamsize>(a.content.size()));
    if (!out) throw io_error("write failed: " + p.string());
  }
}

// --- shared builders ------------------------------------------------------

LinearHeadLM build_model(const ModelCfg& m, uint64_t seed) {
  HiddenProvider provider(derive_seed(seed, kProviderTag), m.d, m.unit_norm);
  return LinearHeadLM::random_init(m.d, m.vocab, std::move(provider),
                                   derive_seed(seed, kHeadTag), m.init_scale);
}

std::vector<PreferenceTriple> build_data(const DataCfg& d, int vocab,
                                         uint64_t seed) {
  if (!d.file.empty()) return load_triples(d.file);
  return build_sentiment_dataset(d.style, d.n_prompts, d.prompt_len, vocab,
                                 derive_seed(seed, kDataTag));
}

void validate_tokens(const std::vector<PreferenceTriple>& data, int vocab) {
  for (const auto& t : data) {
    for (int tok : t.prompt)
      if (tok < 0 || tok >= vocab)
        throw config_error("data: prompt token out of the model vocabulary");
    for (int tok : t.y_w)
      if (tok < 0 || tok >= vocab)
        throw config_error("data: chosen token out of the model vocabulary");
    for (int tok : t.y_l)
      if (tok < 0 || tok >= vocab)
        throw config_error("data: rejected token out of the model vocabulary");
    if (t.y_w.empty() || t.y_l.empty())
      throw config_error("data: empty response");
  }
}

json model_json(const ModelCfg& m) {
  json j;
  j["d"] = m.d;
  j["vocab"] = m.vocab;
  j["init_scale"] = m.init_scale;
  j["unit_norm_hidden"] = m.unit_norm;
  return j;
}

json data_json(const DataCfg& d) {
  json j;
  if (!d.file.empty()) {
    j["file"] = d.file;
  } else {
    j["style"] = pair_style_name(d.style);
    j["n_prompts"] = d.n_prompts;
    j["prompt_len"] = d.prompt_len;
  }
  return j;
}

json train_json(const TrainBlk& t) {
  json j;
  j["rule"] = update_rule_name(t.rule);
  j["eta"] = t.eta;
  j["steps"] = t.steps;
  j["use_ref"] = t.use_ref;
  j["sft_steps"] = t.sft_steps;
  j["sft_eta"] = t.sft_eta;
  j["npo_eps"] = t.npo_eps;
  if (t.rule == UpdateRule::sparse) {
    json s;
    s["k"] = t.sparse.k;
    s["r"] = t.sparse.r;
    s["eta_sparse"] = t.sparse.eta_sparse;
    s["eta_mask"] = t.sparse.eta_mask < 0.0 ? t.eta : t.sparse.eta_mask;
    j["sparse"] = std::move(s);
  }
  return j;
}

json theorem_json(const TheoremBlk& t, const std::string& kind) {
  json j;
  if (kind == "theorem1") {
    j["M"] = t.M;
    j["vocab"] = t.vocab;
    j["d"] = t.d;
    j["eta"] = t.eta;
    j["beta"] = t.beta;
    j["steps"] = t.steps;
    j["tol"] = t.tol;
  } else if (kind == "corollary1") {
    j["L"] = t.L;
    j["M"] = t.M;
    j["vocab"] = t.vocab;
    j["d"] = t.d;
    j["eta"] = t.eta;
    j["beta"] = t.beta;
    j["tol"] = t.tol;
  } else {
    j["L"] = t.L;
    j["m"] = t.m;
    j["vocab"] = t.vocab;
    j["eta"] = t.eta;
    j["beta"] = t.beta;
    j["peak_w"] = t.peak_w;
    j["peak_l"] = t.peak_l;
    j["tol_scale"] = t.tol_scale;
    j["sweep_max_suffix"] = t.sweep_max_suffix;
  }
  return j;
}

// --- kind runners ---------------------------------------------------------

struct KindResult {
  std::vector<Artifact> artifacts;
  json resolved_extra;  // kind-specific config echo
  bool pass = true;
  std::string message;
};

KindResult run_train_kind(const json& root, uint64_t seed) {
  ModelCfg mc = parse_model(root);
  DataCfg dc = parse_data(root);
  TrainBlk tb = parse_train(root);
  LossBlk lb = parse_loss(root);
  LossSpec spec = [&] {
    try {
      return make_loss_spec(lb.algo, lb.hyper);
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("loss: ") + e.what());
    }
  }();

  LinearHeadLM model = build_model(mc, seed);
  std::vector<PreferenceTriple> data = build_data(dc, mc.vocab, seed);
  validate_tokens(data, mc.vocab);
  if (tb.sft_steps > 0) model = sft(model, data, tb.sft_eta, tb.sft_steps);

  std::vector<TraceRow> trace;
  json report;
  report["kind"] = "train";
  report["rule"] = update_rule_name(tb.rule);
  if (tb.rule == UpdateRule::sparse) {
    SparseTrainConfig cfg;
    cfg.sp.k = tb.sparse.k;
    cfg.sp.r = tb.sparse.r;
    cfg.sp.eta_sparse = tb.sparse.eta_sparse;
    cfg.eta_model = tb.eta;
    cfg.eta_mask = tb.sparse.eta_mask < 0.0 ? tb.eta : tb.sparse.eta_mask;
    cfg.steps = tb.steps;
    SparseTrainResult res = sparse_train(model, data, cfg);
    trace = std::move(res.trace);
    // Final gate values, averaged per position when lengths agree.
    bool uniform = true;
    for (const auto& t : data)
      uniform = uniform && t.y_w.size() == data[0].y_w.size() &&
                t.y_l.size() == data[0].y_l.size();
    auto gate = [&](const std::vector<double>& u) {
      json a = json::array();
      for (double x : u) a.push_back(sigmoid(cfg.sp.k * (x - cfg.sp.r)));
      return a;
    };
    if (uniform) {
      std::vector<double> mw(data[0].y_w.size(), 0.0),
          ml(data[0].y_l.size(), 0.0);
      for (const MaskState& m : res.masks) {
        for (size_t i = 0; i < mw.size(); ++i)
          mw[i] += sigmoid(cfg.sp.k * (m.u_w[i] - cfg.sp.r)) /
                   static_cast<double>(res.masks.size());
        for (size_t i = 0; i < ml.size(); ++i)
          ml[i] += sigmoid(cfg.sp.k * (m.u_l[i] - cfg.sp.r)) /
                   static_cast<double>(res.masks.size());
      }
      report["gate_mean_w"] = mw;
      report["gate_mean_l"] = ml;
    } else {
      report["gate_first_pair_w"] = gate(res.masks[0].u_w);
      report["gate_first_pair_l"] = gate(res.masks[0].u_l);
    }
  } else {
    TrainConfig cfg;
    cfg.spec = spec;
    cfg.rule = tb.rule;
    cfg.eta = tb.eta;
    cfg.steps = tb.steps;
    cfg.use_ref = tb.use_ref;
    cfg.npo_eps = tb.npo_eps;
    TrainResult res = train(model, data, cfg);
    trace = std::move(res.trace);
    report["algo"] = algo_name(lb.algo);
  }
  report["steps"] = tb.steps;
  report["initial"] = row_json(trace.front());
  report["final"] = row_json(trace.back());

  KindResult out;
  out.artifacts.push_back({"trace.csv", trace_csv(trace)});
  out.artifacts.push_back({"report.json", report.dump(2) + "\n"});
  json extra;
  extra["model"] = model_json(mc);
  extra["data"] = data_json(dc);
  extra["train"] = train_json(tb);
  if (tb.rule != UpdateRule::sparse) {
    json lj;
    lj["algo"] = algo_name(lb.algo);
    lj["hyper"] = lb.hyper.empty() ? json::object() : json(lb.hyper);
    extra["loss"] = std::move(lj);
  }
  out.resolved_extra = std::move(extra);
  std::ostringstream msg;
  msg << "train(" << update_rule_name(tb.rule);
  if (tb.rule != UpdateRule::sparse) msg << " " << algo_name(lb.algo);
  msg << "): " << tb.steps << " steps, logp_w " << trace.front().logp_w
      << " -> " << trace.back().logp_w << ", final case="
      << trace.back().case_label;
  out.message = msg.str();
  return out;
}

KindResult run_theorem_kind(const json& root, const std::string& kind,
                            uint64_t seed) {
  TheoremBlk tb = parse_theorem(root, kind);
  TheoremReport rep;
  if (kind == "theorem1") {
    rep = verify_theorem1(tb.M, tb.vocab, tb.d, tb.eta, tb.beta, tb.steps,
                          seed, tb.tol);
  } else if (kind == "corollary1") {
    rep = verify_corollary1(tb.L, tb.M, tb.vocab, tb.d, tb.eta, tb.beta, seed,
                            tb.tol);
  } else {
    rep = verify_theorem2(tb.L, tb.m, tb.vocab, tb.eta, tb.beta, tb.peak_w,
                          tb.peak_l, seed, tb.tol_scale, tb.sweep_max_suffix);
  }
  KindResult out;
  out.pass = rep.pass;
  out.artifacts.push_back({"report.json", claims_json(rep).dump(2) + "\n"});
  json extra;
  extra["theorem"] = theorem_json(tb, kind);
  out.resolved_extra = std::move(extra);
  int passed = 0;
  for (const auto& c : rep.claims) passed += c.pass;
  std::ostringstream msg;
  msg << kind << ": " << passed << "/" << rep.claims.size()
      << " claims passed";
  out.message = msg.str();
  return out;
}

KindResult run_heatmap_kind(const json& root, uint64_t seed) {
  ModelCfg mc = parse_model(root);
  DataCfg dc = parse_data(root);
  if (dc.file.empty() && !find(get_block(root, "data"), "style"))
    dc.style = PairStyle::prefix_suffix;  // the style this view is made for
  LinearHeadLM model = build_model(mc, seed);
  std::vector<PreferenceTriple> data = build_data(dc, mc.vocab, seed);
  validate_tokens(data, mc.vocab);

  const size_t Lw = data[0].y_w.size(), Ll = data[0].y_l.size();
  const int edit = edit_index(data[0].y_w, data[0].y_l);
  for (const auto& t : data) {
    if (t.y_w.size() != Lw || t.y_l.size() != Ll ||
        edit_index(t.y_w, t.y_l) != edit)
      throw config_error("heatmap: all pairs must share shape and edit point");
  }

  std::vector<double> mean(Lw * Ll, 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const auto& t : data) {
    TokenHeatmap hm = token_heatmap(model, t.prompt, t.y_w, t.y_l);
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += inv_n * hm.v[i];
  }

  std::string csv = "pos";
  for (size_t j = 0; j < Ll; ++j) csv += "," + std::to_string(j + 1);
  csv += "\n";
  for (size_t i = 0; i < Lw; ++i) {
    csv += std::to_string(i + 1);
    for (size_t j = 0; j < Ll; ++j) csv += "," + fmt_g17(mean[i * Ll + j]);
    csv += "\n";
  }

  json report;
  report["kind"] = "heatmap";
  report["rows"] = Lw;
  report["cols"] = Ll;
  report["edit_pos"] = edit + 1;
  json diag = json::array();
  double mean_suffix = 0.0, mean_shared = 0.0;
  int n_suffix = 0, n_shared = 0;
  const size_t D = std::min(Lw, Ll);
  for (size_t i = 0; i < D; ++i) {
    double v = mean[i * Ll + i];
    diag.push_back(v);
    if (static_cast<int>(i) != edit) {
      mean_shared += v;
      ++n_shared;
      if (static_cast<int>(i) > edit) {
        mean_suffix += v;
        ++n_suffix;
      }
    }
  }
  report["diag"] = std::move(diag);
  report["diag_at_edit"] = mean[static_cast<size_t>(edit) * Ll + edit];
  if (n_shared) report["mean_diag_shared"] = mean_shared / n_shared;
  if (n_suffix) report["mean_diag_shared_suffix"] = mean_suffix / n_suffix;

  KindResult out;
  out.artifacts.push_back({"heatmap.csv", std::move(csv)});
  out.artifacts.push_back({"report.json", report.dump(2) + "\n"});
  json extra;
  extra["model"] = model_json(mc);
  extra["data"] = data_json(dc);
  out.resolved_extra = std::move(extra);
  std::ostringstream msg;
  msg << "heatmap " << Lw << "x" << Ll << ": diag@edit="
      << mean[static_cast<size_t>(edit) * Ll + edit];
  if (n_suffix) msg << ", shared-suffix diag mean=" << mean_suffix / n_suffix;
  out.message = msg.str();
  return out;
}

KindResult run_compare_kind(const json& root, uint64_t seed) {
  ModelCfg mc = parse_model(root);
  DataCfg dc = parse_data(root);
  TrainBlk tb = parse_train(root);
  if (tb.rule == UpdateRule::sparse)
    throw config_error("algo_compare: rule must be vanilla or npo");
  const json& cj = get_block(root, "compare");
  check_keys(cj, {"algos", "hyper"}, "compare");

  std::vector<Algo> algos;
  if (const json* a = find(cj, "algos")) {
    if (!a->is_array()) throw config_error("compare.algos: expected an array");
    for (const auto& e : *a) {
      if (!e.is_string())
        throw config_error("compare.algos: expected algorithm names");
      auto alg = algo_from_name(e.get<std::string>());
      if (!alg)
        throw config_error("compare.algos: unknown algorithm '" +
                           e.get<std::string>() + "'");
      algos.push_back(*alg);
    }
    if (algos.empty()) throw config_error("compare.algos: empty");
  } else {
    algos = catalog();
  }
  std::map<std::string, std::map<std::string, double>> overrides;
  if (const json* h = find(cj, "hyper")) {
    if (!h->is_object())
      throw config_error("compare.hyper: expected an object");
    for (auto it = h->begin(); it != h->end(); ++it) {
      if (!algo_from_name(it.key()))
        throw config_error("compare.hyper: unknown algorithm '" + it.key() +
                           "'");
      overrides[it.key()] =
          parse_hyper(it.value(), ("compare.hyper." + it.key()).c_str());
    }
  }

  LinearHeadLM init = build_model(mc, seed);
  std::vector<PreferenceTriple> data = build_data(dc, mc.vocab, seed);
  validate_tokens(data, mc.vocab);
  if (tb.sft_steps > 0) init = sft(init, data, tb.sft_eta, tb.sft_steps);

  KindResult out;
  json per_algo = json::array();
  for (Algo a : algos) {
    std::map<std::string, double> hyper;
    if (auto it = overrides.find(algo_name(a)); it != overrides.end())
      hyper = it->second;
    LossSpec spec = [&] {
      try {
        return make_loss_spec(a, hyper);
      } catch (const std::invalid_argument& e) {
        throw config_error(std::string("compare.hyper: ") + e.what());
      }
    }();
    TrainConfig cfg;
    cfg.spec = spec;
    cfg.rule = tb.rule;
    cfg.eta = tb.eta;
    cfg.steps = tb.steps;
    cfg.use_ref = tb.use_ref;
    cfg.npo_eps = tb.npo_eps;
    TrainResult res = train(init, data, cfg);
    out.artifacts.push_back({std::string(algo_name(a)) + "/trace.csv",
                             trace_csv(res.trace)});
    json e;
    e["algo"] = algo_name(a);
    e["initial"] = row_json(res.trace.front());
    e["final"] = row_json(res.trace.back());
    per_algo.push_back(std::move(e));
  }
  json report;
  report["kind"] = "algo_compare";
  report["steps"] = tb.steps;
  report["algos"] = std::move(per_algo);
  out.artifacts.push_back({"report.json", report.dump(2) + "\n"});

  json extra;
  extra["model"] = model_json(mc);
  extra["data"] = data_json(dc);
  extra["train"] = train_json(tb);
  json cmp;
  json names = json::array();
  for (Algo a : algos) names.push_back(algo_name(a));
  cmp["algos"] = std::move(names);
  if (!overrides.empty()) {
    json hj = json::object();
    for (const auto& [k, v] : overrides) hj[k] = json(v);
    cmp["hyper"] = std::move(hj);
  }
  extra["compare"] = std::move(cmp);
  out.resolved_extra = std::move(extra);
  std::ostringstream msg;
  msg << "algo_compare: " << algos.size() << " algorithms x " << tb.steps
      << " steps";
  out.message = msg.str();
  return out;
}

}  // namespace

json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded())
    throw config_error("config is not valid JSON: " + path);
  if (!j.is_object()) throw config_error("config must be a JSON object");
  return j;
}

RunSummary run_experiment(const json& config, const std::string& out_dir,
                          const RunOptions& opts) {
  if (!config.is_object())
    throw config_error("config must be a JSON object");
  check_keys(config,
             {"kind", "seed", "model", "data", "loss", "train", "theorem",
              "compare"},
             "config");
  std::string kind = get_str(config, "kind", "", "config");
  if (kind.empty()) throw config_error("config.kind: required");

  uint64_t seed = 42;
  if (const json* s = find(config, "seed")) {
    if (!s->is_number_integer() || s->get<int64_t>() < 0)
      throw config_error("config.seed: expected a non-negative integer");
    seed = s->get<uint64_t>();
  }
  if (opts.seed_override) seed = *opts.seed_override;

  KindResult kr;
  if (kind == "train")
    kr = run_train_kind(config, seed);
  else if (kind == "theorem1" || kind == "corollary1" || kind == "theorem2")
    kr = run_theorem_kind(config, kind, seed);
  else if (kind == "heatmap")
    kr = run_heatmap_kind(config, seed);
  else if (kind == "algo_compare")
    kr = run_compare_kind(config, seed);
  else
    throw config_error("config.kind: unknown kind '" + kind + "'");

  json resolved;
  resolved["kind"] = kind;
  resolved["seed"] = seed;
  for (auto it = kr.resolved_extra.begin(); it != kr.resolved_extra.end(); ++it)
    resolved[it.key()] = it.value();

  RunSummary sum;
  sum.kind = kind;
  sum.pass = kr.pass;
  sum.message = kr.message;
  for (const Artifact& a : kr.artifacts) sum.artifacts.push_back(a.name);
  sum.artifacts.push_back("manifest.json");
  write_all(out_dir, std::move(kr.artifacts), resolved, kind, seed);
  return sum;
}

std::string catalog_text() {
  static const std::map<std::string, std::string> blurbs = {
      {"dpo", "log-sigmoid link on the beta-scaled, reference-shifted margin"},
      {"rdpo", "dpo plus a length-difference correction inside the link"},
      {"simpo", "log-sigmoid on length-averaged logps against a target margin"},
      {"ipo", "squared deviation of the length-averaged margin from 1/(2*beta)"},
      {"rrhf", "hinge on the length-averaged margin plus a chosen-likelihood anchor"},
      {"slichf", "hinge with offset delta on the raw margin plus a chosen-likelihood anchor"},
      {"cpo", "log-sigmoid on the beta-scaled raw margin plus a chosen-likelihood anchor"},
      {"dpop", "dpo with a penalty when the chosen logp falls below the reference"},
      {"kto", "independent saturating value maps per side, anchored to the reference"},
      {"sppo", "per-side quadratic targets at +/- 1/beta"},
  };
  std::string out;
  for (Algo a : catalog()) {
    out += algo_name(a);
    out += ": ";
    out += blurbs.at(algo_name(a));
    out += "\n  hyper:";
    for (const auto& [k, v] : algo_defaults(a)) {
      out += " ";
      out += k;
      out += "=";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace polab
