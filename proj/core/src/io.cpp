#include "rgib/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rgib/rng.hpp"
#include "rgib/theory.hpp"

namespace rgib {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Graph text format
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void parse_fail(const std::string& origin, int line,
                             const std::string& what) {
  throw DataError(origin + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

AttributedGraph parse_graph_text(const std::string& text,
                                 const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw DataError(origin + ": empty file");
  long n, m, d, c;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> n >> m >> d >> c) || (hs >> extra))
      parse_fail(origin, lineno, "bad header, expected 'N M D C'");
    if (n < 0 || m < 0 || d < 0 || c < 0)
      parse_fail(origin, lineno, "bad header, negative count");
  }

  AttributedGraph g;
  g.n = static_cast<int>(n);
  g.features = Matrix::Zero(n, d);
  std::set<std::pair<int, int>> seen;
  for (long e = 0; e < m; ++e) {
    if (!next_line()) parse_fail(origin, lineno, "unexpected end of edge list");
    std::istringstream es(line);
    long u, v;
    std::string extra;
    if (!(es >> u >> v) || (es >> extra))
      parse_fail(origin, lineno, "malformed edge line");
    if (u < 0 || v < 0 || u >= n || v >= n)
      parse_fail(origin, lineno, "edge endpoint out of range");
    if (u == v) parse_fail(origin, lineno, "self-loop not allowed");
    int a = static_cast<int>(std::min(u, v));
    int b = static_cast<int>(std::max(u, v));
    if (!seen.insert({a, b}).second)
      parse_fail(origin, lineno, "duplicate edge");
    g.edges.emplace_back(a, b);
  }
  std::sort(g.edges.begin(), g.edges.end());

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  bool any_label = false;
  for (long i = 0; i < n; ++i) {
    if (!next_line()) parse_fail(origin, lineno, "unexpected end of node list");
    std::istringstream ns(line);
    long label, k;
    if (!(ns >> label >> k))
      parse_fail(origin, lineno, "malformed node line");
    if (c == 0) {
      if (label != -1)
        parse_fail(origin, lineno, "label given but header says C=0");
    } else if (label < -1 || label >= c) {
      parse_fail(origin, lineno, "label out of range");
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(label);
    if (label >= 0) any_label = true;
    long prev = -1;
    for (long t = 0; t < k; ++t) {
      std::string tok;
      if (!(ns >> tok)) parse_fail(origin, lineno, "missing feature token");
      auto colon = tok.find(':');
      if (colon == std::string::npos)
        parse_fail(origin, lineno, "malformed sparse feature token '" + tok + "'");
      long idx;
      double val;
      try {
        std::size_t used;
        idx = std::stol(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("");
        std::string vs = tok.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        parse_fail(origin, lineno, "malformed sparse feature token '" + tok + "'");
      }
      if (idx < 0 || idx >= d)
        parse_fail(origin, lineno, "feature index out of range");
      if (idx <= prev)
        parse_fail(origin, lineno, "feature indices must be strictly increasing");
      prev = idx;
      g.features(i, idx) = val;
    }
    std::string extra;
    if (ns >> extra) parse_fail(origin, lineno, "trailing tokens on node line");
  }
  if (next_line()) parse_fail(origin, lineno, "trailing content after node list");
  if (any_label) g.labels = std::move(labels);
  g.validate();
  return g;
}

AttributedGraph load_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open graph file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_graph_text(ss.str(), path);
}

void save_graph_file(const AttributedGraph& g, const std::string& path) {
  g.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path);
  int c = g.has_labels() ? g.num_classes() : 0;
  out << g.n << ' ' << g.num_edges() << ' ' << g.dim() << ' ' << c << '\n';
  for (auto [u, v] : g.edges) out << u << ' ' << v << '\n';
  for (int i = 0; i < g.n; ++i) {
    int label = g.has_labels() ? g.labels[static_cast<std::size_t>(i)] : -1;
    std::vector<int> nz;
    for (int j = 0; j < g.dim(); ++j)
      if (g.features(i, j) != 0.0) nz.push_back(j);
    out << label << ' ' << nz.size();
    for (int j : nz) out << ' ' << j << ':' << format_double(g.features(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

EvalAttackKind eval_attack_kind_from_string(const std::string& s) {
  if (s == "none") return EvalAttackKind::None;
  if (s == "feature") return EvalAttackKind::Feature;
  if (s == "structure") return EvalAttackKind::Structure;
  if (s == "both") return EvalAttackKind::Both;
  throw DataError("unknown eval_attack kind: " + s);
}

const char* to_string(EvalAttackKind kind) {
  switch (kind) {
    case EvalAttackKind::None: return "none";
    case EvalAttackKind::Feature: return "feature";
    case EvalAttackKind::Structure: return "structure";
    case EvalAttackKind::Both: return "both";
  }
  return "none";
}

PerturbationSpec ExperimentManifest::eval_spec(int num_edges) const {
  PerturbationSpec s;
  s.epsilon = eval_epsilon;
  s.pgd_iters = eval_pgd_iters;
  s.pgd_step = eval_pgd_step;
  s.edge_budget = static_cast<int>(
      std::llround(eval_edge_budget_frac * static_cast<double>(num_edges)));
  s.structure_iters = eval_structure_iters;
  return s;
}

ExperimentManifest manifest_from_json_text(const std::string& text,
                                           const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(origin + ": JSON parse error: " + e.what());
  }
  if (!j.is_object()) throw DataError(origin + ": manifest must be an object");

  ExperimentManifest m;
  try {
    for (auto& [key, value] : j.items()) {
      if (key == "dataset") m.dataset = value.get<std::string>();
      else if (key == "sbm_blocks") m.sbm_blocks = value.get<int>();
      else if (key == "sbm_nodes_per_block") m.sbm_nodes_per_block = value.get<int>();
      else if (key == "sbm_p_in") m.sbm_p_in = value.get<double>();
      else if (key == "sbm_p_out") m.sbm_p_out = value.get<double>();
      else if (key == "sbm_dim") m.sbm_dim = value.get<int>();
      else if (key == "sbm_feature_shift") m.sbm_feature_shift = value.get<double>();
      else if (key == "sbm_seed") m.sbm_seed = value.get<std::uint64_t>();
      else if (key == "alpha") m.train.alpha = value.get<double>();
      else if (key == "beta") m.train.beta = value.get<double>();
      else if (key == "epsilon") m.train.epsilon = value.get<double>();
      else if (key == "pgd_iters") m.train.pgd_iters = value.get<int>();
      else if (key == "pgd_step") m.train.pgd_step = value.get<double>();
      else if (key == "epochs") m.train.epochs = value.get<int>();
      else if (key == "hidden_dim") m.train.hidden_dim = value.get<int>();
      else if (key == "embed_dim") m.train.embed_dim = value.get<int>();
      else if (key == "lr") m.train.lr = value.get<double>();
      else if (key == "estimator")
        m.train.estimator = estimator_from_string(value.get<std::string>());
      else if (key == "sgc_k") m.train.sgc_k = value.get<int>();
      else if (key == "mode")
        m.train.mode = train_mode_from_string(value.get<std::string>());
      else if (key == "edge_budget") m.train.edge_budget = value.get<int>();
      else if (key == "structure_iters") m.train.structure_iters = value.get<int>();
      else if (key == "eval_attack")
        m.eval_attack = eval_attack_kind_from_string(value.get<std::string>());
      else if (key == "eval_epsilon") m.eval_epsilon = value.get<double>();
      else if (key == "eval_pgd_iters") m.eval_pgd_iters = value.get<int>();
      else if (key == "eval_pgd_step") m.eval_pgd_step = value.get<double>();
      else if (key == "eval_edge_budget_frac")
        m.eval_edge_budget_frac = value.get<double>();
      else if (key == "eval_structure_iters")
        m.eval_structure_iters = value.get<int>();
      else if (key == "tasks")
        m.tasks = value.get<std::vector<std::string>>();
      else if (key == "seeds")
        m.seeds = value.get<std::vector<std::uint64_t>>();
      else if (key == "out_dir") m.out_dir = value.get<std::string>();
      else if (key == "train_frac") m.train_frac = value.get<double>();
      else if (key == "retrain_classifier_on_adv")
        m.retrain_classifier_on_adv = value.get<bool>();
      else if (key == "normalize_features")
        m.normalize_features = value.get<bool>();
      else if (key == "bench_epochs") m.bench_epochs = value.get<int>();
      else
        throw DataError(origin + ": unknown manifest key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(origin + ": bad manifest value: " + e.what());
  }
  if (m.train.mode == TrainMode::InfomaxOnly) m.train.beta = 0.0;
  if (m.seeds.empty()) throw DataError(origin + ": seed list must be nonempty");
  for (const std::string& t : m.tasks)
    if (t != "classification" && t != "link" && t != "community")
      throw DataError(origin + ": unknown task '" + t + "'");
  try {
    m.train.validate();
  } catch (const std::exception& e) {
    throw DataError(origin + ": " + e.what());
  }
  return m;
}

ExperimentManifest load_manifest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json_text(ss.str(), path);
}

AttributedGraph materialize_graph(const ExperimentManifest& m) {
  AttributedGraph g;
  if (!m.dataset.empty()) {
    g = load_graph_file(m.dataset);
  } else {
    g = generate_sbm(m.sbm_nodes_per_block, m.sbm_blocks, m.sbm_p_in,
                     m.sbm_p_out, m.sbm_dim, m.sbm_feature_shift, m.sbm_seed);
  }
  if (m.normalize_features) g.features = row_l2_normalize(g.features);
  return g;
}

// ---------------------------------------------------------------------------
// Evaluation attack + experiment orchestration
// ---------------------------------------------------------------------------

namespace {

json attack_spec_json(const ExperimentManifest& m, const PerturbationSpec& spec) {
  json a;
  a["kind"] = to_string(m.eval_attack);
  a["epsilon"] = spec.epsilon;
  a["pgd_iters"] = spec.pgd_iters;
  a["edge_budget"] = spec.edge_budget;
  a["structure_iters"] = spec.structure_iters;
  return a;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    out += ch;
  }
  out += "\"";
  return out;
}

}  // namespace

EvalAttackOutcome run_eval_attack(const AttributedGraph& g,
                                  const EncoderParams& params,
                                  const LogRegModel& clf,
                                  const std::vector<int>& target_nodes,
                                  const ExperimentManifest& m,
                                  std::uint64_t seed) {
  PerturbationSpec spec = m.eval_spec(g.num_edges());
  EvalAttackOutcome out;
  out.graph = g;
  out.delta = Matrix::Zero(g.n, g.dim());
  out.attack_json = attack_spec_json(m, spec).dump();

  const bool do_structure = (m.eval_attack == EvalAttackKind::Structure ||
                             m.eval_attack == EvalAttackKind::Both) &&
                            spec.edge_budget > 0;
  const bool do_feature = m.eval_attack == EvalAttackKind::Feature ||
                          m.eval_attack == EvalAttackKind::Both;
  if (do_structure) {
    StructureAttackCallbacks cb = make_classification_structure_callbacks(
        params, g, clf, target_nodes);
    StructureAttackResult sres = pgd_structure_attack(
        g, cb, spec, derive_seed(seed, Stream::EvalAttack, 0));
    out.flips = sres.perturbation;
    out.graph = apply_structure_perturbation(g, out.flips);
  }
  out.features = out.graph.features;
  if (do_feature && spec.epsilon > 0) {
    NormalizedAdjacency a = normalize_adjacency(out.graph);
    FeatureLossFn loss = make_classification_attack_loss(
        params, a, out.graph.features, clf, g.labels, target_nodes);
    FeatureAttackResult fres =
        pgd_feature_attack(loss, g.n, g.dim(), spec);
    out.delta = fres.perturbation.delta;
    out.features = out.graph.features + out.delta;
  }
  return out;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path);
  out << "epoch,mi_adv,mi_benign,kl,objective,attack_drop,seconds\n";
  for (const EpochRecord& r : history.records) {
    out << r.epoch << ',' << format_double(r.mi_adv) << ','
        << format_double(r.mi_benign) << ',' << format_double(r.kl) << ','
        << format_double(r.objective) << ',' << format_double(r.attack_drop)
        << ',' << format_double(r.seconds) << '\n';
  }
}

void write_metrics_csv(const std::vector<EvalReport>& rows,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path);
  out << "task,metric,value,std,n_seeds,condition,attack_json\n";
  for (const EvalReport& r : rows) {
    out << r.task << ',' << r.metric << ',' << format_double(r.value) << ','
        << format_double(r.std_dev) << ',' << r.n_seeds << ',' << r.condition
        << ',' << csv_quote(r.attack_json) << '\n';
  }
}

std::string perturbation_to_json(const Matrix& delta,
                                 const StructurePerturbation& flips) {
  json j;
  j["format"] = "rgib-perturbation-v1";
  j["n"] = delta.rows();
  j["d"] = delta.cols();
  json rows = json::array();
  json data = json::array();
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    if (delta.row(i).isZero(0.0)) continue;
    rows.push_back(i);
    json rv = json::array();
    for (Eigen::Index c = 0; c < delta.cols(); ++c) rv.push_back(delta(i, c));
    data.push_back(std::move(rv));
  }
  j["rows"] = std::move(rows);
  j["delta"] = std::move(data);
  json fl = json::array();
  for (auto [u, v] : flips.flips) fl.push_back(json::array({u, v}));
  j["flips"] = std::move(fl);
  return j.dump();
}

void parse_perturbation_json(const std::string& text, int n, int d,
                             Matrix* delta, StructurePerturbation* flips) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("perturbation JSON parse error: ") + e.what());
  }
  if (j.value("format", "") != "rgib-perturbation-v1")
    throw DataError("perturbation JSON: unknown format");
  if (j.at("n").get<int>() != n || j.at("d").get<int>() != d)
    throw DataError("perturbation JSON: shape mismatch with graph");
  *delta = Matrix::Zero(n, d);
  const auto& rows = j.at("rows");
  const auto& data = j.at("delta");
  if (rows.size() != data.size())
    throw DataError("perturbation JSON: rows/delta length mismatch");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    int i = rows[k].get<int>();
    if (i < 0 || i >= n) throw DataError("perturbation JSON: row out of range");
    const auto& rv = data[k];
    if (static_cast<int>(rv.size()) != d)
      throw DataError("perturbation JSON: row width mismatch");
    for (int c = 0; c < d; ++c) (*delta)(i, c) = rv[c].get<double>();
  }
  flips->flips.clear();
  for (const auto& f : j.at("flips")) {
    if (!f.is_array() || f.size() != 2)
      throw DataError("perturbation JSON: bad flip entry");
    flips->flips.emplace_back(f[0].get<int>(), f[1].get<int>());
  }
}

namespace {

struct SeedEval {
  std::map<std::pair<std::string, std::string>, double> values;  // (cond, task)
  std::string attack_json = "{}";
};

const char* metric_for_task(const std::string& task) {
  if (task == "classification") return "accuracy";
  if (task == "link") return "auc";
  return "nmi";
}

}  // namespace

void run_experiment(const ExperimentManifest& m) {
  if (m.out_dir.empty()) throw DataError("run: out_dir must be set");
  AttributedGraph g = materialize_graph(m);
  g.validate();

  const bool needs_labels =
      std::find(m.tasks.begin(), m.tasks.end(), "classification") != m.tasks.end() ||
      std::find(m.tasks.begin(), m.tasks.end(), "community") != m.tasks.end() ||
      m.eval_attack != EvalAttackKind::None;
  if (needs_labels && !g.has_labels())
    throw DataError("run: labels required for the selected tasks/attack");

  fs::create_directories(m.out_dir);
  NormalizedAdjacency a_benign = normalize_adjacency(g);
  std::vector<SeedEval> per_seed;

  for (std::uint64_t seed : m.seeds) {
    TrainConfig cfg = m.train;
    cfg.seed = seed;
    TrainResult tr = train(g, cfg);

    fs::path seed_dir = fs::path(m.out_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);
    save_checkpoint(tr.params, (seed_dir / "checkpoint.json").string());
    write_history_csv(tr.history, (seed_dir / "history.csv").string());

    SeedEval ev;
    EmbeddingSet benign = gcn_forward(tr.params, a_benign, g.features);
    NodeSplit split = split_nodes(g.n, m.train_frac, seed);

    LogRegModel clf;
    bool have_clf = false;
    auto fit_clf = [&](const Matrix& z) {
      Matrix zt(static_cast<Eigen::Index>(split.train.size()), z.cols());
      std::vector<int> yt(split.train.size());
      for (std::size_t i = 0; i < split.train.size(); ++i) {
        zt.row(static_cast<Eigen::Index>(i)) = z.row(split.train[i]);
        yt[i] = g.labels[static_cast<std::size_t>(split.train[i])];
      }
      return logreg_fit(zt, yt, g.num_classes());
    };
    auto test_accuracy = [&](const LogRegModel& model, const Matrix& z) {
      Matrix zs(static_cast<Eigen::Index>(split.test.size()), z.cols());
      std::vector<int> ys(split.test.size());
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        zs.row(static_cast<Eigen::Index>(i)) = z.row(split.test[i]);
        ys[i] = g.labels[static_cast<std::size_t>(split.test[i])];
      }
      return accuracy(model.predict(zs), ys);
    };

    if (g.has_labels()) {
      clf = fit_clf(benign.mu);
      have_clf = true;
    }
    for (const std::string& task : m.tasks) {
      if (task == "classification")
        ev.values[{"benign", task}] = test_accuracy(clf, benign.mu);
      else if (task == "link")
        ev.values[{"benign", task}] = link_prediction(benign.mu, g, 0.1, seed);
      else
        ev.values[{"benign", task}] =
            kmeans_nmi(benign.mu, g.labels, g.num_classes(), 10, seed);
    }

    if (m.eval_attack != EvalAttackKind::None) {
      if (!have_clf) throw DataError("run: attack requires labels");
      EvalAttackOutcome atk =
          run_eval_attack(g, tr.params, clf, split.test, m, seed);
      ev.attack_json = atk.attack_json;
      NormalizedAdjacency a_adv = normalize_adjacency(atk.graph);
      EmbeddingSet adv = gcn_forward(tr.params, a_adv, atk.features);
      LogRegModel adv_clf =
          m.retrain_classifier_on_adv ? fit_clf(adv.mu) : clf;
      for (const std::string& task : m.tasks) {
        if (task == "classification")
          ev.values[{"adversarial", task}] = test_accuracy(adv_clf, adv.mu);
        else if (task == "link")
          ev.values[{"adversarial", task}] = link_prediction(adv.mu, g, 0.1, seed);
        else
          ev.values[{"adversarial", task}] =
              kmeans_nmi(adv.mu, g.labels, g.num_classes(), 10, seed);
      }
    }
    per_seed.push_back(std::move(ev));
  }

  // Aggregate across seeds; write metrics.csv and summary.json once.
  std::vector<EvalReport> rows;
  json summary;
  summary["n_seeds"] = m.seeds.size();
  json srows = json::array();
  std::vector<std::string> conditions = {"benign"};
  if (m.eval_attack != EvalAttackKind::None) conditions.push_back("adversarial");
  for (const std::string& cond : conditions) {
    for (const std::string& task : m.tasks) {
      std::vector<double> vals;
      for (const SeedEval& ev : per_seed) {
        auto it = ev.values.find({cond, task});
        if (it != ev.values.end()) vals.push_back(it->second);
      }
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      double sd = vals.size() > 1
                      ? std::sqrt(var / static_cast<double>(vals.size() - 1))
                      : 0.0;
      EvalReport r;
      r.task = task;
      r.metric = metric_for_task(task);
      r.value = mean;
      r.std_dev = sd;
      r.n_seeds = static_cast<int>(vals.size());
      r.condition = cond;
      r.attack_json = cond == "benign" ? "{}" : per_seed.front().attack_json;
      rows.push_back(r);

      json sr;
      sr["task"] = task;
      sr["metric"] = r.metric;
      sr["mean"] = mean;
      sr["std"] = sd;
      sr["n_seeds"] = r.n_seeds;
      sr["condition"] = cond;
      sr["values"] = vals;
      srows.push_back(std::move(sr));
    }
  }
  summary["rows"] = std::move(srows);
  write_metrics_csv(rows, (fs::path(m.out_dir) / "metrics.csv").string());
  std::ofstream sj(fs::path(m.out_dir) / "summary.json", std::ios::binary);
  if (!sj) throw DataError("cannot write summary.json");
  sj << summary.dump(2) << "\n";
}

BenchReport run_bench(const ExperimentManifest& m) {
  AttributedGraph g = materialize_graph(m);
  BenchReport rep;
  rep.epochs = m.bench_epochs;

  auto time_mode = [&](TrainMode mode) {
    TrainConfig cfg = m.train;
    cfg.mode = mode;
    cfg.seed = m.seeds.front();
    if (mode == TrainMode::RgibS && cfg.edge_budget <= 0)
      cfg.edge_budget = std::max(
          1, static_cast<int>(std::llround(0.2 * g.num_edges())));
    cfg.epochs = 1;  // warmup
    train(g, cfg);
    cfg.epochs = m.bench_epochs;
    TrainResult tr = train(g, cfg);
    double total = 0.0;
    for (const EpochRecord& r : tr.history.records) total += r.seconds;
    return total / static_cast<double>(std::max(1, m.bench_epochs));
  };
  rep.seconds_per_epoch_rgib = time_mode(TrainMode::Rgib);
  rep.seconds_per_epoch_rgib_s = time_mode(TrainMode::RgibS);
  rep.ratio = rep.seconds_per_epoch_rgib_s /
              std::max(rep.seconds_per_epoch_rgib, 1e-12);
  return rep;
}

}  // namespace rgib
