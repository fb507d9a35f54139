// Command-line front end: train / attack / eval / verify / bench / gen-sbm.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgib/io.hpp"
#include "rgib/theory.hpp"

namespace fs = std::filesystem;
using namespace rgib;

namespace {

struct CommonGraphArgs {
  std::string graph_path;
  bool no_normalize = false;

  AttributedGraph load() const {
    AttributedGraph g = load_graph_file(graph_path);
    if (!no_normalize) g.features = row_l2_normalize(g.features);
    return g;
  }
};

void add_train_flags(CLI::App* cmd, ExperimentManifest& m) {
  cmd->add_option("--alpha", m.train.alpha, "trade-off between MI terms");
  cmd->add_option("--beta", m.train.beta, "weight of the KL term");
  cmd->add_option("--epsilon", m.train.epsilon, "training feature budget");
  cmd->add_option("--pgd-iters", m.train.pgd_iters, "PGD iterations");
  cmd->add_option("--pgd-step", m.train.pgd_step, "PGD step size (0 = auto)");
  cmd->add_option("--epochs", m.train.epochs, "training epochs");
  cmd->add_option("--hidden-dim", m.train.hidden_dim, "GCN hidden width");
  cmd->add_option("--embed-dim", m.train.embed_dim, "embedding width");
  cmd->add_option("--lr", m.train.lr, "Adam learning rate");
  cmd->add_option_function<std::string>(
      "--estimator",
      [&m](const std::string& v) { m.train.estimator = estimator_from_string(v); },
      "MI estimator: smi | readout");
  cmd->add_option("--sgc-k", m.train.sgc_k, "SGC propagation depth");
  cmd->add_option_function<std::string>(
      "--mode",
      [&m](const std::string& v) { m.train.mode = train_mode_from_string(v); },
      "rgib | rgib-s | infomax-only");
  cmd->add_option("--edge-budget", m.train.edge_budget,
                  "training structure budget (rgib-s)");
  cmd->add_option("--structure-iters", m.train.structure_iters,
                  "structure attack iterations");
}

int cmd_train(const std::string& manifest_path, std::uint64_t seed,
              const std::string& out_dir, const std::string& graph_path,
              const ExperimentManifest& flag_overlay, CLI::App* cmd) {
  ExperimentManifest m;
  if (!manifest_path.empty()) m = load_manifest_file(manifest_path);
  // Flags given on the command line win over the manifest.
  auto touched = [&](const std::string& name) {
    return cmd->count(name) > 0;
  };
  if (touched("--alpha")) m.train.alpha = flag_overlay.train.alpha;
  if (touched("--beta")) m.train.beta = flag_overlay.train.beta;
  if (touched("--epsilon")) m.train.epsilon = flag_overlay.train.epsilon;
  if (touched("--pgd-iters")) m.train.pgd_iters = flag_overlay.train.pgd_iters;
  if (touched("--pgd-step")) m.train.pgd_step = flag_overlay.train.pgd_step;
  if (touched("--epochs")) m.train.epochs = flag_overlay.train.epochs;
  if (touched("--hidden-dim")) m.train.hidden_dim = flag_overlay.train.hidden_dim;
  if (touched("--embed-dim")) m.train.embed_dim = flag_overlay.train.embed_dim;
  if (touched("--lr")) m.train.lr = flag_overlay.train.lr;
  if (touched("--estimator")) m.train.estimator = flag_overlay.train.estimator;
  if (touched("--sgc-k")) m.train.sgc_k = flag_overlay.train.sgc_k;
  if (touched("--mode")) m.train.mode = flag_overlay.train.mode;
  if (touched("--edge-budget")) m.train.edge_budget = flag_overlay.train.edge_budget;
  if (touched("--structure-iters"))
    m.train.structure_iters = flag_overlay.train.structure_iters;
  if (!graph_path.empty()) m.dataset = graph_path;
  if (manifest_path.empty() || m.seeds == std::vector<std::uint64_t>{0})
    m.seeds = {seed};
  m.out_dir = out_dir;
  if (m.train.mode == TrainMode::InfomaxOnly) m.train.beta = 0.0;
  m.train.validate();
  run_experiment(m);
  std::cout << "wrote " << (fs::path(out_dir) / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_gen_sbm(int n_per_block, int blocks, double p_in, double p_out, int dim,
                double shift, std::uint64_t seed, const std::string& out) {
  AttributedGraph g = generate_sbm(n_per_block, blocks, p_in, p_out, dim, shift, seed);
  save_graph_file(g, out);
  std::cout << "wrote " << out << " (" << g.n << " nodes, " << g.num_edges()
            << " edges)\n";
  return 0;
}

int cmd_attack(const CommonGraphArgs& ga, const std::string& checkpoint,
               const std::string& kind_str, double epsilon, int pgd_iters,
               double edge_budget_frac, int structure_iters, std::uint64_t seed,
               const std::string& out) {
  AttributedGraph g = ga.load();
  if (!g.has_labels())
    throw DataError("attack: graph must carry labels (attack targets the classifier)");
  EncoderParams params = load_checkpoint(checkpoint);

  ExperimentManifest m;
  m.eval_attack = eval_attack_kind_from_string(kind_str);
  m.eval_epsilon = epsilon;
  m.eval_pgd_iters = pgd_iters;
  m.eval_edge_budget_frac = edge_budget_frac;
  m.eval_structure_iters = structure_iters;

  NormalizedAdjacency a = normalize_adjacency(g);
  EmbeddingSet benign = gcn_forward(params, a, g.features);
  NodeSplit split = split_nodes(g.n, m.train_frac, seed);
  Matrix zt(static_cast<Eigen::Index>(split.train.size()), benign.mu.cols());
  std::vector<int> yt(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    zt.row(static_cast<Eigen::Index>(i)) = benign.mu.row(split.train[i]);
    yt[i] = g.labels[static_cast<std::size_t>(split.train[i])];
  }
  LogRegModel clf = logreg_fit(zt, yt, g.num_classes());
  EvalAttackOutcome outcome = run_eval_attack(g, params, clf, split.test, m, seed);

  std::ofstream os(out, std::ios::binary);
  if (!os) throw DataError("cannot write " + out);
  os << perturbation_to_json(outcome.delta, outcome.flips) << "\n";
  std::cout << "wrote " << out << " (" << outcome.flips.flips.size()
            << " flips, max row norm "
            << format_double(FeaturePerturbation{outcome.delta}.max_row_norm())
            << ")\n";
  return 0;
}

int cmd_eval(const CommonGraphArgs& ga, const std::string& checkpoint,
             const std::string& perturbation_path,
             const std::vector<std::string>& tasks, std::uint64_t seed,
             double train_frac, const std::string& out_csv) {
  AttributedGraph g = ga.load();
  EncoderParams params = load_checkpoint(checkpoint);

  AttributedGraph g_eval = g;
  Matrix features = g.features;
  std::string condition = "benign";
  std::string attack_json = "{}";
  if (!perturbation_path.empty()) {
    std::ifstream in(perturbation_path, std::ios::binary);
    if (!in) throw DataError("cannot open perturbation: " + perturbation_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    Matrix delta;
    StructurePerturbation flips;
    parse_perturbation_json(ss.str(), g.n, g.dim(), &delta, &flips);
    g_eval = apply_structure_perturbation(g, flips);
    features = g_eval.features + delta;
    condition = "adversarial";
    attack_json = "{\"source\":\"" + perturbation_path + "\"}";
  }

  NormalizedAdjacency a = normalize_adjacency(g_eval);
  EmbeddingSet es = gcn_forward(params, a, features);

  std::vector<EvalReport> rows;
  for (const std::string& task : tasks) {
    EvalReport r;
    r.task = task;
    r.n_seeds = 1;
    r.condition = condition;
    r.attack_json = attack_json;
    if (task == "classification") {
      if (!g.has_labels()) throw DataError("eval: classification needs labels");
      NodeSplit split = split_nodes(g.n, train_frac, seed);
      // Classifier fit on benign embeddings, tested on the evaluated view.
      EmbeddingSet benign = gcn_forward(params, normalize_adjacency(g), g.features);
      Matrix zt(static_cast<Eigen::Index>(split.train.size()), benign.mu.cols());
      std::vector<int> yt(split.train.size());
      for (std::size_t i = 0; i < split.train.size(); ++i) {
        zt.row(static_cast<Eigen::Index>(i)) = benign.mu.row(split.train[i]);
        yt[i] = g.labels[static_cast<std::size_t>(split.train[i])];
      }
      LogRegModel clf = logreg_fit(zt, yt, g.num_classes());
      Matrix zs(static_cast<Eigen::Index>(split.test.size()), es.mu.cols());
      std::vector<int> ys(split.test.size());
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        zs.row(static_cast<Eigen::Index>(i)) = es.mu.row(split.test[i]);
        ys[i] = g.labels[static_cast<std::size_t>(split.test[i])];
      }
      r.metric = "accuracy";
      r.value = accuracy(clf.predict(zs), ys);
    } else if (task == "link") {
      r.metric = "auc";
      r.value = link_prediction(es.mu, g, 0.1, seed);
    } else if (task == "community") {
      if (!g.has_labels()) throw DataError("eval: community needs labels");
      r.metric = "nmi";
      r.value = kmeans_nmi(es.mu, g.labels, g.num_classes(), 10, seed);
    } else {
      throw DataError("eval: unknown task '" + task + "'");
    }
    rows.push_back(r);
    std::cout << r.task << " " << r.metric << " = " << format_double(r.value)
              << " (" << condition << ")\n";
  }

  // Append, creating the header only once.
  bool exists = fs::exists(out_csv);
  std::ofstream out(out_csv, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot open for write: " + out_csv);
  if (!exists) out << "task,metric,value,std,n_seeds,condition,attack_json\n";
  for (const EvalReport& r : rows) {
    std::string quoted = "\"";
    for (char ch : r.attack_json) {
      if (ch == '"') quoted += "\"\"";
      quoted += ch;
    }
    quoted += "\"";
    out << r.task << ',' << r.metric << ',' << format_double(r.value) << ','
        << format_double(r.std_dev) << ',' << r.n_seeds << ',' << r.condition
        << ',' << quoted << '\n';
  }
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  auto checks = run_theory_checks(seed);
  bool all = true;
  std::printf("%-34s %-6s %s\n", "check", "status", "detail");
  for (const VerifyCheck& c : checks) {
    std::printf("%-34s %-6s %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                c.detail.c_str());
    all = all && c.pass;
  }
  return all ? 0 : 3;
}

int cmd_bench(const std::string& manifest_path, const std::string& out) {
  ExperimentManifest m = load_manifest_file(manifest_path);
  BenchReport rep = run_bench(m);
  std::printf("per-epoch seconds  rgib=%.4f  rgib-s=%.4f  ratio=%.2f  (%d epochs)\n",
              rep.seconds_per_epoch_rgib, rep.seconds_per_epoch_rgib_s,
              rep.ratio, rep.epochs);
  if (!out.empty()) {
    nlohmann::json j;
    j["seconds_per_epoch_rgib"] = rep.seconds_per_epoch_rgib;
    j["seconds_per_epoch_rgib_s"] = rep.seconds_per_epoch_rgib_s;
    j["ratio"] = rep.ratio;
    j["epochs"] = rep.epochs;
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("cannot write " + out);
    os << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust graph information bottleneck: training, attacks, "
               "evaluation, and verification"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand(
      "train", "Train encoders and evaluate them per an experiment manifest");
  std::string train_manifest, train_out, train_graph;
  std::uint64_t train_seed = 0;
  ExperimentManifest flag_overlay;
  train_cmd->add_option("--manifest", train_manifest, "experiment manifest (JSON)");
  train_cmd->add_option("--graph", train_graph, "graph file (overrides manifest)");
  train_cmd->add_option("--seed", train_seed, "master seed")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  add_train_flags(train_cmd, flag_overlay);

  // gen-sbm
  auto* gen_cmd = app.add_subcommand("gen-sbm", "Write a synthetic SBM graph file");
  int gen_npb = 100, gen_blocks = 3, gen_dim = 32;
  double gen_pin = 0.1, gen_pout = 0.02, gen_shift = 1.0;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  gen_cmd->add_option("--n-per-block", gen_npb, "nodes per block");
  gen_cmd->add_option("--blocks", gen_blocks, "block count");
  gen_cmd->add_option("--p-in", gen_pin, "intra-block edge probability");
  gen_cmd->add_option("--p-out", gen_pout, "inter-block edge probability");
  gen_cmd->add_option("--dim", gen_dim, "feature dimension");
  gen_cmd->add_option("--shift", gen_shift, "block mean offset");
  gen_cmd->add_option("--seed", gen_seed, "seed")->required();
  gen_cmd->add_option("--out", gen_out, "output path")->required();

  // attack
  auto* attack_cmd =
      app.add_subcommand("attack", "Generate an evaluation-time perturbation");
  CommonGraphArgs attack_graph;
  std::string attack_ckpt, attack_kind = "feature", attack_out;
  double attack_eps = 1e-3, attack_budget_frac = 0.2;
  int attack_iters = 40, attack_struct_iters = 20;
  std::uint64_t attack_seed = 0;
  attack_cmd->add_option("--graph", attack_graph.graph_path, "graph file")->required();
  attack_cmd->add_flag("--no-normalize", attack_graph.no_normalize,
                       "skip row l2 feature normalization");
  attack_cmd->add_option("--checkpoint", attack_ckpt, "encoder checkpoint")->required();
  attack_cmd->add_option("--kind", attack_kind, "feature | structure | both");
  attack_cmd->add_option("--epsilon", attack_eps, "feature budget");
  attack_cmd->add_option("--pgd-iters", attack_iters, "PGD iterations");
  attack_cmd->add_option("--edge-budget-frac", attack_budget_frac,
                         "structure budget as a fraction of |E|");
  attack_cmd->add_option("--structure-iters", attack_struct_iters,
                         "structure attack iterations");
  attack_cmd->add_option("--seed", attack_seed, "seed")->required();
  attack_cmd->add_option("--out", attack_out, "perturbation JSON path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate frozen embeddings");
  CommonGraphArgs eval_graph;
  std::string eval_ckpt, eval_pert, eval_out;
  std::vector<std::string> eval_tasks = {"classification", "link", "community"};
  std::uint64_t eval_seed = 0;
  double eval_train_frac = 0.1;
  eval_cmd->add_option("--graph", eval_graph.graph_path, "graph file")->required();
  eval_cmd->add_flag("--no-normalize", eval_graph.no_normalize,
                     "skip row l2 feature normalization");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "encoder checkpoint")->required();
  eval_cmd->add_option("--perturbation", eval_pert, "perturbation JSON to apply");
  eval_cmd->add_option("--tasks", eval_tasks, "tasks to run");
  eval_cmd->add_option("--train-frac", eval_train_frac, "classifier train fraction");
  eval_cmd->add_option("--seed", eval_seed, "seed")->required();
  eval_cmd->add_option("--out", eval_out, "metrics CSV (appended)")->required();

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the information-theory check suite");
  std::uint64_t verify_seed = 0;
  verify_cmd->add_option("--seed", verify_seed, "seed");

  // bench
  auto* bench_cmd = app.add_subcommand(
      "bench", "Compare per-epoch cost of rgib vs rgib-s training");
  std::string bench_manifest, bench_out;
  bench_cmd->add_option("--manifest", bench_manifest, "experiment manifest")->required();
  bench_cmd->add_option("--out", bench_out, "timing report JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed())
      return cmd_train(train_manifest, train_seed, train_out, train_graph,
                       flag_overlay, train_cmd);
    if (gen_cmd->parsed())
      return cmd_gen_sbm(gen_npb, gen_blocks, gen_pin, gen_pout, gen_dim,
                         gen_shift, gen_seed, gen_out);
    if (attack_cmd->parsed())
      return cmd_attack(attack_graph, attack_ckpt, attack_kind, attack_eps,
                        attack_iters, attack_budget_frac, attack_struct_iters,
                        attack_seed, attack_out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_graph, eval_ckpt, eval_pert, eval_tasks, eval_seed,
                      eval_train_frac, eval_out);
    if (verify_cmd->parsed()) return cmd_verify(verify_seed);
    if (bench_cmd->parsed()) return cmd_bench(bench_manifest, bench_out);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
