#include "rgib/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rgib/errors.hpp"
#include "rgib/optim.hpp"
#include "rgib/rng.hpp"

namespace rgib {

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("config: alpha must be in [0,1]");
  if (beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
  if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
  if (pgd_iters < 1) throw std::invalid_argument("config: pgd_iters must be >= 1");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (hidden_dim < 1 || embed_dim < 1)
    throw std::invalid_argument("config: dims must be positive");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (sgc_k < 1) throw std::invalid_argument("config: sgc_k must be >= 1");
  if (edge_budget < 0)
    throw std::invalid_argument("config: edge_budget must be >= 0");
  if (mode == TrainMode::InfomaxOnly && beta != 0.0)
    throw std::invalid_argument("config: infomax-only requires beta = 0");
}

PerturbationSpec TrainConfig::attack_spec() const {
  PerturbationSpec s;
  s.epsilon = epsilon;
  s.pgd_iters = pgd_iters;
  s.pgd_step = pgd_step;
  s.edge_budget = edge_budget;
  s.structure_iters = structure_iters;
  return s;
}

ObjectiveParts ObjectiveBuild::parts(const Tape& t) const {
  ObjectiveParts p;
  p.total = t.scalar(total);
  if (mi_adv.valid()) {
    p.mi_adv = t.scalar(mi_adv);
    p.has_adv = true;
  }
  if (mi_benign.valid()) {
    p.mi_benign = t.scalar(mi_benign);
    p.has_benign = true;
  }
  if (kl.valid()) {
    p.kl = t.scalar(kl);
    p.has_kl = true;
  }
  return p;
}

namespace {

// Broadcast a 1 x m readout row to n rows.
Tape::Id broadcast_rows(Tape& t, Tape::Id row, int n) {
  return t.matmul(t.constant(Matrix::Ones(n, 1)), row);
}

// DGI-style summary of a representation matrix: sigmoid of the column mean.
Tape::Id readout_summary_tape(Tape& t, Tape::Id z, int n) {
  Tape::Id mean_row =
      t.matmul(t.constant(Matrix::Constant(1, n, 1.0 / n)), z);
  return t.sigmoid(mean_row);
}

}  // namespace

ObjectiveBuild build_rgib_objective(Tape& t, const EncoderTapeIds& params,
                                    const NormalizedAdjacency& a_benign,
                                    const Matrix& x_benign,
                                    const AdjacencyOp& a_adv, Tape::Id x_adv,
                                    const TrainConfig& cfg, const Matrix& eta,
                                    const CorruptedView& neg) {
  const int n = a_benign.n;
  const bool infomax = cfg.mode == TrainMode::InfomaxOnly;
  const AdjacencyOp a_ben_op = AdjacencyOp::from_sparse(&a_benign);
  const PairBatch batch = PairBatch::all_nodes(n);

  Tape::Id xb = t.constant(x_benign);
  GcnForwardIds ben = gcn_forward_tape(t, params, a_ben_op, xb);
  Tape::Id z_ben = sample_z_tape(t, ben.mu, ben.logvar, eta);

  GcnForwardIds adv;
  Tape::Id z_adv;
  if (!infomax) {
    adv = gcn_forward_tape(t, params, a_adv, x_adv);
    z_adv = sample_z_tape(t, adv.mu, adv.logvar, eta);
  }

  // Summary matrices: row i carries the summary paired with node i. Both the
  // benign and adversarial JSD terms read summaries from the *benign* graph;
  // negatives corrupt only the summary-source features.
  Tape::Id summary_pos, summary_neg;
  if (cfg.estimator == EstimatorKind::Smi) {
    Tape::Id theta_eff = t.matmul(params.w1, params.w2);
    summary_pos = sgc_forward_tape(t, theta_eff, a_ben_op, xb, cfg.sgc_k);
    summary_neg = sgc_forward_tape(t, theta_eff, a_ben_op,
                                   t.constant(neg.features), cfg.sgc_k);
  } else {
    summary_pos = broadcast_rows(t, readout_summary_tape(t, z_ben, n), n);
    GcnForwardIds corr =
        gcn_forward_tape(t, params, a_ben_op, t.constant(neg.features));
    Tape::Id z_corr = sample_z_tape(t, corr.mu, corr.logvar, eta);
    summary_neg = broadcast_rows(t, readout_summary_tape(t, z_corr, n), n);
  }

  ObjectiveBuild out;
  if (infomax) {
    out.mi_benign = jsd_mi_tape(t, z_ben, summary_pos, summary_neg,
                                params.bilinear, batch);
    out.total = out.mi_benign;
    return out;
  }

  std::vector<Tape::Id> terms;
  if (cfg.alpha > 0.0) {
    out.mi_adv = jsd_mi_tape(t, z_adv, summary_pos, summary_neg,
                             params.bilinear, batch);
    terms.push_back(t.scale(out.mi_adv, cfg.alpha));
  }
  if (cfg.alpha < 1.0) {
    out.mi_benign = jsd_mi_tape(t, z_ben, summary_pos, summary_neg,
                                params.bilinear, batch);
    terms.push_back(t.scale(out.mi_benign, 1.0 - cfg.alpha));
  }
  if (cfg.beta > 0.0) {
    out.kl = kl_gauss_diag_tape(t, adv.mu, adv.logvar, ben.mu, ben.logvar);
    terms.push_back(t.scale(out.kl, -cfg.beta));
  }
  Tape::Id total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = t.add(total, terms[i]);
  out.total = total;
  return out;
}

namespace {

struct EpochStreams {
  Matrix eta;
  CorruptedView neg;
};

EpochStreams make_epoch_streams(const AttributedGraph& g,
                                const TrainConfig& cfg, int epoch) {
  EpochStreams s;
  s.eta = sample_noise(g.n, cfg.embed_dim,
                       derive_seed(cfg.seed, Stream::SampleNoise, epoch));
  s.neg = sample_negatives(g, NegativeMode::RowShuffle,
                           derive_seed(cfg.seed, Stream::Negatives, epoch));
  return s;
}

ObjectiveParts evaluate_objective(const AttributedGraph& g,
                                  const NormalizedAdjacency& a_benign,
                                  const NormalizedAdjacency& a_adv,
                                  const Matrix& x_adv,
                                  const EncoderParams& params,
                                  const TrainConfig& cfg,
                                  const EpochStreams& streams) {
  Tape t;
  EncoderTapeIds ids = put_encoder_params(t, params);
  ObjectiveBuild build = build_rgib_objective(
      t, ids, a_benign, g.features, AdjacencyOp::from_sparse(&a_adv),
      cfg.mode == TrainMode::InfomaxOnly ? Tape::Id{} : t.constant(x_adv),
      cfg, streams.eta, streams.neg);
  return build.parts(t);
}

}  // namespace

ObjectiveParts rgib_objective(const AttributedGraph& g,
                              const Matrix& perturbed_features,
                              const EncoderParams& params,
                              const TrainConfig& cfg, int epoch,
                              const StructurePerturbation* flips) {
  cfg.validate();
  NormalizedAdjacency a_benign = normalize_adjacency(g);
  NormalizedAdjacency a_adv =
      flips ? normalize_adjacency(apply_structure_perturbation(g, *flips))
            : a_benign;
  EpochStreams streams = make_epoch_streams(g, cfg, epoch);
  return evaluate_objective(g, a_benign, a_adv, perturbed_features, params,
                            cfg, streams);
}

TrainResult train(const AttributedGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  g.validate();
  const NormalizedAdjacency a_benign = normalize_adjacency(g);
  const int n = g.n;
  const int d = g.dim();

  TrainResult result;
  result.params =
      init_encoder_params(d, cfg.hidden_dim, cfg.embed_dim, cfg.seed);

  std::vector<Matrix*> tensors = result.params.tensors();
  std::vector<Matrix> param_values;
  for (Matrix* m : tensors) param_values.push_back(*m);
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(param_values);

  const PerturbationSpec spec = cfg.attack_spec();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    EpochStreams streams = make_epoch_streams(g, cfg, epoch);

    // Simulation step: worst-case perturbation for the current parameters.
    Matrix delta = Matrix::Zero(n, d);
    StructurePerturbation flips;
    NormalizedAdjacency a_adv = a_benign;
    double attack_drop = 0.0;

    if (cfg.mode != TrainMode::InfomaxOnly) {
      double loss_unperturbed = 0.0;
      if (cfg.mode == TrainMode::RgibS && cfg.edge_budget > 0) {
        StructureAttackCallbacks cb;
        cb.relaxed_loss = [&](Tape& t, Tape::Id a_hat) {
          EncoderTapeIds ids = put_encoder_params(t, result.params);
          ObjectiveBuild build = build_rgib_objective(
              t, ids, a_benign, g.features, AdjacencyOp::from_dense(a_hat),
              t.constant(g.features), cfg, streams.eta, streams.neg);
          return build.total;
        };
        cb.discrete_loss = [&](const StructurePerturbation& pert) {
          NormalizedAdjacency a_flip =
              normalize_adjacency(apply_structure_perturbation(g, pert));
          return evaluate_objective(g, a_benign, a_flip, g.features,
                                    result.params, cfg, streams)
              .total;
        };
        StructureAttackResult sres = pgd_structure_attack(
            g, cb, spec, derive_seed(cfg.seed, Stream::StructureAttack, epoch));
        flips = sres.perturbation;
        loss_unperturbed = sres.loss_at_zero;
        if (!flips.flips.empty())
          a_adv = normalize_adjacency(apply_structure_perturbation(g, flips));
      }

      FeatureLossFn loss_fn = [&](const Matrix& dx) {
        Tape t;
        EncoderTapeIds ids = put_encoder_params(t, result.params);
        Tape::Id dx_id = t.input(dx);
        Tape::Id x_adv = t.add(t.constant(g.features), dx_id);
        ObjectiveBuild build = build_rgib_objective(
            t, ids, a_benign, g.features, AdjacencyOp::from_sparse(&a_adv),
            x_adv, cfg, streams.eta, streams.neg);
        FeatureAttackEval ev;
        ev.value = t.scalar(build.total);
        ev.grad = t.gradients(build.total, {dx_id})[0];
        return ev;
      };
      FeatureAttackResult ares = pgd_feature_attack(loss_fn, n, d, spec);
      delta = ares.perturbation.delta;
      if (cfg.mode == TrainMode::RgibS && cfg.edge_budget > 0)
        attack_drop = loss_unperturbed - ares.loss_at_best;
      else
        attack_drop = ares.loss_at_start - ares.loss_at_best;
    }

    // Optimization step: one Adam ascent step at the found perturbation.
    Matrix x_adv = g.features + delta;
    {
      Tape t;
      EncoderTapeIds ids = put_encoder_params(t, result.params);
      ObjectiveBuild build = build_rgib_objective(
          t, ids, a_benign, g.features, AdjacencyOp::from_sparse(&a_adv),
          cfg.mode == TrainMode::InfomaxOnly ? Tape::Id{} : t.constant(x_adv),
          cfg, streams.eta, streams.neg);
      if (!std::isfinite(t.scalar(build.total)))
        throw NumericError("train: non-finite objective at epoch " +
                           std::to_string(epoch));
      std::vector<Matrix> grads = t.gradients(build.total, ids.all());
      for (Matrix& gm : grads) gm = -gm;  // ascent
      for (std::size_t i = 0; i < tensors.size(); ++i)
        param_values[i] = *tensors[i];
      adam_step(param_values, grads, adam);
      for (std::size_t i = 0; i < tensors.size(); ++i)
        *tensors[i] = param_values[i];
    }

    // Log term values at the updated parameters so the final record matches
    // an independent rgib_objective call on the checkpoint.
    ObjectiveParts parts = evaluate_objective(g, a_benign, a_adv, x_adv,
                                              result.params, cfg, streams);
    if (!std::isfinite(parts.total))
      throw NumericError("train: non-finite objective at epoch " +
                         std::to_string(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mi_adv = parts.mi_adv;
    rec.mi_benign = parts.mi_benign;
    rec.kl = parts.kl;
    rec.objective = parts.total;
    rec.attack_drop = attack_drop;
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.history.records.push_back(rec);
    result.last_delta = delta;
    result.last_flips = flips;
  }
  return result;
}

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  nlohmann::json j;
  j["format"] = "rgib-checkpoint-v1";
  nlohmann::json tensors = nlohmann::json::object();
  auto ptrs = params.tensors();
  const auto& names = EncoderParams::tensor_names();
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const Matrix& m = *ptrs[i];
    nlohmann::json entry;
    entry["rows"] = m.rows();
    entry["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    entry["data"] = std::move(data);
    tensors[names[i]] = std::move(entry);
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_checkpoint: cannot open " + path);
  out << j.dump();
  out << "\n";
  if (!out) throw DataError("save_checkpoint: write failed: " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_checkpoint: parse error in " + path + ": " +
                             e.what());
  }
  if (j.value("format", "") != "rgib-checkpoint-v1")
    throw DataError("load_checkpoint: unknown format in " + path);
  EncoderParams p;
  auto ptrs = p.tensors();
  const auto& names = EncoderParams::tensor_names();
  const auto& tensors = j.at("tensors");
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const auto& entry = tensors.at(names[i]);
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    const auto& data = entry.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw DataError("load_checkpoint: size mismatch for " + names[i]);
    Matrix& m = *ptrs[i];
    m.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return p;
}

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Rgib: return "rgib";
    case TrainMode::RgibS: return "rgib-s";
    case TrainMode::InfomaxOnly: return "infomax-only";
  }
  return "rgib";
}

const char* to_string(EstimatorKind kind) {
  return kind == EstimatorKind::Smi ? "smi" : "readout";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "rgib") return TrainMode::Rgib;
  if (s == "rgib-s") return TrainMode::RgibS;
  if (s == "infomax-only") return TrainMode::InfomaxOnly;
  throw std::invalid_argument("unknown mode: " + s);
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "smi") return EstimatorKind::Smi;
  if (s == "readout") return EstimatorKind::Readout;
  throw std::invalid_argument("unknown estimator: " + s);
}

}  // namespace rgib
