#include "rgib/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "rgib/rng.hpp"

namespace rgib {

Matrix LogRegModel::logits(const Matrix& z) const {
  return (z * w).rowwise() + b.transpose();
}

Matrix LogRegModel::predict_proba(const Matrix& z) const {
  Matrix u = logits(z);
  Matrix p(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double mx = u.row(i).maxCoeff();
    Eigen::RowVectorXd e = (u.row(i).array() - mx).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

std::vector<int> LogRegModel::predict(const Matrix& z) const {
  Matrix u = logits(z);
  std::vector<int> out(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    Eigen::Index arg;
    u.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

LogRegModel logreg_fit(const Matrix& z, const std::vector<int>& y,
                       int n_classes, const LogRegOptions& opt) {
  if (z.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("logreg_fit: size mismatch");
  std::set<int> classes(y.begin(), y.end());
  if (classes.size() < 2)
    throw std::invalid_argument("logreg_fit: single-class training set");
  const auto n = z.rows();
  const auto m = z.cols();
  Matrix onehot = Matrix::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i)
    onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

  LogRegModel model;
  model.w = Matrix::Zero(m, n_classes);
  model.b = Vector::Zero(n_classes);
  for (int it = 0; it < opt.iters; ++it) {
    Matrix p = model.predict_proba(z);
    Matrix diff = (p - onehot) / static_cast<double>(n);
    Matrix gw = z.transpose() * diff + opt.l2_reg * model.w;
    Vector gb = diff.colwise().sum().transpose();
    model.w -= opt.lr * gw;
    model.b -= opt.lr * gb;
  }
  return model;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("accuracy: size mismatch");
  int hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double logreg_classify(const Matrix& z_train, const std::vector<int>& y_train,
                       const Matrix& z_test, const std::vector<int>& y_test,
                       const LogRegOptions& opt) {
  int n_classes = 0;
  for (int v : y_train) n_classes = std::max(n_classes, v + 1);
  for (int v : y_test) n_classes = std::max(n_classes, v + 1);
  LogRegModel model = logreg_fit(z_train, y_train, n_classes, opt);
  return accuracy(model.predict(z_test), y_test);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: both classes required");

  // Average ranks over ties, then the Mann-Whitney statistic.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (labels[k]) rank_sum_pos += rank[k];
  double u = rank_sum_pos - static_cast<double>(n_pos) *
                                (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double link_prediction(const Matrix& z, const AttributedGraph& g,
                       double test_frac, std::uint64_t seed) {
  if (g.num_edges() < 10)
    throw std::invalid_argument("link_prediction: too few edges");
  auto rng = make_rng(seed, Stream::EvalSplit);
  std::vector<std::size_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_test =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::floor(test_frac * g.edges.size())));
  std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());

  auto sample_nonedges = [&](std::size_t count,
                             std::set<std::pair<int, int>>& used) {
    std::vector<std::pair<int, int>> out;
    std::uniform_int_distribution<int> pick(0, g.n - 1);
    while (out.size() < count) {
      int u = pick(rng), v = pick(rng);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (edge_set.count({u, v}) || used.count({u, v})) continue;
      used.insert({u, v});
      out.emplace_back(u, v);
    }
    return out;
  };

  std::vector<std::pair<int, int>> test_pos, train_pos;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_test ? test_pos : train_pos).push_back(g.edges[order[k]]);
  std::set<std::pair<int, int>> used;
  auto test_neg = sample_nonedges(test_pos.size(), used);
  auto train_neg = sample_nonedges(train_pos.size(), used);

  auto features = [&](const std::vector<std::pair<int, int>>& pairs) {
    Matrix f(static_cast<Eigen::Index>(pairs.size()), z.cols());
    for (std::size_t k = 0; k < pairs.size(); ++k)
      f.row(static_cast<Eigen::Index>(k)) =
          z.row(pairs[k].first).cwiseProduct(z.row(pairs[k].second));
    return f;
  };
  Matrix f_train(static_cast<Eigen::Index>(train_pos.size() + train_neg.size()),
                 z.cols());
  f_train << features(train_pos), features(train_neg);
  std::vector<int> y_train(train_pos.size(), 1);
  y_train.insert(y_train.end(), train_neg.size(), 0);

  LogRegModel model = logreg_fit(f_train, y_train, 2);
  Matrix f_test(static_cast<Eigen::Index>(test_pos.size() + test_neg.size()),
                z.cols());
  f_test << features(test_pos), features(test_neg);
  std::vector<int> y_test(test_pos.size(), 1);
  y_test.insert(y_test.end(), test_neg.size(), 0);
  Matrix proba = model.predict_proba(f_test);
  std::vector<double> scores(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index k = 0; k < proba.rows(); ++k)
    scores[static_cast<std::size_t>(k)] = proba(k, 1);
  return auc(scores, y_test);
}

std::vector<int> kmeans_assign(const Matrix& z, int k, int restarts,
                               std::uint64_t seed) {
  const auto n = z.rows();
  if (k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
  if (k > n) throw std::invalid_argument("kmeans: k exceeds point count");

  std::vector<int> best_assign(static_cast<std::size_t>(n), 0);
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int rs = 0; rs < std::max(1, restarts); ++rs) {
    auto rng = make_rng(seed, Stream::Kmeans, static_cast<std::uint64_t>(rs));
    // k-means++ seeding
    std::vector<Eigen::Index> centers;
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.push_back(first(rng));
    Vector d2 = (z.rowwise() - z.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
      double total = d2.sum();
      Eigen::Index chosen = 0;
      if (total > 0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += d2(i);
          if (acc >= r) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = first(rng);
      }
      centers.push_back(chosen);
      Vector nd = (z.rowwise() - z.row(chosen)).rowwise().squaredNorm();
      d2 = d2.cwiseMin(nd);
    }
    Matrix c(k, z.cols());
    for (int i = 0; i < k; ++i) c.row(i) = z.row(centers[i]);

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg;
        (c.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&arg);
        if (assign[static_cast<std::size_t>(i)] != static_cast<int>(arg)) {
          assign[static_cast<std::size_t>(i)] = static_cast<int>(arg);
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(k, z.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += z.row(i);
        counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]++;
      }
      for (int j = 0; j < k; ++j)
        if (counts[static_cast<std::size_t>(j)] > 0)
          c.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += (z.row(i) - c.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }
  return best_assign;
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("nmi: size mismatch");
  const double n = static_cast<double>(a.size());
  int ka = 1 + *std::max_element(a.begin(), a.end());
  int kb = 1 + *std::max_element(b.begin(), b.end());
  Matrix joint = Matrix::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) joint(a[i], b[i]) += 1.0 / n;
  Vector pa = joint.rowwise().sum();
  Vector pb = joint.colwise().sum().transpose();
  auto ent = [](const Vector& p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p(i) > 0) h -= p(i) * std::log(p(i));
    return h;
  };
  double ha = ent(pa), hb = ent(pb);
  double mi = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j)
      if (joint(i, j) > 0)
        mi += joint(i, j) * std::log(joint(i, j) / (pa(i) * pb(j)));
  double denom = 0.5 * (ha + hb);
  if (denom <= 0) return (ha == hb) ? 1.0 : 0.0;
  return mi / denom;
}

double kmeans_nmi(const Matrix& z, const std::vector<int>& labels, int k,
                  int restarts, std::uint64_t seed) {
  if (z.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("kmeans_nmi: size mismatch");
  return nmi(kmeans_assign(z, k, restarts, seed), labels);
}

NodeSplit split_nodes(int n, double train_frac, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, Stream::EvalSplit, 1);
  std::shuffle(order.begin(), order.end(), rng);
  NodeSplit split;
  int n_train = std::max(1, static_cast<int>(std::floor(train_frac * n)));
  for (int i = 0; i < n; ++i)
    (i < n_train ? split.train : split.test).push_back(order[static_cast<std::size_t>(i)]);
  return split;
}

Tape::Id classification_ce_tape(Tape& t, const EncoderTapeIds& params,
                                const AdjacencyOp& a, Tape::Id x,
                                const LogRegModel& clf,
                                const std::vector<int>& labels,
                                const std::vector<int>& nodes) {
  GcnForwardIds fwd = gcn_forward_tape(t, params, a, x);
  Tape::Id mu = t.row_select(fwd.mu, nodes);
  const int nn = static_cast<int>(nodes.size());
  const int nc = static_cast<int>(clf.w.cols());
  Tape::Id logits =
      t.add(t.matmul(mu, t.constant(clf.w)),
            t.matmul(t.constant(Matrix::Ones(nn, 1)),
                     t.constant(clf.b.transpose())));
  // log-sum-exp with a detached row shift; the identity is exact for any
  // constant shift.
  Matrix shift(nn, 1);
  const Matrix& u = t.value(logits);
  for (int i = 0; i < nn; ++i) shift(i, 0) = u.row(i).maxCoeff();
  Tape::Id shift_b =
      t.matmul(t.constant(shift), t.constant(Matrix::Ones(1, nc)));
  Tape::Id lse = t.add(t.log(t.row_sum(t.exp(t.sub(logits, shift_b)))),
                       t.constant(shift));
  Matrix onehot = Matrix::Zero(nn, nc);
  for (int i = 0; i < nn; ++i) onehot(i, labels[nodes[i]]) = 1.0;
  Tape::Id picked = t.row_sum(t.hadamard(logits, t.constant(onehot)));
  return t.mean(t.sub(lse, picked));
}

FeatureLossFn make_classification_attack_loss(const EncoderParams& params,
                                              const NormalizedAdjacency& a,
                                              const Matrix& x,
                                              const LogRegModel& clf,
                                              const std::vector<int>& labels,
                                              const std::vector<int>& nodes) {
  return [&params, &a, x, clf, labels, nodes](const Matrix& delta) {
    Tape t;
    EncoderTapeIds ids = put_encoder_params(t, params);
    Tape::Id d_id = t.input(delta);
    Tape::Id xp = t.add(t.constant(x), d_id);
    Tape::Id ce = classification_ce_tape(t, ids, AdjacencyOp::from_sparse(&a),
                                         xp, clf, labels, nodes);
    Tape::Id obj = t.scale(ce, -1.0);  // attacker maximizes CE
    FeatureAttackEval ev;
    ev.value = t.scalar(obj);
    ev.grad = t.gradients(obj, {d_id})[0];
    return ev;
  };
}

StructureAttackCallbacks make_classification_structure_callbacks(
    const EncoderParams& params, const AttributedGraph& g,
    const LogRegModel& clf, const std::vector<int>& nodes) {
  StructureAttackCallbacks cb;
  cb.relaxed_loss = [&params, &g, clf, nodes](Tape& t, Tape::Id a_hat) {
    EncoderTapeIds ids = put_encoder_params(t, params);
    Tape::Id ce =
        classification_ce_tape(t, ids, AdjacencyOp::from_dense(a_hat),
                               t.constant(g.features), clf, g.labels, nodes);
    return t.scale(ce, -1.0);
  };
  cb.discrete_loss = [&params, &g, clf, nodes](const StructurePerturbation& pert) {
    AttributedGraph flipped = apply_structure_perturbation(g, pert);
    NormalizedAdjacency a = normalize_adjacency(flipped);
    Tape t;
    EncoderTapeIds ids = put_encoder_params(t, params);
    Tape::Id ce =
        classification_ce_tape(t, ids, AdjacencyOp::from_sparse(&a),
                               t.constant(g.features), clf, g.labels, nodes);
    return -t.scalar(ce);
  };
  return cb;
}

}  // namespace rgib
