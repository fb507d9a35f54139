#include "rgib/tape.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace rgib {

namespace {
std::atomic<std::uint32_t> g_tape_serial{1};

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
}  // namespace

Tape::Tape() : serial_(g_tape_serial.fetch_add(1)) {}

int Tape::check(Id id) const {
  if (id.owner != serial_)
    throw std::invalid_argument("tape: id does not belong to this tape");
  if (id.index < 0 || id.index >= static_cast<int>(nodes_.size()))
    throw std::out_of_range("tape: id out of range");
  return id.index;
}

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Id{static_cast<int>(nodes_.size()) - 1, serial_};
}

Tape::Id Tape::input(Matrix value) {
  Node n;
  n.val = std::move(value);
  n.is_input = true;
  return push(std::move(n));
}

Tape::Id Tape::constant(Matrix value) {
  Node n;
  n.val = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::scalar_input(double v) { return input(Matrix::Constant(1, 1, v)); }
Tape::Id Tape::scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

Tape::Id Tape::add(Id a, Id b) {
  int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].val, nodes_[ib].val, "add");
  Node n;
  n.op = Op::Add;
  n.a = ia;
  n.b = ib;
  n.val = nodes_[ia].val + nodes_[ib].val;
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].val, nodes_[ib].val, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = ia;
  n.b = ib;
  n.val = nodes_[ia].val - nodes_[ib].val;
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double c) {
  int ia = check(a);
  Node n;
  n.op = Op::Scale;
  n.a = ia;
  n.lo = c;
  n.val = c * nodes_[ia].val;
  return push(std::move(n));
}

Tape::Id Tape::add_scalar(Id a, double c) {
  int ia = check(a);
  Node n;
  n.op = Op::AddScalar;
  n.a = ia;
  n.lo = c;
  n.val = nodes_[ia].val.array() + c;
  return push(std::move(n));
}

Tape::Id Tape::hadamard(Id a, Id b) {
  int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].val, nodes_[ib].val, "hadamard");
  Node n;
  n.op = Op::Hadamard;
  n.a = ia;
  n.b = ib;
  n.val = nodes_[ia].val.cwiseProduct(nodes_[ib].val);
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  int ia = check(a), ib = check(b);
  if (nodes_[ia].val.cols() != nodes_[ib].val.rows())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  Node n;
  n.op = Op::Matmul;
  n.a = ia;
  n.b = ib;
  n.val = nodes_[ia].val * nodes_[ib].val;
  return push(std::move(n));
}

Tape::Id Tape::spmm(const NormalizedAdjacency* a, Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Spmm;
  n.a = ix;
  n.sp = a;
  n.val = a->multiply(nodes_[ix].val);
  return push(std::move(n));
}

Tape::Id Tape::prelu(Id x, Id slope) {
  int ix = check(x), is = check(slope);
  if (nodes_[is].val.size() != 1)
    throw std::invalid_argument("prelu: slope must be 1x1");
  double a = nodes_[is].val(0, 0);
  Node n;
  n.op = Op::Prelu;
  n.a = ix;
  n.b = is;
  n.val = nodes_[ix].val.unaryExpr([a](double v) { return v > 0 ? v : a * v; });
  return push(std::move(n));
}

Tape::Id Tape::relu(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Relu;
  n.a = ix;
  n.val = nodes_[ix].val.cwiseMax(0.0);
  return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Sigmoid;
  n.a = ix;
  n.val = nodes_[ix].val.unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return push(std::move(n));
}

Tape::Id Tape::exp(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Exp;
  n.a = ix;
  n.val = nodes_[ix].val.array().exp();
  return push(std::move(n));
}

Tape::Id Tape::log(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Log;
  n.a = ix;
  n.val = nodes_[ix].val.array().log();
  return push(std::move(n));
}

Tape::Id Tape::clamp(Id x, double lo, double hi) {
  int ix = check(x);
  Node n;
  n.op = Op::Clamp;
  n.a = ix;
  n.lo = lo;
  n.hi = hi;
  n.val = nodes_[ix].val.cwiseMax(lo).cwiseMin(hi);
  return push(std::move(n));
}

Tape::Id Tape::sum(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Sum;
  n.a = ix;
  n.val = Matrix::Constant(1, 1, nodes_[ix].val.sum());
  return push(std::move(n));
}

Tape::Id Tape::mean(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Mean;
  n.a = ix;
  n.val = Matrix::Constant(1, 1, nodes_[ix].val.mean());
  return push(std::move(n));
}

Tape::Id Tape::row_sum(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::RowSum;
  n.a = ix;
  n.val = nodes_[ix].val.rowwise().sum();
  return push(std::move(n));
}

Tape::Id Tape::row_select(Id x, std::vector<int> rows) {
  int ix = check(x);
  const Matrix& v = nodes_[ix].val;
  for (int r : rows)
    if (r < 0 || r >= v.rows())
      throw std::out_of_range("row_select: row out of range");
  Node n;
  n.op = Op::RowSelect;
  n.a = ix;
  n.val.resize(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    n.val.row(static_cast<Eigen::Index>(i)) = v.row(rows[i]);
  n.rows = std::move(rows);
  return push(std::move(n));
}

Tape::Id Tape::transpose(Id x) {
  int ix = check(x);
  Node n;
  n.op = Op::Transpose;
  n.a = ix;
  n.val = nodes_[ix].val.transpose();
  return push(std::move(n));
}

Tape::Id Tape::bilinear_rows(Id z, Id b, Id s) {
  int iz = check(z), ib = check(b), is = check(s);
  const Matrix& Z = nodes_[iz].val;
  const Matrix& B = nodes_[ib].val;
  const Matrix& S = nodes_[is].val;
  if (Z.cols() != B.rows() || B.cols() != S.cols() || Z.rows() != S.rows())
    throw std::invalid_argument("bilinear_rows: shape mismatch");
  Node n;
  n.op = Op::BilinearRows;
  n.a = iz;
  n.b = ib;
  n.c = is;
  n.val = ((Z * B).cwiseProduct(S)).rowwise().sum();
  return push(std::move(n));
}

const Matrix& Tape::value(Id id) const { return nodes_[check(id)].val; }

double Tape::scalar(Id id) const {
  const Matrix& v = value(id);
  if (v.size() != 1) throw std::invalid_argument("scalar: node is not 1x1");
  return v(0, 0);
}

std::vector<Matrix> Tape::gradients(Id loss, const std::vector<Id>& wrt) const {
  int il = check(loss);
  if (nodes_[il].val.size() != 1)
    throw std::invalid_argument("gradients: loss must be a scalar node");
  for (Id id : wrt) check(id);

  std::vector<Matrix> adj(nodes_.size());
  std::vector<bool> has(nodes_.size(), false);
  auto accumulate = [&](int idx, const Matrix& g) {
    if (!has[idx]) {
      adj[idx] = g;
      has[idx] = true;
    } else {
      adj[idx] += g;
    }
  };
  accumulate(il, Matrix::Constant(1, 1, 1.0));

  for (int i = il; i >= 0; --i) {
    if (!has[i]) continue;
    const Node& n = nodes_[i];
    const Matrix& g = adj[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::Scale:
        accumulate(n.a, n.lo * g);
        break;
      case Op::AddScalar:
        accumulate(n.a, g);
        break;
      case Op::Hadamard:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].val));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].val));
        break;
      case Op::Matmul:
        accumulate(n.a, g * nodes_[n.b].val.transpose());
        accumulate(n.b, nodes_[n.a].val.transpose() * g);
        break;
      case Op::Spmm:
        accumulate(n.a, n.sp->multiply_transpose(g));
        break;
      case Op::Prelu: {
        const Matrix& x = nodes_[n.a].val;
        double a = nodes_[n.b].val(0, 0);
        Matrix gx = g;
        double gs = 0.0;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (x(r, c) <= 0) {
              gs += g(r, c) * x(r, c);
              gx(r, c) *= a;
            }
          }
        accumulate(n.a, gx);
        accumulate(n.b, Matrix::Constant(1, 1, gs));
        break;
      }
      case Op::Relu: {
        const Matrix& x = nodes_[n.a].val;
        accumulate(n.a, (x.array() > 0).cast<double>().matrix().cwiseProduct(g));
        break;
      }
      case Op::Sigmoid: {
        const Matrix& y = n.val;
        accumulate(n.a, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
        break;
      }
      case Op::Exp:
        accumulate(n.a, g.cwiseProduct(n.val));
        break;
      case Op::Log:
        accumulate(n.a, g.cwiseQuotient(nodes_[n.a].val));
        break;
      case Op::Clamp: {
        const Matrix& x = nodes_[n.a].val;
        Matrix gx = g;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          for (Eigen::Index c = 0; c < x.cols(); ++c)
            if (x(r, c) <= n.lo || x(r, c) >= n.hi) gx(r, c) = 0.0;
        accumulate(n.a, gx);
        break;
      }
      case Op::Sum:
        accumulate(n.a, Matrix::Constant(nodes_[n.a].val.rows(),
                                         nodes_[n.a].val.cols(), g(0, 0)));
        break;
      case Op::Mean:
        accumulate(n.a, Matrix::Constant(
                            nodes_[n.a].val.rows(), nodes_[n.a].val.cols(),
                            g(0, 0) / static_cast<double>(nodes_[n.a].val.size())));
        break;
      case Op::RowSum:
        accumulate(n.a, g * Matrix::Ones(1, nodes_[n.a].val.cols()));
        break;
      case Op::RowSelect: {
        Matrix gx = Matrix::Zero(nodes_[n.a].val.rows(), nodes_[n.a].val.cols());
        for (std::size_t r = 0; r < n.rows.size(); ++r)
          gx.row(n.rows[r]) += g.row(static_cast<Eigen::Index>(r));
        accumulate(n.a, gx);
        break;
      }
      case Op::Transpose:
        accumulate(n.a, g.transpose());
        break;
      case Op::BilinearRows: {
        const Matrix& Z = nodes_[n.a].val;
        const Matrix& B = nodes_[n.b].val;
        const Matrix& S = nodes_[n.c].val;
        // out_i = z_i^T B s_i, g is n x 1
        Matrix gz = g.asDiagonal() * (S * B.transpose());
        Matrix gb = Z.transpose() * (g.asDiagonal() * S);
        Matrix gs = g.asDiagonal() * (Z * B);
        accumulate(n.a, gz);
        accumulate(n.b, gb);
        accumulate(n.c, gs);
        break;
      }
    }
  }

  std::vector<Matrix> out;
  out.reserve(wrt.size());
  for (Id id : wrt) {
    int i = id.index;
    if (has[i])
      out.push_back(adj[i]);
    else
      out.push_back(Matrix::Zero(nodes_[i].val.rows(), nodes_[i].val.cols()));
  }
  return out;
}

}  // namespace rgib
