#pragma once

#include <cstdint>
#include <vector>

#include "rgib/graph.hpp"
#include "rgib/types.hpp"

namespace rgib {

// Reverse-mode tape over dense double matrices, with one sparse primitive
// (NormalizedAdjacency times dense). Records exactly the fixed computation
// graphs the encoder, discriminator and attacks need; replaying forward with
// the same inputs reproduces identical values because operation order is
// fixed and all kernels are single-threaded.
class Tape {
 public:
  struct Id {
    int index = -1;
    std::uint32_t owner = 0;
    bool valid() const { return index >= 0; }
  };

  Tape();

  // Leaves. Both kinds may receive adjoints; "constant" simply documents
  // intent and is excluded from the not-on-tape diagnostic below.
  Id input(Matrix value);
  Id constant(Matrix value);
  Id scalar_input(double v);
  Id scalar_constant(double v);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id scale(Id a, double c);
  Id add_scalar(Id a, double c);
  Id hadamard(Id a, Id b);
  Id matmul(Id a, Id b);
  // y = A * x with A a fixed normalized adjacency. Gradient flows to the
  // dense operand only; the adjacency is never a trainable parameter here.
  Id spmm(const NormalizedAdjacency* a, Id x);
  Id prelu(Id x, Id slope);  // slope is 1x1, learnable
  Id relu(Id x);
  Id sigmoid(Id x);
  Id exp(Id x);
  Id log(Id x);
  Id clamp(Id x, double lo, double hi);
  Id sum(Id x);    // 1x1
  Id mean(Id x);   // 1x1
  Id row_sum(Id x);                       // n x m -> n x 1
  Id row_select(Id x, std::vector<int> rows);
  Id transpose(Id x);
  // Row-wise bilinear form: out_i = z_i^T B s_i, shape n x 1.
  Id bilinear_rows(Id z, Id b, Id s);

  const Matrix& value(Id id) const;
  double scalar(Id id) const;  // requires a 1x1 node

  // Reverse pass from a scalar loss. Returns one gradient per requested id,
  // in order; ids must belong to this tape.
  std::vector<Matrix> gradients(Id loss, const std::vector<Id>& wrt) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, Add, Sub, Scale, AddScalar, Hadamard, Matmul, Spmm, Prelu, Relu,
    Sigmoid, Exp, Log, Clamp, Sum, Mean, RowSum, RowSelect, Transpose,
    BilinearRows,
  };
  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1, c = -1;
    Matrix val;
    double lo = 0, hi = 0;          // Scale/AddScalar reuse lo as the scalar
    std::vector<int> rows;          // RowSelect
    const NormalizedAdjacency* sp = nullptr;
    bool is_input = false;
  };

  int check(Id id) const;
  Id push(Node n);

  std::uint32_t serial_;
  std::vector<Node> nodes_;
};

}  // namespace rgib
