#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "roiregress/dataset.hpp"

namespace roiregress::gp {

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Exp, Abs, Sin, Cos, Tan };

inline constexpr int kOpCount = 9;

inline bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

std::string op_token(Op op);
Op parse_op(const std::string& token);

// Protected arithmetic: every op maps finite inputs to a finite output, so
// fitness is defined for every genome.
inline constexpr double kDivEpsilon = 1e-12;   // |denominator| below -> 1.0
inline constexpr double kExpClamp = 700.0;     // exp argument clamp
inline constexpr double kTanClamp = 1e12;      // tan output clamp

inline double sanitize(double v) { return std::isfinite(v) ? v : 0.0; }

inline double apply_op(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return sanitize(a + b);
    case Op::Sub: return sanitize(a - b);
    case Op::Mul: return sanitize(a * b);
    case Op::Div:
      if (std::fabs(b) < kDivEpsilon) return 1.0;
      return sanitize(a / b);
    case Op::Exp: return std::exp(std::clamp(a, -kExpClamp, kExpClamp));
    case Op::Abs: return std::fabs(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::clamp(std::tan(a), -kTanClamp, kTanClamp);
  }
  return 0.0;
}

// One node of a bounded acyclic program graph. Operand indices always point
// to strictly earlier nodes, so index order is a topological order.
struct Node {
  enum class Kind : std::uint8_t { Variable, Constant, Function };

  Kind kind = Kind::Constant;
  Op op = Op::Add;         // Function only
  std::uint16_t lhs = 0;   // Function only
  std::uint16_t rhs = 0;   // binary Function only
  std::uint16_t var = 0;   // Variable only
  double value = 0.0;      // Constant only

  static Node variable(std::uint16_t index) {
    Node n;
    n.kind = Kind::Variable;
    n.var = index;
    return n;
  }
  static Node constant(double v) {
    Node n;
    n.kind = Kind::Constant;
    n.value = v;
    return n;
  }
  static Node function(Op op, std::uint16_t lhs, std::uint16_t rhs = 0) {
    Node n;
    n.kind = Kind::Function;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return n;
  }
};

inline constexpr std::size_t kDefaultMaxNodes = 140;

struct ExpressionGenome {
  std::vector<Node> nodes;
  std::uint16_t output_node = 0;

  std::size_t size() const { return nodes.size(); }

  // Throws ParamError on dangling references, node budget violation, or an
  // out-of-range output node.
  void validate(std::size_t max_nodes = kDefaultMaxNodes) const;

  // Largest variable index referenced, or -1 if none.
  int max_variable() const;
};

// Indices reachable from the output node, ascending (a topological order).
std::vector<std::uint16_t> active_nodes(const ExpressionGenome& g);

// Structural identity; unused operand slots are ignored.
bool structurally_equal(const ExpressionGenome& a, const ExpressionGenome& b);

// Single-row evaluation. Finite for every finite input row by protection.
double eval_genome(const ExpressionGenome& g, const double* row,
                   std::size_t n_cols);
double eval_genome(const ExpressionGenome& g, const std::vector<double>& row);

// Row-independent series reconstruction: output[t] = eval_genome(g, row t).
// Throws ShapeError when a variable index is out of range for x.
std::vector<double> eval_series(const ExpressionGenome& g,
                                const data::RoiMatrix& x);

// Prefix s-expression, e.g. (+ (* x3 0.5) (sin x7)). Graphs whose tree
// expansion would exceed the node budget are emitted as a let-form instead,
// (let ((t0 (sin x1)) (t1 (* t0 t0))) (+ t1 x2)), which preserves sharing.
// parse_sexpr accepts both forms plus add/sub/mul/div aliases.
std::string to_sexpr(const ExpressionGenome& g);
ExpressionGenome parse_sexpr(const std::string& text,
                             std::size_t max_nodes = kDefaultMaxNodes);

// Versioned model file: "roiregress-gp v1" header plus one s-expression.
void save_genome(const ExpressionGenome& g, const std::string& path);
ExpressionGenome load_genome(const std::string& path);

}  // namespace roiregress::gp
