#include "roiregress/genome.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "roiregress/errors.hpp"

namespace roiregress::gp {

std::string op_token(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Exp: return "exp";
    case Op::Abs: return "abs";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
  }
  return "?";
}

Op parse_op(const std::string& token) {
  if (token == "+" || token == "add") return Op::Add;
  if (token == "-" || token == "sub") return Op::Sub;
  if (token == "*" || token == "mul") return Op::Mul;
  if (token == "/" || token == "div") return Op::Div;
  if (token == "exp") return Op::Exp;
  if (token == "abs") return Op::Abs;
  if (token == "sin") return Op::Sin;
  if (token == "cos") return Op::Cos;
  if (token == "tan") return Op::Tan;
  throw FormatError("unknown operator '" + token + "'");
}

void ExpressionGenome::validate(std::size_t max_nodes) const {
  if (nodes.empty()) throw ParamError("genome has no nodes");
  if (nodes.size() > max_nodes)
    throw ParamError("genome exceeds node budget: " +
                     std::to_string(nodes.size()) + " > " +
                     std::to_string(max_nodes));
  if (output_node >= nodes.size())
    throw ParamError("genome output node out of range");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (n.kind != Node::Kind::Function) continue;
    if (n.lhs >= i || (is_binary(n.op) && n.rhs >= i))
      throw ParamError("genome node " + std::to_string(i) +
                       " references a non-earlier operand");
  }
  for (const Node& n : nodes)
    if (n.kind == Node::Kind::Constant && !std::isfinite(n.value))
      throw ParamError("genome constant is not finite");
}

int ExpressionGenome::max_variable() const {
  int vmax = -1;
  for (const Node& n : nodes)
    if (n.kind == Node::Kind::Variable) vmax = std::max(vmax, int(n.var));
  return vmax;
}

std::vector<std::uint16_t> active_nodes(const ExpressionGenome& g) {
  std::vector<std::uint8_t> mark(g.nodes.size(), 0);
  std::vector<std::uint16_t> stack{g.output_node};
  mark[g.output_node] = 1;
  while (!stack.empty()) {
    const std::uint16_t i = stack.back();
    stack.pop_back();
    const Node& n = g.nodes[i];
    if (n.kind != Node::Kind::Function) continue;
    if (!mark[n.lhs]) {
      mark[n.lhs] = 1;
      stack.push_back(n.lhs);
    }
    if (is_binary(n.op) && !mark[n.rhs]) {
      mark[n.rhs] = 1;
      stack.push_back(n.rhs);
    }
  }
  std::vector<std::uint16_t> active;
  for (std::uint16_t i = 0; i <= g.output_node; ++i)
    if (mark[i]) active.push_back(i);
  return active;
}

bool structurally_equal(const ExpressionGenome& a, const ExpressionGenome& b) {
  if (a.nodes.size() != b.nodes.size() || a.output_node != b.output_node)
    return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const Node& na = a.nodes[i];
    const Node& nb = b.nodes[i];
    if (na.kind != nb.kind) return false;
    switch (na.kind) {
      case Node::Kind::Variable:
        if (na.var != nb.var) return false;
        break;
      case Node::Kind::Constant:
        if (na.value != nb.value) return false;
        break;
      case Node::Kind::Function:
        if (na.op != nb.op || na.lhs != nb.lhs) return false;
        if (is_binary(na.op) && na.rhs != nb.rhs) return false;
        break;
    }
  }
  return true;
}

double eval_genome(const ExpressionGenome& g, const double* row,
                   std::size_t n_cols) {
  std::vector<double> value(g.output_node + 1);
  for (std::uint16_t i = 0; i <= g.output_node; ++i) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case Node::Kind::Variable:
        if (n.var >= n_cols)
          throw ShapeError("genome variable x" + std::to_string(n.var) +
                           " out of range for " + std::to_string(n_cols) +
                           " columns");
        value[i] = row[n.var];
        break;
      case Node::Kind::Constant:
        value[i] = n.value;
        break;
      case Node::Kind::Function:
        value[i] = apply_op(n.op, value[n.lhs],
                            is_binary(n.op) ? value[n.rhs] : 0.0);
        break;
    }
  }
  return value[g.output_node];
}

double eval_genome(const ExpressionGenome& g, const std::vector<double>& row) {
  return eval_genome(g, row.data(), row.size());
}

std::vector<double> eval_series(const ExpressionGenome& g,
                                const data::RoiMatrix& x) {
  if (g.max_variable() >= static_cast<int>(x.cols()))
    throw ShapeError("genome references x" +
                     std::to_string(g.max_variable()) + " but data has only " +
                     std::to_string(x.cols()) + " columns");
  std::vector<double> out(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t)
    out[t] = eval_genome(g, x.row(t), x.cols());
  return out;
}

namespace {

std::string format_constant(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Tree size of the expansion rooted at each node, saturated at `cap`+1.
std::vector<std::size_t> expansion_sizes(const ExpressionGenome& g,
                                         std::size_t cap) {
  std::vector<std::size_t> size(g.nodes.size(), 1);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.kind != Node::Kind::Function) continue;
    std::size_t s = 1 + size[n.lhs];
    if (is_binary(n.op)) s += size[n.rhs];
    size[i] = std::min(s, cap + 1);
  }
  return size;
}

void write_tree(const ExpressionGenome& g, std::uint16_t i, std::string& out) {
  const Node& n = g.nodes[i];
  switch (n.kind) {
    case Node::Kind::Variable:
      out += "x" + std::to_string(n.var);
      break;
    case Node::Kind::Constant:
      out += format_constant(n.value);
      break;
    case Node::Kind::Function:
      out += "(" + op_token(n.op) + " ";
      write_tree(g, n.lhs, out);
      if (is_binary(n.op)) {
        out += " ";
        write_tree(g, n.rhs, out);
      }
      out += ")";
      break;
  }
}

}  // namespace

std::string to_sexpr(const ExpressionGenome& g) {
  g.validate();
  const auto sizes = expansion_sizes(g, kDefaultMaxNodes);
  std::string out;
  if (sizes[g.output_node] <= kDefaultMaxNodes) {
    write_tree(g, g.output_node, out);
    return out;
  }

  // Shared structure too large to expand: bind every active node (leaves
  // included) so the parsed-back node count equals the active count and the
  // budget still holds.
  const auto active = active_nodes(g);
  std::vector<int> slot(g.nodes.size(), -1);
  int next = 0;
  auto node_text = [&](std::uint16_t i) -> std::string {
    const Node& n = g.nodes[i];
    if (n.kind == Node::Kind::Variable) return "x" + std::to_string(n.var);
    if (n.kind == Node::Kind::Constant) return format_constant(n.value);
    std::string expr = "(" + op_token(n.op) + " t" + std::to_string(slot[n.lhs]);
    if (is_binary(n.op)) expr += " t" + std::to_string(slot[n.rhs]);
    return expr + ")";
  };
  std::string body;
  out = "(let (";
  bool first = true;
  for (std::uint16_t i : active) {
    const std::string expr = node_text(i);
    if (i == g.output_node) {
      body = expr;
      break;
    }
    slot[i] = next++;
    if (!first) out += " ";
    first = false;
    out += "(t" + std::to_string(slot[i]) + " " + expr + ")";
  }
  out += ") " + body + ")";
  return out;
}

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;
  std::size_t max_nodes;
  ExpressionGenome genome;
  std::vector<std::uint16_t> let_slots;  // binding name index -> node index

  explicit Parser(const std::string& t, std::size_t max_n)
      : text(t), max_nodes(max_n) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  char peek() {
    skip_ws();
    if (pos >= text.size()) throw FormatError("unexpected end of expression");
    return text[pos];
  }

  void expect(char c) {
    if (peek() != c)
      throw FormatError(std::string("expected '") + c + "' at offset " +
                        std::to_string(pos));
    ++pos;
  }

  std::string atom() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
      ++pos;
    if (pos == start) throw FormatError("empty token at offset " + std::to_string(pos));
    return text.substr(start, pos - start);
  }

  std::uint16_t emit(Node n) {
    if (genome.nodes.size() >= max_nodes)
      throw FormatError("expression exceeds the " + std::to_string(max_nodes) +
                        "-node budget");
    genome.nodes.push_back(n);
    return static_cast<std::uint16_t>(genome.nodes.size() - 1);
  }

  std::uint16_t parse_expr() {
    if (peek() != '(') return parse_atom(atom());
    ++pos;  // consume '('
    skip_ws();
    if (text.compare(pos, 3, "let") == 0 &&
        (pos + 3 >= text.size() || std::isspace(static_cast<unsigned char>(text[pos + 3])) ||
         text[pos + 3] == '(')) {
      pos += 3;
      return parse_let();
    }
    const Op op = parse_op(atom());
    const std::uint16_t lhs = parse_expr();
    std::uint16_t rhs = 0;
    if (is_binary(op)) rhs = parse_expr();
    expect(')');
    return emit(Node::function(op, lhs, rhs));
  }

  std::uint16_t parse_let() {
    expect('(');
    while (peek() == '(') {
      ++pos;  // '('
      const std::string name = atom();
      if (name.size() < 2 || name[0] != 't')
        throw FormatError("let binding name must look like t0, got '" + name + "'");
      const std::size_t slot = parse_index(name.substr(1), "binding");
      if (slot != let_slots.size())
        throw FormatError("let bindings must be numbered in order");
      let_slots.push_back(parse_expr());
      expect(')');
    }
    expect(')');
    const std::uint16_t body = parse_expr();
    expect(')');
    return body;
  }

  std::uint16_t parse_atom(const std::string& tok) {
    if (tok[0] == 'x' && tok.size() > 1)
      return emit(Node::variable(
          static_cast<std::uint16_t>(parse_index(tok.substr(1), "variable"))));
    if (tok[0] == 't' && tok.size() > 1 &&
        std::isdigit(static_cast<unsigned char>(tok[1]))) {
      const std::size_t slot = parse_index(tok.substr(1), "binding reference");
      if (slot >= let_slots.size())
        throw FormatError("reference to unbound name '" + tok + "'");
      return let_slots[slot];
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
      throw FormatError("bad token '" + tok + "'");
    return emit(Node::constant(v));
  }

  static std::size_t parse_index(const std::string& digits, const char* what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
      throw FormatError(std::string("bad ") + what + " index '" + digits + "'");
    if (v > 0xFFFF) throw FormatError(std::string(what) + " index too large");
    return v;
  }
};

}  // namespace

ExpressionGenome parse_sexpr(const std::string& text, std::size_t max_nodes) {
  Parser p(text, max_nodes);
  const std::uint16_t root = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size())
    throw FormatError("trailing text after expression at offset " +
                      std::to_string(p.pos));
  p.genome.output_node = root;
  p.genome.validate(max_nodes);
  return p.genome;
}

void save_genome(const ExpressionGenome& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "roiregress-gp v1\n" << to_sexpr(g) << '\n';
}

ExpressionGenome load_genome(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  if (header != "roiregress-gp v1")
    throw FormatError("'" + path + "': not a roiregress-gp v1 file");
  std::stringstream rest;
  rest << in.rdbuf();
  return parse_sexpr(rest.str());
}

}  // namespace roiregress::gp
