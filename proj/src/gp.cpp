#include "roiregress/gp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "roiregress/errors.hpp"
#include "roiregress/eval.hpp"

namespace roiregress::gp {

void GpConfig::validate() const {
  if (elitism < 1) throw ParamError("GpConfig: elitism must be >= 1");
  if (subpopulations < 1) throw ParamError("GpConfig: subpopulations must be >= 1");
  if (pop_per_island < 1) throw ParamError("GpConfig: pop_per_island must be >= 1");
  if (elitism > pop_per_island)
    throw ParamError("GpConfig: elitism exceeds the island population");
  if (migrations < 0) throw ParamError("GpConfig: migrations must be >= 0");
  if (generations_per_migration < 0)
    throw ParamError("GpConfig: generations_per_migration must be >= 0");
  if (crossover_rate < 0.0 || crossover_rate > 1.0)
    throw ParamError("GpConfig: crossover_rate must be in [0,1]");
  if (mutation_rate < 0.0 || mutation_rate > 1.0)
    throw ParamError("GpConfig: mutation_rate must be in [0,1]");
  if (trainers < 1) throw ParamError("GpConfig: trainers must be >= 1");
  if (predictors < 1) throw ParamError("GpConfig: predictors must be >= 1");
  if (predictor_size_fraction <= 0.0 || predictor_size_fraction > 1.0)
    throw ParamError("GpConfig: predictor_size_fraction must be in (0,1]");
  if (max_nodes < 1) throw ParamError("GpConfig: max_nodes must be >= 1");
  if (tournament_size < 1) throw ParamError("GpConfig: tournament_size must be >= 1");
  if (init_min_nodes < 1 || init_max_nodes < init_min_nodes)
    throw ParamError("GpConfig: bad initialization size range");
  if (init_max_nodes > max_nodes)
    throw ParamError("GpConfig: init_max_nodes exceeds max_nodes");
  if (init_variable_weight < 0 || init_constant_weight < 0 ||
      init_function_weight < 0 ||
      init_variable_weight + init_constant_weight + init_function_weight <= 0)
    throw ParamError("GpConfig: bad initialization node-type weights");
}

double mse(const std::vector<double>& predicted,
           const std::vector<double>& target) {
  if (predicted.size() != target.size() || predicted.empty())
    throw ShapeError("mse: need equal nonzero lengths, got " +
                     std::to_string(predicted.size()) + " and " +
                     std::to_string(target.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Batched evaluation
//
// The engine spends nearly all of its time computing subset MSEs, so rows are
// gathered once per predictor change and genomes are evaluated column-wise
// over the whole subset, active nodes only.

namespace {

struct EvalContext {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> rows;    // gathered, row-major n_rows x n_cols
  std::vector<double> target;  // aligned with rows
};

EvalContext make_context(const data::RoiMatrix& x, const std::vector<double>& y,
                         const std::uint32_t* indices, std::size_t n_indices) {
  EvalContext ctx;
  ctx.n_cols = x.cols();
  if (indices == nullptr) {
    ctx.n_rows = x.rows();
    ctx.rows = x.values();
    ctx.target = y;
  } else {
    ctx.n_rows = n_indices;
    ctx.rows.resize(n_indices * ctx.n_cols);
    ctx.target.resize(n_indices);
    for (std::size_t i = 0; i < n_indices; ++i) {
      const double* src = x.row(indices[i]);
      std::copy(src, src + ctx.n_cols, ctx.rows.begin() + i * ctx.n_cols);
      ctx.target[i] = y[indices[i]];
    }
  }
  return ctx;
}

struct Workspace {
  std::vector<double> scratch;
  std::vector<std::int16_t> slot;
  std::vector<std::uint16_t> active;
  std::vector<std::uint16_t> stack;
};

void collect_active(const ExpressionGenome& g, Workspace& ws) {
  ws.slot.assign(g.nodes.size(), -1);
  ws.active.clear();
  ws.stack.clear();
  ws.stack.push_back(g.output_node);
  ws.slot[g.output_node] = 0;  // used as a visited mark here
  while (!ws.stack.empty()) {
    const std::uint16_t i = ws.stack.back();
    ws.stack.pop_back();
    const Node& n = g.nodes[i];
    if (n.kind == Node::Kind::Function) {
      if (ws.slot[n.lhs] < 0) {
        ws.slot[n.lhs] = 0;
        ws.stack.push_back(n.lhs);
      }
      if (is_binary(n.op) && ws.slot[n.rhs] < 0) {
        ws.slot[n.rhs] = 0;
        ws.stack.push_back(n.rhs);
      }
    }
  }
  for (std::uint16_t i = 0; i <= g.output_node; ++i)
    if (ws.slot[i] >= 0) {
      ws.slot[i] = static_cast<std::int16_t>(ws.active.size());
      ws.active.push_back(i);
    }
}

// Evaluates the genome over every context row; returns the root's buffer.
const double* eval_on_context(const EvalContext& ctx,
                              const ExpressionGenome& g, Workspace& ws) {
  collect_active(g, ws);
  const std::size_t m = ctx.n_rows;
  ws.scratch.resize(ws.active.size() * m);

  for (const std::uint16_t idx : ws.active) {
    const Node& n = g.nodes[idx];
    double* out = ws.scratch.data() + static_cast<std::size_t>(ws.slot[idx]) * m;
    switch (n.kind) {
      case Node::Kind::Variable: {
        const double* src = ctx.rows.data() + n.var;
        const std::size_t stride = ctx.n_cols;
        for (std::size_t i = 0; i < m; ++i) out[i] = src[i * stride];
        break;
      }
      case Node::Kind::Constant:
        std::fill(out, out + m, n.value);
        break;
      case Node::Kind::Function: {
        const double* a =
            ws.scratch.data() + static_cast<std::size_t>(ws.slot[n.lhs]) * m;
        const double* b =
            is_binary(n.op)
                ? ws.scratch.data() + static_cast<std::size_t>(ws.slot[n.rhs]) * m
                : nullptr;
        switch (n.op) {
          case Op::Add:
            for (std::size_t i = 0; i < m; ++i) out[i] = sanitize(a[i] + b[i]);
            break;
          case Op::Sub:
            for (std::size_t i = 0; i < m; ++i) out[i] = sanitize(a[i] - b[i]);
            break;
          case Op::Mul:
            for (std::size_t i = 0; i < m; ++i) out[i] = sanitize(a[i] * b[i]);
            break;
          case Op::Div:
            for (std::size_t i = 0; i < m; ++i)
              out[i] = std::fabs(b[i]) < kDivEpsilon ? 1.0 : sanitize(a[i] / b[i]);
            break;
          case Op::Exp:
            for (std::size_t i = 0; i < m; ++i)
              out[i] = std::exp(std::clamp(a[i], -kExpClamp, kExpClamp));
            break;
          case Op::Abs:
            for (std::size_t i = 0; i < m; ++i) out[i] = std::fabs(a[i]);
            break;
          case Op::Sin:
            for (std::size_t i = 0; i < m; ++i) out[i] = std::sin(a[i]);
            break;
          case Op::Cos:
            for (std::size_t i = 0; i < m; ++i) out[i] = std::cos(a[i]);
            break;
          case Op::Tan:
            for (std::size_t i = 0; i < m; ++i)
              out[i] = std::clamp(std::tan(a[i]), -kTanClamp, kTanClamp);
            break;
        }
        break;
      }
    }
  }
  return ws.scratch.data() + static_cast<std::size_t>(ws.slot[g.output_node]) * m;
}

double context_mse(const EvalContext& ctx, const ExpressionGenome& g,
                   Workspace& ws) {
  const double* out = eval_on_context(ctx, g, ws);
  double acc = 0.0;
  for (std::size_t i = 0; i < ctx.n_rows; ++i) {
    const double d = out[i] - ctx.target[i];
    acc += d * d;
  }
  const double v = acc / static_cast<double>(ctx.n_rows);
  // Squared huge protected outputs can overflow the accumulator.
  return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

}  // namespace

double predicted_fitness(const ExpressionGenome& g, const data::RoiMatrix& x,
                         const std::vector<double>& y,
                         const FitnessPredictor& p) {
  if (p.sample_indices.empty())
    throw ParamError("predicted_fitness: empty predictor");
  if (x.rows() != y.size())
    throw ShapeError("predicted_fitness: X/y length mismatch");
  for (const std::uint32_t i : p.sample_indices)
    if (i >= x.rows())
      throw ParamError("predicted_fitness: sample index " + std::to_string(i) +
                       " out of range");
  if (g.max_variable() >= static_cast<int>(x.cols()))
    throw ShapeError("predicted_fitness: genome variable out of range");
  const EvalContext ctx = make_context(x, y, p.sample_indices.data(),
                                       p.sample_indices.size());
  Workspace ws;
  return context_mse(ctx, g, ws);
}

// ---------------------------------------------------------------------------
// Variation

namespace {

int variables_for(const ExpressionGenome& g, const GpConfig& cfg) {
  if (cfg.n_variables > 0) return cfg.n_variables;
  return std::max(1, g.max_variable() + 1);
}

void point_mutate(ExpressionGenome& g, const GpConfig& cfg, Rng& rng) {
  const std::size_t idx = rng.index(g.nodes.size());
  Node& n = g.nodes[idx];
  switch (n.kind) {
    case Node::Kind::Constant:
      n.value += rng.normal(0.0, cfg.constant_mutation_sd);
      break;
    case Node::Kind::Variable: {
      const int nv = variables_for(g, cfg);
      if (nv > 1) {
        std::uint16_t v;
        do {
          v = static_cast<std::uint16_t>(rng.index(nv));
        } while (v == n.var);
        n.var = v;
      }
      break;
    }
    case Node::Kind::Function: {
      const bool can_relink = idx >= 2;
      if (can_relink && rng.chance(0.5)) {
        // Redirect one operand link to a different earlier node.
        const bool right = is_binary(n.op) && rng.chance(0.5);
        std::uint16_t& link = right ? n.rhs : n.lhs;
        std::uint16_t t;
        do {
          t = static_cast<std::uint16_t>(rng.index(idx));
        } while (t == link);
        link = t;
      } else {
        const bool was_binary = is_binary(n.op);
        Op op;
        do {
          op = static_cast<Op>(rng.index(kOpCount));
        } while (op == n.op);
        n.op = op;
        if (is_binary(op) && !was_binary)
          n.rhs = static_cast<std::uint16_t>(rng.index(idx));
      }
      break;
    }
  }
}

// Rebuilds `host` from its output, splicing in `donor`'s subgraph wherever
// host node `cut` is referenced. Memoized emission keeps sharing and yields
// a compact topologically ordered child.
struct Splicer {
  const ExpressionGenome& host;
  const ExpressionGenome& donor;
  std::size_t cut;
  ExpressionGenome out;
  std::vector<std::int32_t> host_memo;
  std::vector<std::int32_t> donor_memo;

  Splicer(const ExpressionGenome& h, const ExpressionGenome& d, std::size_t c)
      : host(h), donor(d), cut(c),
        host_memo(h.nodes.size(), -1), donor_memo(d.nodes.size(), -1) {}

  std::uint16_t emit(const Node& n) {
    out.nodes.push_back(n);
    return static_cast<std::uint16_t>(out.nodes.size() - 1);
  }

  std::uint16_t from_donor(std::uint16_t k) {
    if (donor_memo[k] >= 0) return static_cast<std::uint16_t>(donor_memo[k]);
    Node n = donor.nodes[k];
    if (n.kind == Node::Kind::Function) {
      n.lhs = from_donor(n.lhs);
      if (is_binary(n.op)) n.rhs = from_donor(n.rhs);
    }
    const std::uint16_t id = emit(n);
    donor_memo[k] = id;
    return id;
  }

  std::uint16_t from_host(std::uint16_t k) {
    if (host_memo[k] >= 0) return static_cast<std::uint16_t>(host_memo[k]);
    std::uint16_t id;
    if (k == cut) {
      id = from_donor(static_cast<std::uint16_t>(cut));
    } else {
      Node n = host.nodes[k];
      if (n.kind == Node::Kind::Function) {
        n.lhs = from_host(n.lhs);
        if (is_binary(n.op)) n.rhs = from_host(n.rhs);
      }
      id = emit(n);
    }
    host_memo[k] = id;
    return id;
  }

  ExpressionGenome run() {
    out.output_node = from_host(host.output_node);
    return std::move(out);
  }
};

// Bounded structural comparison of the operand-closed regions below a/ia
// and b/ib, walked as trees. Gives up (returns false) after `budget` node
// pairs, so shared-heavy graphs cannot blow up; a false negative only costs
// the caller a skipped shortcut.
bool subgraphs_equal(const ExpressionGenome& a, std::uint16_t ia,
                     const ExpressionGenome& b, std::uint16_t ib,
                     int budget = 256) {
  std::vector<std::pair<std::uint16_t, std::uint16_t>> stack{{ia, ib}};
  while (!stack.empty()) {
    if (--budget < 0) return false;
    const auto [ka, kb] = stack.back();
    stack.pop_back();
    const Node& na = a.nodes[ka];
    const Node& nb = b.nodes[kb];
    if (na.kind != nb.kind) return false;
    switch (na.kind) {
      case Node::Kind::Variable:
        if (na.var != nb.var) return false;
        break;
      case Node::Kind::Constant:
        if (na.value != nb.value) return false;
        break;
      case Node::Kind::Function:
        if (na.op != nb.op) return false;
        stack.push_back({na.lhs, nb.lhs});
        if (is_binary(na.op)) stack.push_back({na.rhs, nb.rhs});
        break;
    }
  }
  return true;
}

std::size_t reach_count(const ExpressionGenome& g, std::uint16_t root) {
  std::vector<std::uint8_t> mark(g.nodes.size(), 0);
  std::vector<std::uint16_t> stack{root};
  mark[root] = 1;
  std::size_t count = 0;
  while (!stack.empty()) {
    const std::uint16_t i = stack.back();
    stack.pop_back();
    ++count;
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
  return count;
}

ExpressionGenome compact(const ExpressionGenome& g, std::uint16_t root) {
  ExpressionGenome host = g;
  host.output_node = root;
  // Splice with an unreachable cut index == rebuild only.
  Splicer s(host, host, host.nodes.size());
  return s.run();
}

// Re-root at the larger operand subtree until the reachable set fits.
void truncate_to_budget(ExpressionGenome& g, std::size_t max_nodes) {
  std::uint16_t root = g.output_node;
  while (reach_count(g, root) > max_nodes) {
    const Node& n = g.nodes[root];
    if (n.kind != Node::Kind::Function) break;  // single node always fits
    if (is_binary(n.op)) {
      root = reach_count(g, n.lhs) >= reach_count(g, n.rhs) ? n.lhs : n.rhs;
    } else {
      root = n.lhs;
    }
  }
  if (root != g.output_node || g.nodes.size() > reach_count(g, root))
    g = compact(g, root);
}

}  // namespace

ExpressionGenome random_genome(const GpConfig& cfg, Rng& rng) {
  const int span = cfg.init_max_nodes - cfg.init_min_nodes + 1;
  const std::size_t count =
      static_cast<std::size_t>(cfg.init_min_nodes) + rng.index(span);
  const int nv = std::max(1, cfg.n_variables);

  ExpressionGenome g;
  g.nodes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double wv = cfg.init_variable_weight;
    double wc = cfg.init_constant_weight;
    double wf = k == 0 ? 0.0 : cfg.init_function_weight;  // node 0 is a leaf
    if (wv + wc <= 0.0) wv = 1.0;                         // degenerate mix
    const double r = rng.uniform() * (wv + wc + wf);
    if (r < wv) {
      g.nodes.push_back(Node::variable(static_cast<std::uint16_t>(rng.index(nv))));
    } else if (r < wv + wc) {
      g.nodes.push_back(
          Node::constant(rng.uniform(-cfg.constant_range, cfg.constant_range)));
    } else {
      const Op op = static_cast<Op>(rng.index(kOpCount));
      const auto lhs = static_cast<std::uint16_t>(rng.index(k));
      const auto rhs =
          is_binary(op) ? static_cast<std::uint16_t>(rng.index(k)) : std::uint16_t{0};
      g.nodes.push_back(Node::function(op, lhs, rhs));
    }
  }
  g.output_node = static_cast<std::uint16_t>(count - 1);
  return g;
}

namespace {

// Returns whether a fired mutation actually changed the genome.
bool mutate_in_place(ExpressionGenome& g, const GpConfig& cfg, Rng& rng) {
  const bool first = rng.chance(cfg.mutation_rate);
  const bool second = rng.chance(cfg.mutation_rate);
  if (!first && !second) return false;
  const ExpressionGenome original = g;
  if (first) point_mutate(g, cfg, rng);
  if (second) point_mutate(g, cfg, rng);
  // Two point mutations can revert each other; a fired mutation must stay
  // visible (unless the genome admits no alternative at all).
  for (int guard = 0; structurally_equal(g, original) && guard < 16; ++guard)
    point_mutate(g, cfg, rng);
  return !structurally_equal(g, original);
}

// Crossover that reports whether the children differ from the parents.
// Exchanging structurally identical subgraphs is the identity, so those
// children skip both the rebuild and (upstream) the fitness evaluation.
bool crossover_children(const ExpressionGenome& a, const ExpressionGenome& b,
                        const GpConfig& cfg, Rng& rng, ExpressionGenome& out_a,
                        ExpressionGenome& out_b) {
  if (!rng.chance(cfg.crossover_rate)) {
    out_a = a;
    out_b = b;
    return false;
  }
  const std::size_t cut = rng.index(std::min(a.nodes.size(), b.nodes.size()));
  if (subgraphs_equal(a, static_cast<std::uint16_t>(cut), b,
                      static_cast<std::uint16_t>(cut))) {
    out_a = a;
    out_b = b;
    return false;
  }
  out_a = Splicer(a, b, cut).run();
  out_b = Splicer(b, a, cut).run();
  truncate_to_budget(out_a, cfg.max_nodes);
  truncate_to_budget(out_b, cfg.max_nodes);
  return true;
}

}  // namespace

ExpressionGenome mutate(const ExpressionGenome& g, const GpConfig& cfg,
                        Rng& rng) {
  ExpressionGenome out = g;
  mutate_in_place(out, cfg, rng);
  return out;
}

std::pair<ExpressionGenome, ExpressionGenome> crossover(
    const ExpressionGenome& a, const ExpressionGenome& b, const GpConfig& cfg,
    Rng& rng) {
  ExpressionGenome child_a, child_b;
  crossover_children(a, b, cfg, rng, child_a, child_b);
  return {std::move(child_a), std::move(child_b)};
}

// ---------------------------------------------------------------------------
// Island evolution

namespace {

struct Individual {
  ExpressionGenome genome;
  double predicted = 0.0;
};

struct Island {
  std::vector<Individual> pop;
  Rng rng;
};

std::size_t best_index(const std::vector<Individual>& pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop[i].predicted < pop[best].predicted) best = i;
  return best;
}

std::size_t worst_index(const std::vector<Individual>& pop) {
  std::size_t worst = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop[i].predicted > pop[worst].predicted) worst = i;
  return worst;
}

std::size_t tournament(const std::vector<Individual>& pop, int size, Rng& rng) {
  std::size_t winner = rng.index(pop.size());
  for (int k = 1; k < size; ++k) {
    const std::size_t challenger = rng.index(pop.size());
    if (pop[challenger].predicted < pop[winner].predicted) winner = challenger;
  }
  return winner;
}

FitnessPredictor random_predictor(std::size_t n_rows, std::size_t size,
                                  Rng& rng) {
  std::vector<std::uint32_t> all(n_rows);
  std::iota(all.begin(), all.end(), 0u);
  for (std::size_t i = 0; i < size; ++i)
    std::swap(all[i], all[i + rng.index(n_rows - i)]);
  FitnessPredictor p;
  p.sample_indices.assign(all.begin(), all.begin() + size);
  std::sort(p.sample_indices.begin(), p.sample_indices.end());
  return p;
}

void mutate_predictor(FitnessPredictor& p, std::size_t n_rows, double fraction,
                      Rng& rng) {
  std::vector<std::uint8_t> member(n_rows, 0);
  for (const std::uint32_t i : p.sample_indices) member[i] = 1;
  for (std::uint32_t& idx : p.sample_indices) {
    if (!rng.chance(fraction)) continue;
    if (p.sample_indices.size() >= n_rows) continue;  // nothing to swap in
    std::uint32_t candidate;
    do {
      candidate = static_cast<std::uint32_t>(rng.index(n_rows));
    } while (member[candidate]);
    member[idx] = 0;
    member[candidate] = 1;
    idx = candidate;
  }
  std::sort(p.sample_indices.begin(), p.sample_indices.end());
}

void seed_population(Island& island, const GpConfig& cfg) {
  island.pop.resize(cfg.pop_per_island);
  for (auto& ind : island.pop) ind.genome = random_genome(cfg, island.rng);
}

void score_population(Island& island, const EvalContext& ctx, Workspace& ws) {
  for (auto& ind : island.pop) ind.predicted = context_mse(ctx, ind.genome, ws);
}

void run_epoch(Island& island, const EvalContext& ctx, const GpConfig& cfg,
               Workspace& ws) {
  const std::size_t pop_size = island.pop.size();
  std::vector<Individual> next;
  next.reserve(pop_size);
  std::vector<std::size_t> order(pop_size);

  for (int gen = 0; gen < cfg.generations_per_migration; ++gen) {
    next.clear();

    // Elites survive unchanged; sort indices by predicted fitness, stable
    // in the original order.
    const std::size_t n_elite =
        std::min<std::size_t>(cfg.elitism, pop_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + n_elite, order.end(),
                      [&](std::size_t i, std::size_t j) {
                        if (island.pop[i].predicted != island.pop[j].predicted)
                          return island.pop[i].predicted < island.pop[j].predicted;
                        return i < j;
                      });
    for (std::size_t e = 0; e < n_elite; ++e)
      next.push_back(island.pop[order[e]]);

    while (next.size() < pop_size) {
      const std::size_t pa = tournament(island.pop, cfg.tournament_size, island.rng);
      const std::size_t pb = tournament(island.pop, cfg.tournament_size, island.rng);
      ExpressionGenome ca, cb;
      const bool crossed = crossover_children(
          island.pop[pa].genome, island.pop[pb].genome, cfg, island.rng, ca, cb);

      // Unchanged offspring inherit the parent's cached fitness.
      Individual ia{std::move(ca), island.pop[pa].predicted};
      if (mutate_in_place(ia.genome, cfg, island.rng) || crossed)
        ia.predicted = context_mse(ctx, ia.genome, ws);
      next.push_back(std::move(ia));
      if (next.size() < pop_size) {
        Individual ib{std::move(cb), island.pop[pb].predicted};
        if (mutate_in_place(ib.genome, cfg, island.rng) || crossed)
          ib.predicted = context_mse(ctx, ib.genome, ws);
        next.push_back(std::move(ib));
      }
    }
    island.pop.swap(next);
  }
}

// Run one epoch per island, optionally on worker threads. Each island owns
// its RNG and workspace, so scheduling cannot change results.
template <typename Fn>
void for_each_island(std::vector<Island>& islands, bool parallel, Fn&& fn) {
  if (!parallel || islands.size() <= 1) {
    for (std::size_t i = 0; i < islands.size(); ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> tasks;
  tasks.reserve(islands.size());
  for (std::size_t i = 0; i < islands.size(); ++i)
    tasks.push_back(std::async(std::launch::async, [&fn, i] { fn(i); }));
  for (auto& t : tasks) t.get();
}

struct PredictorState {
  std::vector<FitnessPredictor> pop;
  std::vector<double> score;  // concordance with exact ranking, higher wins
  FitnessPredictor active;
  Rng rng;
};

// One coevolution step: rank predictors by how well their subset MSE
// reproduces the exact-MSE ordering of the trainers, keep the top half and
// refill the bottom half with mutated copies.
void update_predictors(PredictorState& ps,
                       const std::vector<const ExpressionGenome*>& trainers,
                       const data::RoiMatrix& x, const std::vector<double>& y,
                       const EvalContext& full_ctx, const GpConfig& cfg,
                       Workspace& ws) {
  const std::size_t k = trainers.size();
  std::vector<double> exact(k);
  for (std::size_t t = 0; t < k; ++t)
    exact[t] = context_mse(full_ctx, *trainers[t], ws);

  ps.score.assign(ps.pop.size(), 0.0);
  for (std::size_t p = 0; p < ps.pop.size(); ++p) {
    const EvalContext ctx = make_context(x, y, ps.pop[p].sample_indices.data(),
                                         ps.pop[p].sample_indices.size());
    std::vector<double> predicted(k);
    for (std::size_t t = 0; t < k; ++t)
      predicted[t] = context_mse(ctx, *trainers[t], ws);
    int concordant = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double de = exact[i] - exact[j];
        const double dp = predicted[i] - predicted[j];
        if (de * dp > 0.0 || (de == 0.0 && dp == 0.0)) ++concordant;
      }
    ps.score[p] = concordant;
  }

  std::vector<std::size_t> order(ps.pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ps.score[a] > ps.score[b];
  });

  const std::size_t keep = (ps.pop.size() + 1) / 2;
  std::vector<FitnessPredictor> next;
  next.reserve(ps.pop.size());
  for (std::size_t i = 0; i < keep; ++i) next.push_back(ps.pop[order[i]]);
  for (std::size_t i = keep; i < ps.pop.size(); ++i) {
    FitnessPredictor child = next[(i - keep) % keep];
    mutate_predictor(child, x.rows(), cfg.predictor_mutation_fraction, ps.rng);
    next.push_back(std::move(child));
  }
  ps.pop.swap(next);
  ps.active = ps.pop.front();
}

std::size_t predictor_size(const GpConfig& cfg, std::size_t n_rows) {
  const auto m = static_cast<std::size_t>(
      std::llround(cfg.predictor_size_fraction * static_cast<double>(n_rows)));
  return std::clamp<std::size_t>(m, 1, n_rows);
}

GpConfig bind_config(const data::RoiMatrix& x, const std::vector<double>& y,
                     const GpConfig& config) {
  if (x.rows() != y.size())
    throw ShapeError("gp: X has " + std::to_string(x.rows()) +
                     " rows but target has " + std::to_string(y.size()));
  for (const double v : y)
    if (!std::isfinite(v)) throw ParamError("gp: target must be finite");
  GpConfig cfg = config;
  cfg.n_variables = static_cast<int>(x.cols());
  cfg.validate();
  return cfg;
}

}  // namespace

IslandResult evolve_island(const data::RoiMatrix& x,
                           const std::vector<double>& y,
                           const GpConfig& config, std::uint64_t island_seed) {
  const GpConfig cfg = bind_config(x, y, config);
  Island island;
  island.rng = Rng(island_seed);
  FitnessPredictor predictor =
      random_predictor(x.rows(), predictor_size(cfg, x.rows()), island.rng);
  seed_population(island, cfg);

  const EvalContext ctx = make_context(x, y, predictor.sample_indices.data(),
                                       predictor.sample_indices.size());
  Workspace ws;
  score_population(island, ctx, ws);
  run_epoch(island, ctx, cfg, ws);

  IslandResult result;
  result.predictor = std::move(predictor);
  result.genomes.reserve(island.pop.size());
  result.predicted_mse.reserve(island.pop.size());
  for (auto& ind : island.pop) {
    result.genomes.push_back(std::move(ind.genome));
    result.predicted_mse.push_back(ind.predicted);
  }
  return result;
}

GpRunResult evolve(const data::RoiMatrix& x, const std::vector<double>& y,
                   const GpConfig& config, const MigrationCallback& on_migration) {
  const GpConfig cfg = bind_config(x, y, config);
  const std::size_t n_islands = cfg.subpopulations;

  std::vector<Island> islands(n_islands);
  std::vector<Workspace> workspaces(n_islands);
  for (std::size_t i = 0; i < n_islands; ++i) {
    islands[i].rng = Rng(derive_seed(cfg.rng_seed, i));
    seed_population(islands[i], cfg);
  }

  PredictorState ps;
  ps.rng = Rng(derive_seed(cfg.rng_seed, 0x9E37ULL));
  const std::size_t psize = predictor_size(cfg, x.rows());
  for (int p = 0; p < cfg.predictors; ++p)
    ps.pop.push_back(random_predictor(x.rows(), psize, ps.rng));
  ps.active = ps.pop.front();

  const EvalContext full_ctx = make_context(x, y, nullptr, 0);
  EvalContext pred_ctx = make_context(x, y, ps.active.sample_indices.data(),
                                      ps.active.sample_indices.size());
  for_each_island(islands, cfg.parallel_islands, [&](std::size_t i) {
    score_population(islands[i], pred_ctx, workspaces[i]);
  });

  GpRunResult result;
  Workspace main_ws;

  for (int round = 0; round < cfg.migrations; ++round) {
    for_each_island(islands, cfg.parallel_islands, [&](std::size_t i) {
      run_epoch(islands[i], pred_ctx, cfg, workspaces[i]);
    });

    // Trace: exact MSE of the per-island elites.
    double round_best = std::numeric_limits<double>::infinity();
    for (auto& island : islands) {
      const auto& elite = island.pop[best_index(island.pop)].genome;
      round_best = std::min(round_best, context_mse(full_ctx, elite, main_ws));
    }
    result.history.push_back(round_best);
    if (on_migration) on_migration(round, round_best);

    if (round + 1 == cfg.migrations) break;

    // Ring migration: a copy of each island's best replaces the next
    // island's worst, all transfers based on pre-migration populations.
    std::vector<Individual> migrants;
    migrants.reserve(n_islands);
    for (auto& island : islands)
      migrants.push_back(island.pop[best_index(island.pop)]);
    for (std::size_t i = 0; i < n_islands; ++i) {
      auto& dest = islands[(i + 1) % n_islands].pop;
      dest[worst_index(dest)] = migrants[i];
    }

    // Coevolution step against refreshed trainers: post-migration island
    // elites plus random individuals to fill the trainer count.
    std::vector<const ExpressionGenome*> trainers;
    for (std::size_t i = 0; i < n_islands && trainers.size() <
         static_cast<std::size_t>(cfg.trainers); ++i)
      trainers.push_back(&islands[i].pop[best_index(islands[i].pop)].genome);
    while (trainers.size() < static_cast<std::size_t>(cfg.trainers)) {
      const std::size_t isl = ps.rng.index(n_islands);
      const std::size_t ind = ps.rng.index(islands[isl].pop.size());
      trainers.push_back(&islands[isl].pop[ind].genome);
    }
    update_predictors(ps, trainers, x, y, full_ctx, cfg, main_ws);

    pred_ctx = make_context(x, y, ps.active.sample_indices.data(),
                            ps.active.sample_indices.size());
    for_each_island(islands, cfg.parallel_islands, [&](std::size_t i) {
      score_population(islands[i], pred_ctx, workspaces[i]);
    });
  }

  // Final selection by exact MSE over every individual; ties prefer fewer
  // nodes, then earlier island/slot.
  result.final_population.resize(n_islands);
  double best_mse = std::numeric_limits<double>::infinity();
  std::size_t best_nodes = std::numeric_limits<std::size_t>::max();
  const ExpressionGenome* best = nullptr;
  for (std::size_t i = 0; i < n_islands; ++i) {
    auto& scored = result.final_population[i];
    scored.reserve(islands[i].pop.size());
    for (auto& ind : islands[i].pop) {
      const double exact = context_mse(full_ctx, ind.genome, main_ws);
      scored.push_back({std::move(ind.genome), exact});
      const ExpressionGenome& g = scored.back().genome;
      if (exact < best_mse ||
          (exact == best_mse && g.nodes.size() < best_nodes)) {
        best_mse = exact;
        best_nodes = g.nodes.size();
        best = &g;
      }
    }
  }
  result.best = *best;
  result.best_mse = best_mse;
  return result;
}

std::vector<GpRunResult> run_batch(const data::RoiMatrix& x,
                                   const std::vector<double>& y,
                                   const GpConfig& config, int n_runs,
                                   const MigrationCallback& on_migration) {
  if (n_runs < 1) throw ParamError("run_batch: n_runs must be >= 1");
  std::vector<GpRunResult> results;
  results.reserve(n_runs);
  for (int run = 0; run < n_runs; ++run) {
    GpConfig cfg = config;
    cfg.rng_seed = derive_seed(config.rng_seed, 0x52554E00ULL + run);
    results.push_back(evolve(x, y, cfg, on_migration));
  }
  return results;
}

const ExpressionGenome& select_best(const std::vector<GpRunResult>& results,
                                    const data::RoiMatrix& x,
                                    const std::vector<double>& y) {
  if (results.empty()) throw ParamError("select_best: no results");
  const ExpressionGenome* best = nullptr;
  double best_mse = std::numeric_limits<double>::infinity();
  std::size_t best_nodes = std::numeric_limits<std::size_t>::max();
  for (const auto& r : results) {
    const double m = mse(eval_series(r.best, x), y);
    if (m < best_mse || (m == best_mse && r.best.nodes.size() < best_nodes)) {
      best_mse = m;
      best_nodes = r.best.nodes.size();
      best = &r.best;
    }
  }
  return *best;
}

const ExpressionGenome& select_unbiased(
    const std::vector<GpRunResult>& results, const data::RoiMatrix& fit_x,
    const std::vector<double>& fit_y, const data::RoiMatrix& holdout_x,
    const std::vector<double>& holdout_y) {
  if (results.empty()) throw ParamError("select_unbiased: no results");
  (void)fit_x;
  (void)fit_y;
  const ExpressionGenome* choice = nullptr;
  double best_r = -std::numeric_limits<double>::infinity();
  for (const auto& r : results) {
    double score;
    try {
      score = eval::pearson_r(eval_series(r.best, holdout_x), holdout_y);
    } catch (const UndefinedCorrelation&) {
      continue;  // constant output never wins the holdout comparison
    }
    if (score > best_r) {
      best_r = score;
      choice = &r.best;
    }
  }
  if (choice == nullptr) choice = &results.front().best;
  return *choice;
}

}  // namespace roiregress::gp
