#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "roiregress/dataset.hpp"
#include "roiregress/genome.hpp"
#include "roiregress/rng.hpp"

namespace roiregress::gp {

// Island-model GP with coevolved fitness predictors. The first block of
// fields is the production configuration; the second block documents the
// engine defaults that the production description leaves open.
struct GpConfig {
  int elitism = 1;
  int subpopulations = 7;
  int pop_per_island = 101;
  int migrations = 1000;
  int generations_per_migration = 1000;
  double crossover_rate = 0.80;
  double mutation_rate = 0.10;  // rolled twice independently per offspring
  int trainers = 8;
  int predictors = 20;
  double predictor_size_fraction = 0.20;  // of the training rows
  int max_nodes = 140;
  std::uint64_t rng_seed = 0;

  int tournament_size = 4;
  double constant_range = 5.0;        // ephemeral constants in [-r, r]
  double constant_mutation_sd = 0.5;  // Gaussian perturbation
  int init_min_nodes = 3;
  int init_max_nodes = 30;
  double init_variable_weight = 0.4;  // node-type mix at initialization
  double init_constant_weight = 0.2;
  double init_function_weight = 0.4;
  double predictor_mutation_fraction = 0.10;  // indices resampled per step
  int n_variables = 0;          // bound from the data by evolve()
  bool parallel_islands = true; // worker threads between migration barriers

  void validate() const;  // throws ParamError
};

// Index subset used as a cheap stand-in for exact fitness.
struct FitnessPredictor {
  std::vector<std::uint32_t> sample_indices;  // unique, ascending
};

double mse(const std::vector<double>& predicted,
           const std::vector<double>& target);

// Exact MSE restricted to the predictor's sample indices.
double predicted_fitness(const ExpressionGenome& g, const data::RoiMatrix& x,
                         const std::vector<double>& y,
                         const FitnessPredictor& p);

ExpressionGenome random_genome(const GpConfig& config, Rng& rng);

// Two independent mutation_rate chances; each applies one point mutation
// (operator swap, operand relink, variable redraw, or constant
// perturbation). Node count and acyclicity are preserved.
ExpressionGenome mutate(const ExpressionGenome& g, const GpConfig& config,
                        Rng& rng);

// With probability crossover_rate, exchange the operand-closed subgraphs
// below one shared node position; children are rebuilt in topological order
// and re-rooted at a subnode if they would exceed the node budget.
std::pair<ExpressionGenome, ExpressionGenome> crossover(
    const ExpressionGenome& a, const ExpressionGenome& b,
    const GpConfig& config, Rng& rng);

struct IslandResult {
  std::vector<ExpressionGenome> genomes;
  std::vector<double> predicted_mse;  // under `predictor`
  FitnessPredictor predictor;
};

// One island evolved from a fresh random population for
// generations_per_migration generations under a fixed random predictor.
IslandResult evolve_island(const data::RoiMatrix& x,
                           const std::vector<double>& y,
                           const GpConfig& config, std::uint64_t island_seed);

struct ScoredGenome {
  ExpressionGenome genome;
  double exact_mse = 0.0;
};

struct GpRunResult {
  std::vector<std::vector<ScoredGenome>> final_population;  // per island
  ExpressionGenome best;
  double best_mse = 0.0;
  std::vector<double> history;  // per-migration best exact MSE over elites
};

using MigrationCallback = std::function<void(int migration, double best_mse)>;

// Full island-model run: `migrations` rounds of generations_per_migration
// generations; between rounds the per-island best migrates along a ring
// (replacing the destination's worst) and the predictor population takes
// one coevolution step against refreshed trainers. Identical
// (data, config, seed) give identical results, serial or parallel.
GpRunResult evolve(const data::RoiMatrix& x, const std::vector<double>& y,
                   const GpConfig& config,
                   const MigrationCallback& on_migration = {});

// n_runs independent evolve() calls with seeds derived from config.rng_seed.
std::vector<GpRunResult> run_batch(const data::RoiMatrix& x,
                                   const std::vector<double>& y,
                                   const GpConfig& config, int n_runs,
                                   const MigrationCallback& on_migration = {});

// Candidate with minimal exact MSE on (x, y); ties broken by fewer nodes,
// then lower run index.
const ExpressionGenome& select_best(const std::vector<GpRunResult>& results,
                                    const data::RoiMatrix& x,
                                    const std::vector<double>& y);

// Among the per-run best-by-MSE candidates (re-scored on the fit data),
// the one whose output correlates best with the holdout target. The holdout
// must be the same subject's other run, never validation data.
const ExpressionGenome& select_unbiased(
    const std::vector<GpRunResult>& results, const data::RoiMatrix& fit_x,
    const std::vector<double>& fit_y, const data::RoiMatrix& holdout_x,
    const std::vector<double>& holdout_y);

}  // namespace roiregress::gp
