#pragma once

#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "ranlin/blocks.hpp"
#include "ranlin/cocycle.hpp"
#include "ranlin/common.hpp"

namespace ranlin {

// Which Lyapunov-Perron system to solve.  The split is after spectral block
// `split` (0-based): X_plus = blocks 0..split, X_minus = blocks split+1..p-1.
// forward solves the q-equations (graph over X_minus, indices n >= 0);
// backward solves the p-equations (graph over X_plus, indices n <= 0).
struct LpSide {
  enum Type { forward, backward };
  Type type = forward;
  int split = 0;

  static LpSide stable(const BlockStructure& bs) { return {forward, bs.tau - 1}; }
  static LpSide unstable(const BlockStructure& bs) { return {backward, bs.tau - 1}; }
  static LpSide pseudo_stable(int split) { return {forward, split}; }
  static LpSide pseudo_unstable(int split) { return {backward, split}; }
};

struct LpConfig {
  double weight = std::numeric_limits<double>::quiet_NaN();  // default: midpoint
  double eps = 0.0;          // admissibility margin for the weight window
  long horizon = 0;          // 0 = derived from the geometric tail bound
  double tol = 1e-12;
  int max_iter = 200;
};

struct LpSolution {
  long lo = 0, hi = 0;        // sequence index range ([0,N] or [-N,0])
  std::vector<Vec> seq;       // q_n / p_n, full d-vectors
  double weight = 0.0;
  double residual = 0.0;      // weighted re-substitution defect
  int iterations = 0;

  const Vec& at(long n) const { return seq.at(static_cast<std::size_t>(n - lo)); }
  const Vec& value0() const { return at(0); }
};

// Solver for one base point; solves for arbitrary graph coordinates y.
class LpSolver {
 public:
  LpSolver(const MapCocycle& coc, const BlockStructure& bs, Vec base,
           LpSide side, LpConfig cfg);

  // y is given in compact graph coordinates (dim = graph_coords().size())
  LpSolution solve(const Vec& y_compact) const;

  // derivative of the whole solved sequence with respect to y via the
  // differentiated equations; entry n is d x m
  std::vector<Mat> solve_derivative(const LpSolution& sol) const;

  const std::vector<int>& graph_coords() const { return gcoords_; }
  const std::vector<int>& other_coords() const { return ocoords_; }
  const Vec& base() const { return base_; }
  long horizon() const { return N_; }
  double weight() const { return weight_; }
  const Vec& orbit_point(long n) const;

 private:
  const MapCocycle* coc_;
  BlockStructure bs_;
  Vec base_;
  LpSide side_;
  LpConfig cfg_;
  long N_;
  double weight_;
  std::vector<int> plus_, minus_, gcoords_, ocoords_;
  std::vector<Vec> zpts_;                       // base orbit, window [lo, hi]
  std::vector<Vec> fz_;                         // nonlinear part at the base orbit
  long zlo_;
  std::unique_ptr<BlockProducts> Pplus_, Pminus_;

  Vec rhs_at(long n, const std::vector<Vec>& xi_plus,
             const std::vector<Vec>& xi_minus, const Vec& yhat) const;
};

// A leaf of one of the invariant foliations as an evaluable chart
// y -> base + value0(y), with derivative access; per-query solves memoized.
class Leaf {
 public:
  Leaf(const MapCocycle& coc, const BlockStructure& bs, Vec base, LpSide side,
       LpConfig cfg);

  Vec chart(const Vec& y_compact) const;            // point on the leaf
  Mat chart_derivative(const Vec& y_compact) const; // d(x + q_0)/dy, d x m
  Mat graph_derivative(const Vec& y_compact) const; // d q_0/dy, d x m
  const LpSolution& solution(const Vec& y_compact) const;

  const LpSolver& solver() const { return solver_; }
  const std::vector<int>& graph_coords() const { return solver_.graph_coords(); }
  const Vec& base() const { return solver_.base(); }
  Vec base_graph() const;                           // pi_graph(base), compact

 private:
  LpSolver solver_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<double>, LpSolution> memo_;
  mutable std::map<std::vector<double>, std::vector<Mat>> dmemo_;

  const std::vector<Mat>& dseq(const Vec& y_compact) const;
};

Leaf leaf_chart(const MapCocycle& coc, const BlockStructure& bs, const Vec& x,
                LpSide side, LpConfig cfg = {});

// Intermediate leaf W_j = (pseudo-unstable, split j) intersect
// (pseudo-stable, split j-1), as a graph over block j solved pointwise by
// Newton iteration on the two graph conditions.
class IntermediateLeaf {
 public:
  IntermediateLeaf(const MapCocycle& coc, const BlockStructure& bs, Vec base,
                   int block, LpConfig cfg);

  Vec chart(const Vec& yj_compact) const;            // point with pi_j = yj
  Mat chart_derivative(const Vec& yj_compact) const; // dz/dy_j, d x d_j
  const std::vector<int>& graph_coords() const { return jcoords_; }
  const Vec& base() const { return base_; }

 private:
  const MapCocycle* coc_;
  BlockStructure bs_;
  Vec base_;
  int block_;
  std::vector<int> jcoords_;
  std::optional<Leaf> up_, down_;   // pseudo-unstable / pseudo-stable charts

  std::pair<Vec, Mat> solve_point(const Vec& yj) const;
};

// Max over sampled leaf points z of the distance from the image of z to the
// image leaf, measured through the image leaf's chart.
double invariance_residual(const Leaf& leaf, const MapCocycle& coc,
                           const BlockStructure& bs, LpSide side, LpConfig cfg,
                           int samples, double sample_radius);

}  // namespace ranlin
