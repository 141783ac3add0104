#pragma once

#include "sstokes/assembly.hpp"
#include "sstokes/femspace.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sstokes {

/// Per-step system with Dirichlet DOFs removed:
///
///   [ M + nu k A   k B^T   0 ] [u]   [r]
///   [ B            0       c ] [p] = [0]
///   [ 0            c^T     0 ] [l]   [0]
///
/// The last row pins the mean of p_h to zero. For homogeneous Dirichlet data
/// 1^T B u = 0, so the multiplier l vanishes at the solution.
template <typename Scalar = double>
struct SaddleSystem {
  SparseOperator<Scalar> matrix;
  std::vector<int> free_dofs;        // unknown index -> full velocity DOF
  std::vector<bool> free_is_bubble;  // per velocity unknown
  int n_vel_full = 0;
  int n_free_vel = 0;
  int n_press = 0;
  Scalar nu = 0;
  Scalar k = 0;

  int rows() const { return n_free_vel + n_press + 1; }
};

template <typename Scalar>
SaddleSystem<Scalar> build_system(const StokesOperators<Scalar>& ops, const MixedSpaces<Scalar>& spaces, Scalar nu,
                                  Scalar k) {
  if (!(nu > 0)) {
    throw std::invalid_argument("build_system: viscosity must be positive");
  }
  if (!(k > 0)) {
    throw std::invalid_argument("build_system: time step must be positive");
  }
  SaddleSystem<Scalar> sys;
  sys.free_dofs = spaces.free_dofs();
  for (int d : sys.free_dofs) sys.free_is_bubble.push_back(spaces.is_bubble(d));
  sys.n_vel_full = spaces.n_vel_dofs();
  sys.n_free_vel = spaces.n_free_vel_dofs();
  sys.n_press = spaces.n_press_dofs();
  sys.nu = nu;
  sys.k = k;

  const int nf = sys.n_free_vel;
  const int np = sys.n_press;
  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(ops.mass.nonZeros() + 2 * ops.divergence.nonZeros() + 2 * np));

  const SparseOperator<Scalar> momentum = ops.mass + (nu * k) * ops.stiffness;
  for (int col = 0; col < momentum.outerSize(); ++col) {
    const int fc = spaces.free_index(col);
    if (fc < 0) continue;
    for (typename SparseOperator<Scalar>::InnerIterator it(momentum, col); it; ++it) {
      const int fr = spaces.free_index(static_cast<int>(it.row()));
      if (fr >= 0) triplets.emplace_back(fr, fc, it.value());
    }
  }
  for (int col = 0; col < ops.divergence.outerSize(); ++col) {
    const int fc = spaces.free_index(col);
    if (fc < 0) continue;
    for (typename SparseOperator<Scalar>::InnerIterator it(ops.divergence, col); it; ++it) {
      const int prow = nf + static_cast<int>(it.row());
      triplets.emplace_back(prow, fc, it.value());
      triplets.emplace_back(fc, prow, k * it.value());
    }
  }
  for (int j = 0; j < np; ++j) {
    triplets.emplace_back(nf + j, nf + np, ops.pressure_mean(j));
    triplets.emplace_back(nf + np, nf + j, ops.pressure_mean(j));
  }
  sys.matrix.resize(sys.rows(), sys.rows());
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

/// Stacks a full-length momentum right-hand side into system layout.
template <typename Scalar>
Vector<Scalar> stack_rhs(const SaddleSystem<Scalar>& sys, const Vector<Scalar>& momentum) {
  Vector<Scalar> rhs = Vector<Scalar>::Zero(sys.rows());
  for (int i = 0; i < sys.n_free_vel; ++i) {
    rhs(i) = momentum(sys.free_dofs[i]);
  }
  return rhs;
}

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Direct solver for a SaddleSystem.
///
/// Bubble unknowns only couple inside their triangle, so their block of
/// M + nu k A is diagonal and is eliminated exactly. Pressure DOF 0 is then
/// pinned: constants lie in the kernel of B^T on unconstrained DOFs, so the
/// zero-mean solution is recovered by a constant shift and the multiplier by
/// 1^T(B u + c l) = 1^T g. What remains,
///
///   [ S     k G^T  ]
///   [ k G  -k^2 C  ],   S, C symmetric positive definite,
///
/// is quasi-definite and is factored by sparse LDL^T without pivoting. Each
/// solve is followed by iterative refinement against the full system.
///
/// Solving only reads the factors, so one instance may serve concurrent callers.
template <typename Scalar = double>
class SaddleFactorization {
  using Sparse = SparseOperator<Scalar>;
  using Triplets = std::vector<Eigen::Triplet<Scalar, int>>;

 public:
  explicit SaddleFactorization(SaddleSystem<Scalar> sys) : sys_(std::move(sys)) {
    const int nf = sys_.n_free_vel;
    const int np = sys_.n_press;
    slot_.assign(nf, -1);
    for (int i = 0; i < nf; ++i) {
      if (sys_.free_is_bubble[i]) {
        slot_[i] = static_cast<int>(bubbles_.size());
        bubbles_.push_back(i);
      } else {
        slot_[i] = static_cast<int>(rest_.size());
        rest_.push_back(i);
      }
    }
    const int nb = static_cast<int>(bubbles_.size());
    const int nr = static_cast<int>(rest_.size());

    Vector<Scalar> kbb = Vector<Scalar>::Zero(nb);
    Triplets t_rr, t_rb, t_br, t_bdiv, t_rdiv;
    for (int col = 0; col < sys_.matrix.outerSize(); ++col) {
      for (typename Sparse::InnerIterator it(sys_.matrix, col); it; ++it) {
        const int row = static_cast<int>(it.row());
        const Scalar v = it.value();
        if (row < nf && col < nf) {
          const bool rb = sys_.free_is_bubble[row];
          const bool cb = sys_.free_is_bubble[col];
          if (rb && cb) {
            if (row != col) {
              throw std::invalid_argument("SaddleFactorization: bubble block is not diagonal");
            }
            kbb(slot_[row]) = v;
          } else if (rb) {
            t_br.emplace_back(slot_[row], slot_[col], v);
          } else if (cb) {
            t_rb.emplace_back(slot_[row], slot_[col], v);
          } else {
            t_rr.emplace_back(slot_[row], slot_[col], v);
          }
        } else if (row >= nf && row < nf + np && col < nf) {
          (sys_.free_is_bubble[col] ? t_bdiv : t_rdiv).emplace_back(row - nf, slot_[col], v);
        }
      }
    }
    for (int i = 0; i < nb; ++i) {
      if (!(kbb(i) > 0)) {
        throw SingularSystemError("SaddleFactorization: non-positive bubble pivot at velocity unknown " +
                                  std::to_string(bubbles_[i]));
      }
    }
    bubble_inv_ = kbb.cwiseInverse();
    k_rr_ = make_sparse(nr, nr, t_rr);
    k_rb_ = make_sparse(nr, nb, t_rb);
    k_br_ = make_sparse(nb, nr, t_br);
    div_b_ = make_sparse(np, nb, t_bdiv);
    div_r_ = make_sparse(np, nr, t_rdiv);
    pressure_mean_ = sys_.matrix.block(nf, nf + np, np, 1);

    const Scalar k = sys_.k;
    const auto dinv = bubble_inv_.asDiagonal();
    const Sparse schur_u = k_rr_ - Sparse(k_rb_ * dinv * k_br_);
    const Sparse coupling = div_r_ - Sparse(div_b_ * dinv * k_br_);
    const Sparse stab = Sparse(div_b_ * dinv * div_b_.transpose());

    // Drop pressure DOF 0.
    Triplets t_h;
    t_h.reserve(static_cast<std::size_t>(schur_u.nonZeros() + 2 * coupling.nonZeros() + stab.nonZeros()));
    append(t_h, schur_u, 0, 0, Scalar(1), -1, -1);
    append(t_h, coupling, nr, 0, k, 0, -1);
    append_transpose(t_h, coupling, 0, nr, k, 0);
    append(t_h, stab, nr, nr, -k * k, 0, 0);
    condensed_ = make_sparse(nr + np - 1, nr + np - 1, t_h);

    ldlt_.compute(condensed_);
    if (ldlt_.info() != Eigen::Success) {
      throw SingularSystemError("saddle system factorization failed: " + describe_zero_pivot());
    }
  }

  SaddleFactorization(const SaddleFactorization&) = delete;
  SaddleFactorization& operator=(const SaddleFactorization&) = delete;

  const SaddleSystem<Scalar>& system() const { return sys_; }
  int condensed_size() const { return static_cast<int>(condensed_.rows()); }

  /// Solution of system().matrix * x = rhs.
  Vector<Scalar> solve(const Vector<Scalar>& rhs) const {
    if (rhs.size() != sys_.rows()) {
      throw std::invalid_argument("SaddleFactorization::solve: rhs has " + std::to_string(rhs.size()) +
                                  " entries, expected " + std::to_string(sys_.rows()));
    }
    using std::abs;
    Vector<Scalar> x = solve_once(rhs);
    const Scalar scale = Scalar(1) + rhs.template lpNorm<Eigen::Infinity>();
    for (int pass = 0; pass < kRefinementPasses; ++pass) {
      const Vector<Scalar> r = rhs - sys_.matrix * x;
      if (r.template lpNorm<Eigen::Infinity>() <= kRefinementTarget * scale) break;
      x += solve_once(r);
    }
    return x;
  }

 private:
  static constexpr int kRefinementPasses = 3;
  static constexpr double kRefinementTarget = 1e-14;

  static Sparse make_sparse(int rows, int cols, const Triplets& t) {
    Sparse m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  // Copies m into t at (r0, c0), skipping row `skip_row` / column `skip_col`
  // of m (-1: none) and shifting later indices down by one.
  static void append(Triplets& t, const Sparse& m, int r0, int c0, Scalar scale, int skip_row, int skip_col) {
    for (int col = 0; col < m.outerSize(); ++col) {
      if (col == skip_col) continue;
      const int cc = (skip_col >= 0 && col > skip_col) ? col - 1 : col;
      for (typename Sparse::InnerIterator it(m, col); it; ++it) {
        const int row = static_cast<int>(it.row());
        if (row == skip_row) continue;
        const int rr = (skip_row >= 0 && row > skip_row) ? row - 1 : row;
        t.emplace_back(r0 + rr, c0 + cc, scale * it.value());
      }
    }
  }

  static void append_transpose(Triplets& t, const Sparse& m, int r0, int c0, Scalar scale, int skip_row) {
    for (int col = 0; col < m.outerSize(); ++col) {
      for (typename Sparse::InnerIterator it(m, col); it; ++it) {
        const int row = static_cast<int>(it.row());
        if (row == skip_row) continue;
        const int rr = (skip_row >= 0 && row > skip_row) ? row - 1 : row;
        t.emplace_back(r0 + col, c0 + rr, scale * it.value());
      }
    }
  }

  std::string describe_zero_pivot() const {
    const Vector<Scalar> d = ldlt_.vectorD();
    const auto perm = ldlt_.permutationP();
    const int nr = static_cast<int>(rest_.size());
    for (int i = 0; i < d.size(); ++i) {
      if (!(d(i) != Scalar(0))) {
        int original = -1;
        for (int j = 0; j < perm.size(); ++j) {
          if (perm.indices()(j) == i) original = j;
        }
        if (original >= 0 && original < nr) {
          return "zero pivot " + std::to_string(i) + " at velocity unknown " + std::to_string(rest_[original]);
        }
        return "zero pivot " + std::to_string(i) + " at pressure DOF " + std::to_string(original - nr + 1);
      }
    }
    return "numerical issue in LDL^T";
  }

  Vector<Scalar> solve_once(const Vector<Scalar>& rhs) const {
    const int nf = sys_.n_free_vel;
    const int np = sys_.n_press;
    const int nb = static_cast<int>(bubbles_.size());
    const int nr = static_cast<int>(rest_.size());
    const Scalar k = sys_.k;

    Vector<Scalar> r_b(nb);
    Vector<Scalar> r_r(nr);
    for (int i = 0; i < nb; ++i) r_b(i) = rhs(bubbles_[i]);
    for (int i = 0; i < nr; ++i) r_r(i) = rhs(rest_[i]);
    const Vector<Scalar> g = rhs.segment(nf, np);
    const Scalar h = rhs(nf + np);

    // 1^T B u = 0 for every admissible u, so the multiplier is fixed by g alone.
    const Scalar multiplier = g.sum() / pressure_mean_.sum();
    const Vector<Scalar> g_shift = g - multiplier * pressure_mean_;
    const Vector<Scalar> dr_b = bubble_inv_.cwiseProduct(r_b);

    Vector<Scalar> y(nr + np - 1);
    y.head(nr) = r_r - k_rb_ * dr_b;
    y.tail(np - 1) = k * (g_shift - div_b_ * dr_b).tail(np - 1);
    const Vector<Scalar> z = ldlt_.solve(y);

    Vector<Scalar> p(np);
    p(0) = 0;
    p.tail(np - 1) = z.tail(np - 1);
    const Vector<Scalar> u_r = z.head(nr);
    const Vector<Scalar> u_b = bubble_inv_.cwiseProduct(r_b - k_br_ * u_r - k * (div_b_.transpose() * p));
    p.array() += (h - pressure_mean_.dot(p)) / pressure_mean_.sum();

    Vector<Scalar> x(sys_.rows());
    for (int i = 0; i < nb; ++i) x(bubbles_[i]) = u_b(i);
    for (int i = 0; i < nr; ++i) x(rest_[i]) = u_r(i);
    x.segment(nf, np) = p;
    x(nf + np) = multiplier;
    return x;
  }

  SaddleSystem<Scalar> sys_;
  std::vector<int> bubbles_;
  std::vector<int> rest_;
  std::vector<int> slot_;
  Vector<Scalar> bubble_inv_;
  Vector<Scalar> pressure_mean_;
  Sparse k_rr_, k_rb_, k_br_, div_b_, div_r_;
  Sparse condensed_;
  Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

template <typename Scalar>
std::shared_ptr<const SaddleFactorization<Scalar>> factorize(SaddleSystem<Scalar> sys) {
  return std::make_shared<const SaddleFactorization<Scalar>>(std::move(sys));
}

/// Relative residual ||S x - b||_inf / (1 + ||b||_inf).
template <typename Scalar>
Scalar relative_residual(const SaddleSystem<Scalar>& sys, const Vector<Scalar>& x, const Vector<Scalar>& rhs) {
  const Vector<Scalar> r = sys.matrix * x - rhs;
  return r.template lpNorm<Eigen::Infinity>() / (Scalar(1) + rhs.template lpNorm<Eigen::Infinity>());
}

template <typename Scalar = double>
struct StepSolution {
  Vector<Scalar> velocity;  // full length, zero on Dirichlet DOFs
  Vector<Scalar> pressure;
  Scalar multiplier = 0;
  Scalar residual = 0;
};

template <typename Scalar>
StepSolution<Scalar> solve_step(const SaddleFactorization<Scalar>& fact, const Vector<Scalar>& rhs) {
  const auto& sys = fact.system();
  const Vector<Scalar> x = fact.solve(rhs);
  StepSolution<Scalar> out;
  out.velocity = Vector<Scalar>::Zero(sys.n_vel_full);
  for (int i = 0; i < sys.n_free_vel; ++i) {
    out.velocity(sys.free_dofs[i]) = x(i);
  }
  out.pressure = x.segment(sys.n_free_vel, sys.n_press);
  out.multiplier = x(sys.n_free_vel + sys.n_press);
  out.residual = relative_residual(sys, x, rhs);
  return out;
}

}  // namespace sstokes
