#pragma once

// Piecewise-constant drives and their exact evolutions.
//
// A segment n runs for `duration` with Hamiltonian scale * H_n, so within it
//     U(t) = exp(-i scale H_n (t - t_n)) U(t_n).
// Segment boundaries are right-limits: sampling at t_n uses segment n.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/lattice.hpp"
#include "floquet/spectral.hpp"

namespace floquet {

/// Self-adjoint generator with a lazily cached eigendecomposition.
class Generator {
 public:
  enum class Shape { Zero, Diagonal, Dense };

  static std::shared_ptr<const Generator> from_operator(const LatticeOperator& h, double herm_tol = 1e-10) {
    const double defect = h.hermiticity_defect();
    if (!(defect < herm_tol)) throw DomainError("segment Hamiltonian is not self-adjoint: defect " + std::to_string(defect));
    Matrix m = 0.5 * (h.matrix() + h.matrix().adjoint());
    return std::shared_ptr<const Generator>(new Generator(h.geometry(), std::move(m), nullptr));
  }

  /// H = V diag(values) V*, eigendecomposition taken as given.
  static std::shared_ptr<const Generator> from_spectrum(const Geometry& g, const Matrix& vectors, const Eigen::VectorXd& values) {
    auto spec = std::make_shared<HermitianSpectrum>(HermitianSpectrum{values, vectors});
    Matrix m = reassemble(vectors, values.cast<cplx>().eval());
    m = (0.5 * (m + m.adjoint())).eval();
    return std::shared_ptr<const Generator>(new Generator(g, std::move(m), std::move(spec)));
  }

  static std::shared_ptr<const Generator> zero(const Geometry& g) {
    return std::shared_ptr<const Generator>(new Generator(g, Matrix::Zero(g.dim(), g.dim()), nullptr));
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Matrix& matrix() const noexcept { return h_; }
  Shape shape() const noexcept { return shape_; }
  Index dim() const noexcept { return h_.rows(); }

  const HermitianSpectrum& eigen() const {
    std::call_once(cache_->once, [this] {
      if (!cache_->spec) {
        if (shape_ == Shape::Dense) {
          cache_->spec = std::make_shared<HermitianSpectrum>(eigen_hermitian(h_));
        } else {
          cache_->spec = std::make_shared<HermitianSpectrum>(
              HermitianSpectrum{h_.diagonal().real(), Matrix::Identity(h_.rows(), h_.cols())});
        }
      }
    });
    return *cache_->spec;
  }

  /// exp(-i s H).
  Matrix propagator(double s) const {
    const Index n = dim();
    switch (shape_) {
      case Shape::Zero: return Matrix::Identity(n, n);
      case Shape::Diagonal: {
        Matrix p = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) p(i, i) = std::polar(1.0, -s * h_(i, i).real());
        return p;
      }
      case Shape::Dense: break;
    }
    const auto& e = eigen();
    Eigen::VectorXcd d(n);
    for (Index k = 0; k < n; ++k) d(k) = std::polar(1.0, -s * e.values(k));
    return reassemble(e.vectors, d);
  }

  /// exp(-i s H) * m, using the diagonal fast path when possible.
  Matrix apply_propagator(double s, const Matrix& m) const {
    if (shape_ == Shape::Zero) return m;
    if (shape_ == Shape::Diagonal) {
      Eigen::VectorXcd d(dim());
      for (Index i = 0; i < dim(); ++i) d(i) = std::polar(1.0, -s * h_(i, i).real());
      return d.asDiagonal() * m;
    }
    return propagator(s) * m;
  }

 private:
  struct Cache {
    std::once_flag once;
    std::shared_ptr<const HermitianSpectrum> spec;
  };

  Generator(Geometry g, Matrix h, std::shared_ptr<const HermitianSpectrum> spec)
      : geometry_(std::move(g)), h_(std::move(h)), cache_(std::make_shared<Cache>()) {
    if (h_.rows() != geometry_.dim() || h_.cols() != geometry_.dim()) throw DomainError("generator size mismatch");
    cache_->spec = std::move(spec);
    const bool off_zero = (h_ - Matrix(h_.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    if (!off_zero) shape_ = Shape::Dense;
    else shape_ = h_.diagonal().cwiseAbs().maxCoeff() == 0.0 ? Shape::Zero : Shape::Diagonal;
  }

  Geometry geometry_;
  Matrix h_;
  Shape shape_ = Shape::Dense;
  std::shared_ptr<Cache> cache_;
};

using GeneratorPtr = std::shared_ptr<const Generator>;

struct Segment {
  GeneratorPtr generator;
  double scale = 1.0;
  double duration = 0.0;
};

class DrivingProtocol {
 public:
  DrivingProtocol() = default;
  DrivingProtocol(Geometry g, std::vector<Segment> segments, double period = two_pi)
      : geometry_(std::move(g)), segments_(std::move(segments)) {
    if (segments_.empty()) throw DomainError("protocol has no segments (period must total 2pi)");
    double total = 0.0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (!s.generator) throw DomainError("segment " + std::to_string(k) + " has no generator");
      if (!(s.generator->geometry() == geometry_)) throw DomainError("segment " + std::to_string(k) + " geometry mismatch");
      if (!(s.duration > 0.0)) throw DomainError("segment " + std::to_string(k) + " duration must be positive");
      total += s.duration;
    }
    if (std::abs(total - period) > 1e-12) throw DomainError("segment durations sum to " + std::to_string(total) + ", not 2pi");
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }

  /// Start times t_n; the last entry is the period.
  std::vector<double> boundaries() const {
    std::vector<double> t{0.0};
    for (const auto& s : segments_) t.push_back(t.back() + s.duration);
    return t;
  }

 private:
  Geometry geometry_;
  std::vector<Segment> segments_;
};

class EvolutionPath {
 public:
  EvolutionPath() = default;

  const DrivingProtocol& protocol() const noexcept { return protocol_; }
  const Geometry& geometry() const noexcept { return protocol_.geometry(); }
  const std::vector<double>& times() const noexcept { return times_; }
  /// U(t_n) for n = 0..N; U(t_0) = 1.
  const std::vector<Matrix>& checkpoints() const noexcept { return checkpoints_; }
  const Matrix& endpoint() const { return checkpoints_.back(); }
  LatticeOperator floquet() const { return {geometry(), endpoint()}; }
  double period() const noexcept { return times_.back(); }

  std::size_t segment_at(double t) const {
    if (t < 0.0 || t > period()) throw DomainError("time outside [0, period]");
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    return std::min(k, protocol_.size() - 1);
  }

  Matrix sample(double t) const {
    const std::size_t k = segment_at(t);
    const auto& s = protocol_.segments()[k];
    return s.generator->apply_propagator(s.scale * (t - times_[k]), checkpoints_[k]);
  }

  /// dU/dt = -i H(t) U(t) (right-limit at boundaries).
  Matrix derivative(double t) const {
    const std::size_t k = segment_at(t);
    const auto& s = protocol_.segments()[k];
    return cplx(0.0, -s.scale) * (s.generator->matrix() * sample(t));
  }

  /// Same path with one more segment appended.
  EvolutionPath extended(const Segment& seg) const {
    std::vector<Segment> segs = protocol_.segments();
    segs.push_back(seg);
    EvolutionPath p;
    p.protocol_ = DrivingProtocol(geometry(), std::move(segs), period() + seg.duration);
    p.times_ = times_;
    p.times_.push_back(period() + seg.duration);
    p.checkpoints_ = checkpoints_;
    p.checkpoints_.push_back(seg.generator->apply_propagator(seg.scale * seg.duration, endpoint()));
    return p;
  }

  /// Path of the drive run at `speed` times the rate: U'(t) = U(speed * t).
  EvolutionPath time_rescaled(double speed) const {
    std::vector<Segment> segs = protocol_.segments();
    for (auto& s : segs) {
      s.scale *= speed;
      s.duration /= speed;
    }
    EvolutionPath p;
    p.protocol_ = DrivingProtocol(geometry(), std::move(segs), period() / speed);
    p.times_ = times_;
    for (auto& t : p.times_) t /= speed;
    p.checkpoints_ = checkpoints_;
    return p;
  }

  friend EvolutionPath evolve(const DrivingProtocol& p);

 private:
  DrivingProtocol protocol_;
  std::vector<double> times_;
  std::vector<Matrix> checkpoints_;
};

/// Exact propagators per segment; the endpoint is the Floquet operator.
inline EvolutionPath evolve(const DrivingProtocol& p) {
  EvolutionPath path;
  path.protocol_ = p;
  path.times_ = p.boundaries();
  const Index n = p.geometry().dim();
  path.checkpoints_.push_back(Matrix::Identity(n, n));
  for (const auto& s : p.segments())
    path.checkpoints_.push_back(s.generator->apply_propagator(s.scale * s.duration, path.checkpoints_.back()));
  return path;
}

inline Matrix time_derivative(const EvolutionPath& path, double t) { return path.derivative(t); }

/// Quasi-energy spectrum of the Floquet operator; single-segment drives reuse
/// the generator eigenbasis.
inline QuasiEnergySpectrum floquet_spectrum(const EvolutionPath& path) {
  const auto& segs = path.protocol().segments();
  if (segs.size() == 1 && segs[0].generator->shape() != Generator::Shape::Zero)
    return spectrum_of_exponential(segs[0].generator->eigen(), segs[0].scale * segs[0].duration, path.geometry());
  return eigen_unitary(path.floquet());
}

struct PeriodizedPath {
  EvolutionPath loop;  ///< V_theta on [0, 2pi]
  double theta = 0.0;
  GeneratorPtr h_theta;

  /// Bound on ||V_theta(2pi) - 1||.
  double endpoint_defect() const {
    Matrix d = loop.endpoint();
    d.diagonal().array() -= 1.0;
    return norm_bound(d);
  }
};

/// V_theta: the drive at double speed on [0, pi], then exp(2 i (t - pi) h_theta).
inline PeriodizedPath periodize(const EvolutionPath& path, double theta, const QuasiEnergySpectrum& floquet) {
  auto h = Generator::from_spectrum(path.geometry(), floquet.vectors, branch_values(floquet, theta));
  PeriodizedPath out;
  out.theta = theta;
  out.h_theta = h;
  out.loop = path.time_rescaled(2.0).extended(Segment{h, -2.0, std::numbers::pi});
  return out;
}

inline PeriodizedPath periodize(const EvolutionPath& path, double theta) {
  return periodize(path, theta, floquet_spectrum(path));
}

/// Bott loop t -> (1 - P) + e^{it} P of the band between theta and theta'.
inline EvolutionPath bott_loop(const QuasiEnergySpectrum& s, double theta, double theta_prime) {
  require_in_gap(s, theta);
  require_in_gap(s, theta_prime);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s.size());
  for (Index k : phases_in_arc(s, theta, theta_prime)) v(k) = -1.0;
  auto g = Generator::from_spectrum(s.geometry, s.vectors, v);
  return evolve(DrivingProtocol(s.geometry, {Segment{g, 1.0, two_pi}}));
}

inline EvolutionPath bott_loop(const LatticeOperator& p) {
  const auto e = eigen_hermitian(p.matrix());
  Eigen::VectorXd v(e.values.size());
  for (Index k = 0; k < v.size(); ++k) v(k) = e.values(k) > 0.5 ? -1.0 : 0.0;
  auto g = Generator::from_spectrum(p.geometry(), e.vectors, v);
  return evolve(DrivingProtocol(p.geometry(), {Segment{g, 1.0, two_pi}}));
}

/// Keeps entries with |m_o - n_o| < L_o / 2 along the open axis.
inline Matrix restrict_matrix(const Matrix& h, const Geometry& cylinder) {
  const int axis = cylinder.open_axis();
  const int L = cylinder.extent(axis);
  const auto c = cylinder.coordinates(axis);
  Matrix out = h;
  for (Index col = 0; col < h.cols(); ++col)
    for (Index row = 0; row < h.rows(); ++row)
      if (2 * std::abs(c[static_cast<std::size_t>(row)] - c[static_cast<std::size_t>(col)]) >= L) out(row, col) = 0.0;
  return out;
}

/// Dirichlet restriction of every segment Hamiltonian to the cylinder open
/// along `open_axis`. Optional boundary terms (one per segment, or empty) are
/// added after restriction and must be self-adjoint.
inline DrivingProtocol restrict_half_space(const DrivingProtocol& p, int open_axis,
                                           const std::vector<LatticeOperator>& boundary_terms = {}) {
  if (!p.geometry().is_torus()) throw UnsupportedGeometry("half-space restriction starts from a torus protocol");
  const Geometry cyl = p.geometry().with_open_axis(open_axis);
  if (!boundary_terms.empty() && boundary_terms.size() != p.size())
    throw DomainError("boundary terms must be given for every segment or none");
  std::map<const Generator*, GeneratorPtr> done;
  std::vector<Segment> segs;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& s = p.segments()[k];
    GeneratorPtr g;
    if (boundary_terms.empty()) {
      auto it = done.find(s.generator.get());
      if (it != done.end()) {
        g = it->second;
      } else {
        g = s.generator->shape() == Generator::Shape::Dense
                ? Generator::from_operator({cyl, restrict_matrix(s.generator->matrix(), cyl)})
                : Generator::from_operator({cyl, s.generator->matrix()});
        done.emplace(s.generator.get(), g);
      }
    } else {
      const auto& b = boundary_terms[k];
      if (b.dim() != cyl.dim()) throw DomainError("boundary term size mismatch");
      // scale * H_n + B_n, folded into a unit-scale generator
      Matrix h = s.scale * restrict_matrix(s.generator->matrix(), cyl) + b.matrix();
      segs.push_back({Generator::from_operator({cyl, std::move(h)}), 1.0, s.duration});
      continue;
    }
    segs.push_back({g, s.scale, s.duration});
  }
  return DrivingProtocol(cyl, std::move(segs));
}

// Quantum walks: U = U(N) ... U(1), step n on [2pi(n-1)/N, 2pi n/N).

struct PrincipalAt {
  double theta;
};
struct GivenGenerator {
  LatticeOperator H;  ///< U(n) = exp(2 pi i H)
};
struct LargestGap {};

using Branch = std::variant<LargestGap, PrincipalAt, GivenGenerator>;

struct WalkStep {
  LatticeOperator U;
  Branch branch = LargestGap{};
};

/// Centre of the widest gap; ties (within 1e-9) go to the smallest centre.
inline double largest_gap_center(const QuasiEnergySpectrum& s) {
  const auto gaps = find_gaps(s, 1e-300);
  if (gaps.empty()) throw GapViolation("step spectrum has no gap");
  double best_w = -1.0, best_c = 0.0;
  for (const auto& g : gaps)
    if (g.width() > best_w + 1e-9) {
      best_w = g.width();
      best_c = g.center();
    }
  return best_c;
}

namespace detail {

inline QuasiEnergySpectrum step_spectrum(const LatticeOperator& u) {
  const Matrix& m = u.matrix();
  const bool diagonal = (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  if (!diagonal) return eigen_unitary(u);
  detail::require_unitary(m, 1e-8);
  Eigen::VectorXd ph(m.rows());
  for (Index i = 0; i < m.rows(); ++i) ph(i) = wrap_phase(std::arg(m(i, i)));
  return sorted_spectrum(u.geometry(), ph, Matrix::Identity(m.rows(), m.cols()));
}

}  // namespace detail

struct WalkGenerator {
  GeneratorPtr h;           ///< h with U(n) = exp(-2 pi i h)
  double reconstruction;    ///< bound on ||exp(-2 pi i h) - U(n)||
  std::optional<double> cut;
};

inline WalkGenerator walk_generator(const WalkStep& step) {
  const LatticeOperator& u = step.U;
  if (const auto* gg = std::get_if<GivenGenerator>(&step.branch)) {
    auto g = Generator::from_operator(gg->H);
    const Matrix rec = g->propagator(-two_pi);  // exp(2 pi i H)
    auto neg = Generator::from_spectrum(u.geometry(), g->eigen().vectors, -g->eigen().values);
    return {neg, norm_bound(rec - u.matrix()), std::nullopt};
  }
  const auto spec = detail::step_spectrum(u);
  const double cut = std::holds_alternative<PrincipalAt>(step.branch) ? std::get<PrincipalAt>(step.branch).theta
                                                                      : largest_gap_center(spec);
  auto g = Generator::from_spectrum(u.geometry(), spec.vectors, branch_values(spec, cut));
  return {g, norm_bound(g->propagator(two_pi) - u.matrix()), cut};
}

/// N equal segments of length 2pi/N with Hamiltonian N * h_n; the Floquet
/// operator is U(N) ... U(1). Each step's logarithm is checked by reconstruction.
inline DrivingProtocol quantum_walk_protocol(const std::vector<WalkStep>& steps, double reconstruction_tol = 1e-9,
                                             std::vector<WalkGenerator>* generators = nullptr) {
  if (steps.empty()) throw DomainError("quantum walk needs at least one step");
  const Geometry g = steps.front().U.geometry();
  const double n = static_cast<double>(steps.size());
  std::vector<Segment> segs;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (!(steps[k].U.geometry() == g)) throw DomainError("walk step " + std::to_string(k + 1) + " geometry mismatch");
    WalkGenerator wg = walk_generator(steps[k]);
    if (!(wg.reconstruction < reconstruction_tol))
      throw PreconditionError("walk step " + std::to_string(k + 1) + " logarithm reconstruction defect " +
                              std::to_string(wg.reconstruction));
    segs.push_back({wg.h, n, two_pi / n});
    if (generators) generators->push_back(std::move(wg));
  }
  return DrivingProtocol(g, std::move(segs));
}

/// Uniform slicing of a smooth drive H(t) into n segments sampled at midpoints.
inline DrivingProtocol trotter_slices(const Geometry& g, const std::function<Matrix(double)>& h, int n) {
  if (n < 1) throw DomainError("need at least one slice");
  std::vector<Segment> segs;
  const double dt = two_pi / n;
  for (int k = 0; k < n; ++k) segs.push_back({Generator::from_operator({g, h((k + 0.5) * dt)}), 1.0, dt});
  return DrivingProtocol(g, std::move(segs));
}

}  // namespace floquet
