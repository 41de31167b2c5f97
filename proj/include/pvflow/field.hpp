#pragma once

#include "pvflow/path.hpp"
#include "pvflow/rng.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <string>
#include <utility>

namespace pvflow {

/// Axis-aligned working box in state space.  Flow statements are local; the
/// box records where a field's regularity certificate is meant to hold.
struct Box {
  Vector lo, hi;

  static Box cube(int d, double halfwidth) {
    Box b;
    b.lo = Vector::Constant(d, -halfwidth);
    b.hi = Vector::Constant(d, halfwidth);
    return b;
  }

  bool contains(const Vector& x, double margin = 0.0) const {
    for (int i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
    return true;
  }

  Vector sample(Philox& rng) const {
    Vector x(lo.size());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  }

  double diameter() const { return (hi - lo).norm(); }
};

/// A vector field f: R^d -> Hom(R^n, R^d) with an evaluable derivative and a
/// declared regularity exponent alpha in (1, 2].
///
/// The gradient is supplied analytically: grad(x)[m] = df/dx_m, a d x n
/// matrix.  Finite differences are reserved for test oracles so solver
/// convergence is not polluted by differentiation noise.
class LipschitzField {
 public:
  using Eval = std::function<Matrix(const Vector&)>;
  using Grad = std::function<std::vector<Matrix>(const Vector&)>;

  LipschitzField() = default;
  LipschitzField(std::string name, int dim_state, int dim_driver, double alpha,
                 Eval eval, Grad grad = nullptr,
                 std::optional<double> lip_norm = std::nullopt,
                 std::optional<Box> box = std::nullopt)
      : name_(std::move(name)),
        dim_state_(dim_state),
        dim_driver_(dim_driver),
        alpha_(alpha),
        eval_(std::move(eval)),
        grad_(std::move(grad)),
        lip_norm_(lip_norm),
        box_(std::move(box)) {
    // alpha > 1 is Stein regularity; (0, 1] is the classical Hoelder range,
    // carried by derived objects such as the paired field.
    if (!(alpha_ > 0.0 && alpha_ <= 2.0))
      throw std::invalid_argument("LipschitzField: alpha must lie in (0, 2]");
  }

  const std::string& name() const { return name_; }
  int dim_state() const { return dim_state_; }
  int dim_driver() const { return dim_driver_; }
  double alpha() const { return alpha_; }
  std::optional<double> lip_norm() const { return lip_norm_; }
  const std::optional<Box>& box() const { return box_; }
  bool has_grad() const { return static_cast<bool>(grad_); }

  Matrix eval(const Vector& x) const {
    if (!x.allFinite())
      throw std::invalid_argument("field eval: non-finite input coordinates");
    return eval_(x);
  }

  Matrix operator()(const Vector& x) const { return eval(x); }

  std::vector<Matrix> grad(const Vector& x) const {
    if (!grad_) throw std::logic_error("field '" + name_ + "' has no gradient");
    return grad_(x);
  }

  /// Directional state Jacobian A(x, dx) in R^{d x d} with
  /// A[i][m] = sum_a df^{ia}/dx_m dx^a, i.e. column m = grad(x)[m] * dx.
  /// The linearized increment of dY = f(Y) dX is dK = A(Y, dX) K.
  Matrix state_jacobian(const Vector& x, const Vector& dx) const {
    const std::vector<Matrix> g = grad(x);
    Matrix a(dim_state_, dim_state_);
    for (int m = 0; m < dim_state_; ++m) a.col(m) = g[m] * dx;
    return a;
  }

 private:
  std::string name_;
  int dim_state_ = 0, dim_driver_ = 0;
  double alpha_ = 2.0;
  Eval eval_;
  Grad grad_;
  std::optional<double> lip_norm_;
  std::optional<Box> box_;
};

/// The field h(y, k) = (f(y), grad f(y) k) driving the paired state (Y, K).
/// K is flattened column-major after the y block; the K block of h is linear
/// in k, and h inherits regularity alpha - 1 from f.
struct PairedField {
  LipschitzField base;
  LipschitzField augmented;

  Vector initial_state(const Vector& x0) const {
    const int d = base.dim_state();
    Vector z(d + d * d);
    z.head(d) = x0;
    Eigen::Map<Matrix>(z.data() + d, d, d) = Matrix::Identity(d, d);
    return z;
  }

  static Vector pack(const Vector& y, const Matrix& k) {
    const int d = static_cast<int>(y.size());
    Vector z(d + d * d);
    z.head(d) = y;
    Eigen::Map<Matrix>(z.data() + d, d, d) = k;
    return z;
  }

  Vector y_block(const Vector& z) const { return z.head(base.dim_state()); }
  Matrix k_block(const Vector& z) const {
    const int d = base.dim_state();
    return Eigen::Map<const Matrix>(z.data() + d, d, d);
  }
};

inline PairedField make_paired_field(const LipschitzField& field) {
  if (!field.has_grad())
    throw std::invalid_argument("make_paired_field: field gradient required");
  const int d = field.dim_state();
  const int n = field.dim_driver();
  auto eval = [field, d, n](const Vector& z) -> Matrix {
    const Vector y = z.head(d);
    const Eigen::Map<const Matrix> k(z.data() + d, d, d);
    Matrix out(d + d * d, n);
    out.topRows(d) = field.eval(y);
    const std::vector<Matrix> g = field.grad(y);
    Matrix a(d, d);
    for (int col = 0; col < n; ++col) {
      for (int m = 0; m < d; ++m) a.col(m) = g[m].col(col);
      const Matrix dk = a * k;
      out.col(col).tail(d * d) = Eigen::Map<const Vector>(dk.data(), d * d);
    }
    return out;
  };
  const double aug_alpha = field.alpha() - 1.0;  // regularity drops one order
  LipschitzField augmented("paired(" + field.name() + ")", d + d * d, n, aug_alpha,
                           std::move(eval), nullptr, std::nullopt, std::nullopt);
  return PairedField{field, std::move(augmented)};
}

/// Monte-Carlo lower estimate of the Stein norm
///   ||f||_inf + sum_j ( ||df/dx_j||_inf + Hoelder(alpha-1) quotient )
/// over the field's working box.  A lower bound, not the norm itself.
inline double estimate_lip_norm(const LipschitzField& field, double alpha, int probes,
                                std::uint64_t seed = 0x11b) {
  if (!(alpha > 1.0 && alpha <= 2.0))
    throw std::invalid_argument("estimate_lip_norm: alpha must lie in (1, 2]");
  if (probes < 2) throw std::invalid_argument("estimate_lip_norm: probes must be >= 2");
  const Box box = field.box() ? *field.box() : Box::cube(field.dim_state(), 2.0);
  Philox rng(seed);
  const int d = field.dim_state();
  const double beta = alpha - 1.0;

  double sup_f = 0.0;
  std::vector<double> sup_g(d, 0.0), quot(d, 0.0);
  Vector prev;
  for (int k = 0; k < probes; ++k) {
    const Vector x = box.sample(rng);
    sup_f = std::max(sup_f, field.eval(x).norm());
    const std::vector<Matrix> gx = field.grad(x);
    for (int j = 0; j < d; ++j) sup_g[j] = std::max(sup_g[j], gx[j].norm());
    // pair against the previous probe and against a nearby point, so both
    // long-range and local Hoelder quotients are sampled
    Vector dir(d);
    for (int i = 0; i < d; ++i) dir[i] = rng.normal();
    if (dir.norm() > 0) dir.normalize();
    const double r = box.diameter() * std::pow(10.0, rng.uniform(-4.0, 0.0)) * 0.25;
    Vector y = x + r * dir;
    for (int i = 0; i < d; ++i) y[i] = std::min(std::max(y[i], box.lo[i]), box.hi[i]);
    for (const Vector& other : {prev, y}) {
      if (other.size() == 0) continue;
      const double dist = (x - other).norm();
      if (dist <= 0.0) continue;
      const std::vector<Matrix> go = field.grad(other);
      for (int j = 0; j < d; ++j)
        quot[j] = std::max(quot[j], (gx[j] - go[j]).norm() / std::pow(dist, beta));
    }
    prev = x;
  }
  double total = sup_f;
  for (int j = 0; j < d; ++j) total += sup_g[j] + quot[j];
  return total;
}

// ---------------------------------------------------------------------------
// Bundled example fields

namespace fields {

inline LipschitzField zero(int d, int n) {
  return LipschitzField(
      "zero", d, n, 2.0, [d, n](const Vector&) { return Matrix::Zero(d, n); },
      [d, n](const Vector&) { return std::vector<Matrix>(d, Matrix::Zero(d, n)); }, 0.0,
      Box::cube(d, 2.0));
}

inline LipschitzField constant(const Matrix& c) {
  const int d = static_cast<int>(c.rows()), n = static_cast<int>(c.cols());
  return LipschitzField(
      "constant", d, n, 2.0, [c](const Vector&) { return c; },
      [d, n](const Vector&) { return std::vector<Matrix>(d, Matrix::Zero(d, n)); },
      c.norm(), Box::cube(d, 2.0));
}

/// f(y) = c * I_{d x n}; with d = n the solution is a pure translation.
inline LipschitzField identity(int d, int n, double c = 1.0) {
  Matrix m = Matrix::Zero(d, n);
  for (int i = 0; i < std::min(d, n); ++i) m(i, i) = c;
  return constant(m);
}

/// Scalar linear field f(y) = c y (d = n = 1).  Unbounded, so the regularity
/// certificate is local to the declared box.
inline LipschitzField linear_scalar(double c, double box_halfwidth = 4.0) {
  Matrix g(1, 1);
  g << c;
  return LipschitzField(
      "linear", 1, 1, 2.0,
      [c](const Vector& y) {
        Matrix m(1, 1);
        m << c * y[0];
        return m;
      },
      [g](const Vector&) { return std::vector<Matrix>{g}; }, std::nullopt,
      Box::cube(1, box_halfwidth));
}

/// General linear field: column a of f(y) is A[a] * y.
inline LipschitzField linear(const std::vector<Matrix>& a, double box_halfwidth = 4.0) {
  const int d = static_cast<int>(a.front().rows());
  const int n = static_cast<int>(a.size());
  return LipschitzField(
      "linear", d, n, 2.0,
      [a, d, n](const Vector& y) {
        Matrix m(d, n);
        for (int col = 0; col < n; ++col) m.col(col) = a[col] * y;
        return m;
      },
      [a, d, n](const Vector&) {
        std::vector<Matrix> g(d, Matrix::Zero(d, n));
        for (int m = 0; m < d; ++m)
          for (int col = 0; col < n; ++col) g[m].col(col) = a[col].col(m);
        return g;
      },
      std::nullopt, Box::cube(d, box_halfwidth));
}

/// f(y) = amp * sin(freq * y) with d = n = 1.
inline LipschitzField sine(double amp, double freq = 1.0, double alpha = 2.0) {
  return LipschitzField(
      "sine", 1, 1, alpha,
      [amp, freq](const Vector& y) {
        Matrix m(1, 1);
        m << amp * std::sin(freq * y[0]);
        return m;
      },
      [amp, freq](const Vector& y) {
        Matrix g(1, 1);
        g << amp * freq * std::cos(freq * y[0]);
        return std::vector<Matrix>{g};
      },
      std::abs(amp) * (1.0 + 2.0 * std::abs(freq)), Box::cube(1, 4.0));
}

/// Smoothly damped planar rotation, d = 2, n = 1:
///   f(y) = scale / (1 + |y|^2) * (-y_2, y_1)^T.
/// Bounded with bounded derivatives of all orders, hence Lip(alpha) for any
/// alpha <= 2; the declared alpha is configurable.
inline LipschitzField rotation(double scale, double alpha = 2.0) {
  auto eval = [scale](const Vector& y) {
    const double w = 1.0 + y.squaredNorm();
    Matrix m(2, 1);
    m << -scale * y[1] / w, scale * y[0] / w;
    return m;
  };
  auto grad = [scale](const Vector& y) {
    const double w = 1.0 + y.squaredNorm();
    const double w2 = w * w;
    const double r1 = -y[1], r2 = y[0];
    std::vector<Matrix> g(2, Matrix(2, 1));
    // d/dy1: dr = (0, 1)
    g[0] << scale * (0.0 * w - r1 * 2.0 * y[0]) / w2,
        scale * (1.0 * w - r2 * 2.0 * y[0]) / w2;
    // d/dy2: dr = (-1, 0)
    g[1] << scale * (-1.0 * w - r1 * 2.0 * y[1]) / w2,
        scale * (0.0 * w - r2 * 2.0 * y[1]) / w2;
    return g;
  };
  return LipschitzField("rotation", 2, 1, alpha, eval, grad, std::nullopt,
                        Box::cube(2, 2.0));
}

}  // namespace fields

// ---------------------------------------------------------------------------
// Registry and declarative polynomial fields

/// Polynomial field from a declarative JSON spec:
/// {
///   "name": "...", "dim_state": d, "dim_driver": n, "alpha": a,
///   "box_halfwidth": w,
///   "terms": [{"row": i, "col": a, "coeff": c, "powers": [e_0, ..., e_{d-1}]}]
/// }
inline LipschitzField field_from_json(const nlohmann::json& spec) {
  const int d = spec.at("dim_state").get<int>();
  const int n = spec.at("dim_driver").get<int>();
  const double alpha = spec.value("alpha", 2.0);
  const double halfwidth = spec.value("box_halfwidth", 2.0);
  struct Term {
    int row, col;
    double coeff;
    std::vector<int> powers;
  };
  std::vector<Term> terms;
  for (const auto& t : spec.at("terms")) {
    Term term{t.at("row").get<int>(), t.at("col").get<int>(), t.at("coeff").get<double>(),
              t.at("powers").get<std::vector<int>>()};
    if (term.row < 0 || term.row >= d || term.col < 0 || term.col >= n ||
        static_cast<int>(term.powers.size()) != d)
      throw std::invalid_argument("field_from_json: malformed term");
    terms.push_back(std::move(term));
  }
  auto mono = [](const Vector& y, const std::vector<int>& powers) {
    double v = 1.0;
    for (std::size_t m = 0; m < powers.size(); ++m)
      v *= std::pow(y[static_cast<int>(m)], powers[m]);
    return v;
  };
  auto eval = [d, n, terms, mono](const Vector& y) {
    Matrix out = Matrix::Zero(d, n);
    for (const auto& t : terms) out(t.row, t.col) += t.coeff * mono(y, t.powers);
    return out;
  };
  auto grad = [d, n, terms, mono](const Vector& y) {
    std::vector<Matrix> g(d, Matrix::Zero(d, n));
    for (const auto& t : terms)
      for (int m = 0; m < d; ++m) {
        if (t.powers[m] == 0) continue;
        std::vector<int> reduced = t.powers;
        reduced[m] -= 1;
        g[m](t.row, t.col) += t.coeff * t.powers[m] * mono(y, reduced);
      }
    return g;
  };
  return LipschitzField(spec.value("name", std::string("polynomial")), d, n, alpha,
                        eval, grad, std::nullopt, Box::cube(d, halfwidth));
}

/// Name-addressable registry used by the CLI (`--field linear --field-param c=3`).
inline LipschitzField make_field(const std::string& name,
                                 const std::map<std::string, double>& params = {}) {
  auto get = [&params](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  const double alpha = get("alpha", 2.0);
  if (name == "zero")
    return fields::zero(static_cast<int>(get("d", 1)), static_cast<int>(get("n", 1)));
  if (name == "constant" || name == "identity") {
    LipschitzField f = fields::identity(static_cast<int>(get("d", 1)),
                                        static_cast<int>(get("n", 1)), get("c", 1.0));
    return f;
  }
  if (name == "linear") {
    LipschitzField f = fields::linear_scalar(get("c", 1.0), get("box", 4.0));
    if (params.count("alpha"))
      return LipschitzField(f.name(), 1, 1, alpha,
                            [f](const Vector& y) { return f.eval(y); },
                            [f](const Vector& y) { return f.grad(y); }, f.lip_norm(),
                            f.box());
    return f;
  }
  if (name == "sine") return fields::sine(get("amp", 0.5), get("freq", 1.0), alpha);
  if (name == "rotation") return fields::rotation(get("scale", 0.5), alpha);
  throw std::invalid_argument("unknown field '" + name + "'");
}

}  // namespace pvflow
