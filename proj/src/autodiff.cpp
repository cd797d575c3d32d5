#include "spcse/autodiff.hpp"

#include <cmath>

namespace spcse::ad {

namespace {

void check_same_shape(const Var a, const Var b, const char* op) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols()) {
    raise(ErrorKind::Shape,
          std::string(op) + ": shape mismatch " + std::to_string(a->val.rows()) + "x" +
              std::to_string(a->val.cols()) + " vs " + std::to_string(b->val.rows()) + "x" +
              std::to_string(b->val.cols()));
  }
}

struct LeafNode final : Node {
  Mat* sink;
  LeafNode(const Mat& value, Mat* s) : sink(s) { val = value; }
  void backward() override {
    if (sink) *sink += grad;
  }
};

struct RowsNode final : Node {
  Var x;
  std::vector<int> idx;
  RowsNode(Var x_, std::vector<int> idx_) : x(x_), idx(std::move(idx_)) {
    val.resize(Eigen::Index(idx.size()), x->val.cols());
    for (size_t r = 0; r < idx.size(); ++r) val.row(Eigen::Index(r)) = x->val.row(idx[r]);
  }
  void backward() override {
    for (size_t r = 0; r < idx.size(); ++r) x->grad.row(idx[r]) += grad.row(Eigen::Index(r));
  }
};

struct SliceRowsNode final : Node {
  Var x;
  int start, count;
  SliceRowsNode(Var x_, int start_, int count_) : x(x_), start(start_), count(count_) {
    val = x->val.middleRows(start, count);
  }
  void backward() override { x->grad.middleRows(start, count) += grad; }
};

struct ConcatRowsNode final : Node {
  std::vector<Var> parts;
  explicit ConcatRowsNode(std::vector<Var> parts_) : parts(std::move(parts_)) {
    Eigen::Index total = 0;
    for (Var p : parts) total += p->val.rows();
    val.resize(total, parts[0]->val.cols());
    Eigen::Index off = 0;
    for (Var p : parts) {
      val.middleRows(off, p->val.rows()) = p->val;
      off += p->val.rows();
    }
  }
  void backward() override {
    Eigen::Index off = 0;
    for (Var p : parts) {
      p->grad += grad.middleRows(off, p->val.rows());
      off += p->val.rows();
    }
  }
};

struct MatmulNode final : Node {
  Var a, b;
  MatmulNode(Var a_, Var b_) : a(a_), b(b_) {
    val.resize(a->val.rows(), b->val.cols());
    val.noalias() = a->val * b->val;
  }
  void backward() override {
    a->grad.noalias() += grad * b->val.transpose();
    b->grad.noalias() += a->val.transpose() * grad;
  }
};

struct MatmulNtNode final : Node {
  Var a, b;
  real scale;
  MatmulNtNode(Var a_, Var b_, real s) : a(a_), b(b_), scale(s) {
    val.resize(a->val.rows(), b->val.rows());
    val.noalias() = a->val * b->val.transpose();
    val *= scale;
  }
  void backward() override {
    a->grad.noalias() += scale * (grad * b->val);
    b->grad.noalias() += scale * (grad.transpose() * a->val);
  }
};

struct AddNode final : Node {
  Var a, b;
  AddNode(Var a_, Var b_) : a(a_), b(b_) { val = a->val + b->val; }
  void backward() override {
    a->grad += grad;
    b->grad += grad;
  }
};

struct AddRowVectorNode final : Node {
  Var a, bias;
  AddRowVectorNode(Var a_, Var bias_) : a(a_), bias(bias_) {
    val = a->val.rowwise() + bias->val.row(0);
  }
  void backward() override {
    a->grad += grad;
    bias->grad.row(0) += grad.colwise().sum();
  }
};

struct ScaleSumNode final : Node {
  std::vector<Var> parts;
  Var coeffs;
  ScaleSumNode(std::vector<Var> parts_, Var coeffs_)
      : parts(std::move(parts_)), coeffs(coeffs_) {
    val = coeffs->val(0, 0) * parts[0]->val;
    for (size_t i = 1; i < parts.size(); ++i)
      val += coeffs->val(0, Eigen::Index(i)) * parts[i]->val;
  }
  void backward() override {
    for (size_t i = 0; i < parts.size(); ++i) {
      Eigen::Index j = Eigen::Index(i);
      parts[i]->grad += coeffs->val(0, j) * grad;
      double dot = (grad.cast<double>().array() * parts[i]->val.cast<double>().array()).sum();
      coeffs->grad(0, j) += real(dot);
    }
  }
};

struct MulRowBroadcastNode final : Node {
  Var a, v;
  MulRowBroadcastNode(Var a_, Var v_) : a(a_), v(v_) {
    val = a->val.array().rowwise() * v->val.row(0).array();
  }
  void backward() override {
    a->grad.array() += grad.array().rowwise() * v->val.row(0).array();
    v->grad.row(0) += (grad.cast<double>().array() * a->val.cast<double>().array())
                          .colwise()
                          .sum()
                          .matrix()
                          .cast<real>();
  }
};

struct MulConstNode final : Node {
  Var a;
  Mat m;
  MulConstNode(Var a_, Mat m_) : a(a_), m(std::move(m_)) {
    val = a->val.array() * m.array();
  }
  void backward() override { a->grad.array() += grad.array() * m.array(); }
};

struct ScaleConstNode final : Node {
  Var a;
  real c;
  ScaleConstNode(Var a_, real c_) : a(a_), c(c_) { val = c * a->val; }
  void backward() override { a->grad += c * grad; }
};

struct SoftmaxRowsNode final : Node {
  Var a;
  explicit SoftmaxRowsNode(Var a_) : a(a_) {
    val = a->val;
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      real mx = val.row(r).maxCoeff();
      val.row(r) = (val.row(r).array() - mx).exp();
      val.row(r) /= val.row(r).sum();
    }
  }
  void backward() override {
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      real dot = grad.row(r).dot(val.row(r));
      a->grad.row(r).array() += (grad.row(r).array() - dot) * val.row(r).array();
    }
  }
};

struct GeluNode final : Node {
  Var a;
  explicit GeluNode(Var a_) : a(a_) {
    val = a->val.unaryExpr([](real x) { return gelu_scalar(x); });
  }
  void backward() override {
    constexpr real inv_sqrt2 = real(0.7071067811865475);
    constexpr real inv_sqrt2pi = real(0.3989422804014327);
    a->grad.array() += grad.array() * a->val.array().unaryExpr([&](real x) {
      real cdf = real(0.5) * (real(1) + std::erf(x * inv_sqrt2));
      real pdf = inv_sqrt2pi * std::exp(real(-0.5) * x * x);
      return cdf + x * pdf;
    });
  }
};

struct LayerNormRowsNode final : Node {
  Var x, gamma, beta;
  real eps;
  Mat xhat;
  std::vector<real> inv_std;
  LayerNormRowsNode(Var x_, Var gamma_, Var beta_, real eps_)
      : x(x_), gamma(gamma_), beta(beta_), eps(eps_) {
    const Mat& in = x->val;
    xhat.resize(in.rows(), in.cols());
    inv_std.resize(size_t(in.rows()));
    val.resize(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      real mean = in.row(r).mean();
      real var = (in.row(r).array() - mean).square().mean();
      real is = real(1) / std::sqrt(var + eps);
      inv_std[size_t(r)] = is;
      xhat.row(r) = (in.row(r).array() - mean) * is;
      val.row(r) =
          (xhat.row(r).array() * gamma->val.row(0).array()) + beta->val.row(0).array();
    }
  }
  void backward() override {
    gamma->grad.row(0) += (grad.array() * xhat.array()).colwise().sum().matrix();
    beta->grad.row(0) += grad.colwise().sum();
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      Eigen::Array<real, 1, Eigen::Dynamic> dxhat =
          grad.row(r).array() * gamma->val.row(0).array();
      real m1 = dxhat.mean();
      real m2 = (dxhat * xhat.row(r).array()).mean();
      x->grad.row(r).array() +=
          inv_std[size_t(r)] * (dxhat - m1 - xhat.row(r).array() * m2);
    }
  }
};

struct RowNormalizeNode final : Node {
  Var x;
  std::vector<real> norms;
  explicit RowNormalizeNode(Var x_) : x(x_) {
    const Mat& in = x->val;
    norms.resize(size_t(in.rows()));
    val.resize(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      real n = in.row(r).norm();
      if (n == real(0))
        raise(ErrorKind::Numeric, "row_normalize: zero-norm row " + std::to_string(r));
      norms[size_t(r)] = n;
      val.row(r) = in.row(r) / n;
    }
  }
  void backward() override {
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      real dot = grad.row(r).dot(val.row(r));
      x->grad.row(r) += (grad.row(r) - dot * val.row(r)) / norms[size_t(r)];
    }
  }
};

struct SumAllNode final : Node {
  Var a;
  explicit SumAllNode(Var a_) : a(a_) {
    double s = a->val.cast<double>().sum();
    val = Mat::Constant(1, 1, real(s));
  }
  void backward() override { a->grad.array() += grad(0, 0); }
};

struct AlignmentHeadNode final : Node {
  Var h, hplus;
  real eps;
  double mean_sq;
  AlignmentHeadNode(Var h_, Var hplus_, real eps_) : h(h_), hplus(hplus_), eps(eps_) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < h->val.rows(); ++r)
      acc += (h->val.row(r) - hplus->val.row(r)).cast<double>().squaredNorm();
    mean_sq = acc / double(h->val.rows());
    double clamped = mean_sq > double(eps) ? mean_sq : double(eps);
    val = Mat::Constant(1, 1, real(std::log(clamped)));
  }
  void backward() override {
    if (mean_sq <= double(eps)) return;  // clamp engaged: flat
    real g = grad(0, 0);
    real c = real(2.0 / (double(h->val.rows()) * mean_sq)) * g;
    for (Eigen::Index r = 0; r < h->val.rows(); ++r) {
      auto diff = (h->val.row(r) - hplus->val.row(r)).eval();
      h->grad.row(r) += c * diff;
      hplus->grad.row(r) -= c * diff;
    }
  }
};

struct UniformityHeadNode final : Node {
  Var z;
  DMat w;       // exp(-2 d^2) per unordered pair, stored symmetric, diag 0
  double wsum;  // sum over i<j
  explicit UniformityHeadNode(Var z_) : z(z_) {
    const Eigen::Index n = z->val.rows();
    if (n < 2) raise(ErrorKind::Input, "uniformity: need at least 2 rows");
    DMat zd = z->val.cast<double>();
    w = DMat::Zero(n, n);
    wsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        double d2 = (zd.row(i) - zd.row(j)).squaredNorm();
        double e = std::exp(-2.0 * d2);
        w(i, j) = e;
        w(j, i) = e;
        wsum += e;
      }
    double pairs = double(n) * double(n - 1) / 2.0;
    val = Mat::Constant(1, 1, real(std::log(wsum / pairs)));
  }
  void backward() override {
    const Eigen::Index n = z->val.rows();
    double g = double(grad(0, 0));
    DMat zd = z->val.cast<double>();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Matrix<double, 1, Eigen::Dynamic> acc =
          Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(zd.cols());
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        acc += w(i, j) * (zd.row(i) - zd.row(j));
      }
      z->grad.row(i) += ((-4.0 * g / wsum) * acc).cast<real>();
    }
  }
};

struct SoftmaxXentDiagNode final : Node {
  Var m;
  Mat probs;
  explicit SoftmaxXentDiagNode(Var m_) : m(m_) {
    const Mat& logits = m->val;
    if (logits.rows() != logits.cols())
      raise(ErrorKind::Shape, "softmax_xent_diag: logit matrix must be square");
    const Eigen::Index n = logits.rows();
    probs.resize(n, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = double(logits.row(i).maxCoeff());
      double denom = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) denom += std::exp(double(logits(i, j)) - mx);
      total += mx + std::log(denom) - double(logits(i, i));
      for (Eigen::Index j = 0; j < n; ++j)
        probs(i, j) = real(std::exp(double(logits(i, j)) - mx) / denom);
    }
    val = Mat::Constant(1, 1, real(total / double(n)));
  }
  void backward() override {
    const Eigen::Index n = probs.rows();
    real g = grad(0, 0) / real(n);
    m->grad += g * probs;
    for (Eigen::Index i = 0; i < n; ++i) m->grad(i, i) -= g;
  }
};

struct SoftmaxXentRowsNode final : Node {
  Var logits;
  std::vector<int> targets;
  Mat probs;
  SoftmaxXentRowsNode(Var logits_, std::vector<int> targets_)
      : logits(logits_), targets(std::move(targets_)) {
    const Mat& lg = logits->val;
    if (Eigen::Index(targets.size()) != lg.rows())
      raise(ErrorKind::Shape, "softmax_xent_rows: one target per row required");
    probs.resize(lg.rows(), lg.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < lg.rows(); ++i) {
      double mx = double(lg.row(i).maxCoeff());
      double denom = 0.0;
      for (Eigen::Index j = 0; j < lg.cols(); ++j) denom += std::exp(double(lg(i, j)) - mx);
      total += mx + std::log(denom) - double(lg(i, targets[size_t(i)]));
      for (Eigen::Index j = 0; j < lg.cols(); ++j)
        probs(i, j) = real(std::exp(double(lg(i, j)) - mx) / denom);
    }
    val = Mat::Constant(1, 1, real(total / double(lg.rows())));
  }
  void backward() override {
    real g = grad(0, 0) / real(probs.rows());
    logits->grad += g * probs;
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
      logits->grad(i, targets[size_t(i)]) -= g;
  }
};

}  // namespace

void Tape::backward(Var root) {
  if (nodes_.empty()) raise(ErrorKind::State, "backward without a recorded forward pass");
  if (backward_done_)
    raise(ErrorKind::State, "backward already run on this tape; reset() first");
  if (root->val.rows() != 1 || root->val.cols() != 1)
    raise(ErrorKind::Shape, "backward: root must be a 1x1 scalar");
  backward_done_ = true;
  root->grad(0, 0) = real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

real gelu_scalar(real x) {
  return real(0.5) * x * (real(1) + std::erf(x * real(0.7071067811865475)));
}

Var leaf(Tape& t, const Mat& value, Mat* sink) { return t.make<LeafNode>(value, sink); }

Var rows(Tape& t, Var x, std::vector<int> indices) {
  for (int i : indices)
    if (i < 0 || i >= x->val.rows())
      raise(ErrorKind::Shape, "rows: index " + std::to_string(i) + " out of range");
  return t.make<RowsNode>(x, std::move(indices));
}

Var slice_rows(Tape& t, Var x, int start, int count) {
  if (start < 0 || count < 0 || start + count > x->val.rows())
    raise(ErrorKind::Shape, "slice_rows: range out of bounds");
  return t.make<SliceRowsNode>(x, start, count);
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) raise(ErrorKind::Shape, "concat_rows: no parts");
  for (const Var p : parts)
    if (p->val.cols() != parts[0]->val.cols())
      raise(ErrorKind::Shape, "concat_rows: column mismatch " +
                                  std::to_string(parts[0]->val.cols()) + " vs " +
                                  std::to_string(p->val.cols()));
  return t.make<ConcatRowsNode>(parts);
}

Var matmul(Tape& t, Var a, Var b) {
  if (a->val.cols() != b->val.rows()) raise(ErrorKind::Shape, "matmul: inner dim mismatch");
  return t.make<MatmulNode>(a, b);
}

Var matmul_nt(Tape& t, Var a, Var b, real scale) {
  if (a->val.cols() != b->val.cols())
    raise(ErrorKind::Shape, "matmul_nt: inner dim mismatch");
  return t.make<MatmulNtNode>(a, b, scale);
}

Var add(Tape& t, Var a, Var b) {
  check_same_shape(a, b, "add");
  return t.make<AddNode>(a, b);
}

Var add_row_vector(Tape& t, Var a, Var bias) {
  if (bias->val.rows() != 1 || bias->val.cols() != a->val.cols())
    raise(ErrorKind::Shape, "add_row_vector: bias must be 1 x cols");
  return t.make<AddRowVectorNode>(a, bias);
}

Var scale_sum(Tape& t, const std::vector<Var>& parts, Var coeffs) {
  if (parts.empty()) raise(ErrorKind::Shape, "scale_sum: no parts");
  if (coeffs->val.rows() != 1 || coeffs->val.cols() != Eigen::Index(parts.size()))
    raise(ErrorKind::Shape, "scale_sum: coeffs must be 1 x num_parts");
  for (const Var p : parts) check_same_shape(parts[0], p, "scale_sum");
  return t.make<ScaleSumNode>(parts, coeffs);
}

Var mul_row_broadcast(Tape& t, Var a, Var v) {
  if (v->val.rows() != 1 || v->val.cols() != a->val.cols())
    raise(ErrorKind::Shape, "mul_row_broadcast: v must be 1 x cols");
  return t.make<MulRowBroadcastNode>(a, v);
}

Var mul_const(Tape& t, Var a, Mat m) {
  if (m.rows() != a->val.rows() || m.cols() != a->val.cols())
    raise(ErrorKind::Shape, "mul_const: shape mismatch");
  return t.make<MulConstNode>(a, std::move(m));
}

Var scale_const(Tape& t, Var a, real c) { return t.make<ScaleConstNode>(a, c); }

Var softmax_rows(Tape& t, Var a) { return t.make<SoftmaxRowsNode>(a); }

Var gelu(Tape& t, Var a) { return t.make<GeluNode>(a); }

Var layer_norm_rows(Tape& t, Var x, Var gamma, Var beta, real eps) {
  if (gamma->val.cols() != x->val.cols() || beta->val.cols() != x->val.cols())
    raise(ErrorKind::Shape, "layer_norm_rows: gamma/beta must be 1 x cols");
  return t.make<LayerNormRowsNode>(x, gamma, beta, eps);
}

Var row_normalize(Tape& t, Var x) { return t.make<RowNormalizeNode>(x); }

Var sum_all(Tape& t, Var a) { return t.make<SumAllNode>(a); }

Var alignment_head(Tape& t, Var h, Var hplus, real eps) {
  check_same_shape(h, hplus, "alignment_head");
  return t.make<AlignmentHeadNode>(h, hplus, eps);
}

Var uniformity_head(Tape& t, Var z) { return t.make<UniformityHeadNode>(z); }

Var softmax_xent_diag(Tape& t, Var m) { return t.make<SoftmaxXentDiagNode>(m); }

Var softmax_xent_rows(Tape& t, Var logits, std::vector<int> targets) {
  return t.make<SoftmaxXentRowsNode>(logits, std::move(targets));
}

}  // namespace spcse::ad
