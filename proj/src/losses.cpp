#include "spcse/losses.hpp"

#include <cmath>

namespace spcse {

namespace {

void check_pair_shapes(const Mat& h, const Mat& hplus, const char* op) {
  if (h.rows() != hplus.rows() || h.cols() != hplus.cols())
    raise(ErrorKind::Shape, std::string(op) + ": H and H+ must have identical shapes");
  if (h.rows() < 1) raise(ErrorKind::Shape, std::string(op) + ": empty batch");
}

}  // namespace

double cosine_sim(const Mat& u, const Mat& v) {
  if (u.size() != v.size()) raise(ErrorKind::Shape, "cosine_sim: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double a = double(u(i));
    double b = double(v(i));
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0)
    raise(ErrorKind::Numeric, "cosine_sim: zero-norm input");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

double contrastive_loss(const Mat& h, const Mat& hplus, double tau) {
  check_pair_shapes(h, hplus, "contrastive_loss");
  if (!(tau > 0.0)) raise(ErrorKind::Config, "contrastive_loss: tau must be positive");
  const Eigen::Index n = h.rows();
  DMat logits(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      logits(i, j) = cosine_sim(h.row(i), hplus.row(j)) / tau;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = logits.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) denom += std::exp(logits(i, j) - mx);
    total += mx + std::log(denom) - logits(i, i);
  }
  return total / double(n);
}

double alignment_loss(const Mat& h, const Mat& hplus, double eps_log) {
  check_pair_shapes(h, hplus, "alignment_loss");
  if (!(eps_log > 0.0)) raise(ErrorKind::Config, "alignment_loss: eps_log must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      double d = double(h(i, c)) - double(hplus(i, c));
      d2 += d * d;
    }
    acc += d2;
  }
  double mean_sq = acc / double(h.rows());
  return std::log(std::max(mean_sq, eps_log));
}

double uniformity_loss(const Mat& h) {
  if (h.rows() < 2) raise(ErrorKind::Input, "uniformity_loss: need at least 2 rows");
  const Eigen::Index n = h.rows();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        double d = double(h(i, c)) - double(h(j, c));
        d2 += d * d;
      }
      acc += std::exp(-2.0 * d2);
    }
  double pairs = double(n) * double(n - 1) / 2.0;
  return std::log(acc / pairs);
}

double joint_score_loss(double align, double uniform, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    raise(ErrorKind::Config, "joint_score_loss: lambda must lie in [0, 1]");
  return lambda * align + (1.0 - lambda) * uniform;
}

Mat normalize_rows(const Mat& h) {
  Mat out = h;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    real n = out.row(r).norm();
    if (n == real(0))
      raise(ErrorKind::Numeric, "normalize_rows: zero-norm row " + std::to_string(r));
    out.row(r) /= n;
  }
  return out;
}

}  // namespace spcse
