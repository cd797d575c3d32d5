#pragma once

#include "spcse/common.hpp"

namespace spcse {

// All reductions below accumulate in double so trivial-value contracts hold to 1e-12.

// u . v / (|u| |v|); zero-norm input is a numeric error.
double cosine_sim(const Mat& u, const Mat& v);

// mean_i -log( exp(sim(h_i, hplus_i)/tau) / sum_j exp(sim(h_i, hplus_j)/tau) ),
// logsumexp with max subtraction.
double contrastive_loss(const Mat& h, const Mat& hplus, double tau);

// log(max(mean_i ||h_i - hplus_i||^2, eps_log)). Rows are used as given; the caller
// decides whether they are unit-normalized.
double alignment_loss(const Mat& h, const Mat& hplus, double eps_log);

// log of the mean of exp(-2 ||h_i - h_j||^2) over unordered row pairs i < j.
double uniformity_loss(const Mat& h);

// lambda * align + (1 - lambda) * uniform; lambda outside [0, 1] is a config error.
double joint_score_loss(double align, double uniform, double lambda);

Mat normalize_rows(const Mat& h);

}  // namespace spcse
