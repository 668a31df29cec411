#pragma once

#include <cmath>

namespace fairrec {

// softplus(t) = ln(1 + e^t), stable in both tails.
template <class Scalar>
Scalar softplus(Scalar t) {
  return t > Scalar(0) ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

template <class Scalar>
Scalar logistic(Scalar x) {
  if (x >= Scalar(0)) {
    const Scalar e = std::exp(-x);
    return Scalar(1) / (Scalar(1) + e);
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// Pairwise ranking loss -ln sigma(s_pos - s_neg), computed as softplus of the
// negated score difference. Strictly positive and strictly decreasing in the
// score difference.
template <class Scalar>
Scalar pair_loss(Scalar pos_score, Scalar neg_score) {
  return softplus(neg_score - pos_score);
}

// d(pair_loss)/d(s_pos - s_neg) = -sigma(-(s_pos - s_neg)). Always in (-1, 0).
template <class Scalar>
Scalar pair_loss_slope(Scalar pos_score, Scalar neg_score) {
  return -logistic(neg_score - pos_score);
}

}  // namespace fairrec
