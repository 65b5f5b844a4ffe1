#pragma once

#include <cstdint>
#include <vector>

#include "scriptor/adaptive.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

// Alignment-marginalized sequence loss on log probabilities [T, V+1] with the
// blank symbol at id 0; target ids in [1, V]. Log-space forward/backward
// recursions; the gradient is exact.
Tensor ctc_loss(const Tensor& log_probs, const std::vector<std::int32_t>& target);

// Smallest frame count that still admits the target (length plus repeats).
std::int64_t ctc_min_frames(const std::vector<std::int32_t>& target);

struct CompositeLossParams {
  FactorParams layout_weight;  // base = lambda_layout^0
  FactorParams text_weight;    // base = lambda_text^0
  double lambda_c = 1.0;
  double lambda_reg = 0.01;
  bool modulate = true;  // false: use the base weights unmodulated
};

struct ComplexityLossInputs {
  Tensor c_score;          // scalar node from the complexity network
  double c_target = 0.0;   // level-proportional target in [0,1]
  Tensor grad_penalty;     // optional scalar node, undefined handle means 0
};

struct CompositeLossResult {
  Tensor total;
  Tensor layout_ce, text_ce, complexity;
  double layout_weight = 0.0, text_weight = 0.0;  // realized lambda_k(C_l)
};

// Weighted sum of tag cross-entropy, length-normalized text cross-entropy and
// the complexity regression term, with the lambda weights evaluated at the
// epoch-level complexity score.
CompositeLossResult composite_loss(const Tensor& logits,
                                   const std::vector<std::int32_t>& targets,
                                   const std::vector<std::uint8_t>& layout_mask,
                                   double c_level, const ComplexityLossInputs& cx,
                                   const CompositeLossParams& params);

// max(floor(b0 * gamma^level), b_min); level is zero-based.
std::int64_t adaptive_batch_size(std::int64_t b0, double gamma, std::int64_t level,
                                 std::int64_t b_min);

}  // namespace scriptor
