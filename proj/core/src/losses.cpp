#include "scriptor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scriptor {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Extended target with blanks around every symbol: ^a^b^ for "ab".
std::vector<std::int32_t> extend_target(const std::vector<std::int32_t>& target) {
  std::vector<std::int32_t> ext(2 * target.size() + 1, 0);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

struct CtcTables {
  std::vector<double> la, lb;  // [T,S] log alpha / log beta (beta excludes frame t)
  double log_p = kNegInf;
};

CtcTables ctc_recursions(const std::vector<double>& u, std::int64_t t_len, std::int64_t v1,
                         const std::vector<std::int32_t>& ext) {
  std::int64_t s_len = static_cast<std::int64_t>(ext.size());
  CtcTables tb;
  tb.la.assign(t_len * s_len, kNegInf);
  tb.lb.assign(t_len * s_len, kNegInf);

  auto skip_ok = [&](std::int64_t s) {
    return ext[s] != 0 && ext[s] != ext[s - 2];  // blank or repeat cannot be skipped over
  };

  tb.la[0] = u[ext[0]];
  if (s_len > 1) tb.la[1] = u[ext[1]];
  for (std::int64_t t = 1; t < t_len; ++t) {
    for (std::int64_t s = 0; s < s_len; ++s) {
      double best = tb.la[(t - 1) * s_len + s];
      if (s >= 1) best = log_sum_exp(best, tb.la[(t - 1) * s_len + s - 1]);
      if (s >= 2 && skip_ok(s)) best = log_sum_exp(best, tb.la[(t - 1) * s_len + s - 2]);
      if (best != kNegInf) tb.la[t * s_len + s] = best + u[t * v1 + ext[s]];
    }
  }

  tb.lb[(t_len - 1) * s_len + s_len - 1] = 0.0;
  if (s_len > 1) tb.lb[(t_len - 1) * s_len + s_len - 2] = 0.0;
  for (std::int64_t t = t_len - 2; t >= 0; --t) {
    for (std::int64_t s = 0; s < s_len; ++s) {
      double acc = tb.lb[(t + 1) * s_len + s] + u[(t + 1) * v1 + ext[s]];
      if (s + 1 < s_len) {
        double step = tb.lb[(t + 1) * s_len + s + 1] + u[(t + 1) * v1 + ext[s + 1]];
        acc = log_sum_exp(acc, step);
      }
      if (s + 2 < s_len && skip_ok(s + 2)) {
        double jump = tb.lb[(t + 1) * s_len + s + 2] + u[(t + 1) * v1 + ext[s + 2]];
        acc = log_sum_exp(acc, jump);
      }
      tb.lb[t * s_len + s] = acc;
    }
  }

  double tail = tb.la[(t_len - 1) * s_len + s_len - 1];
  if (s_len > 1) tail = log_sum_exp(tail, tb.la[(t_len - 1) * s_len + s_len - 2]);
  tb.log_p = tail;
  return tb;
}

}  // namespace

std::int64_t ctc_min_frames(const std::vector<std::int32_t>& target) {
  std::int64_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++repeats;
  }
  return static_cast<std::int64_t>(target.size()) + repeats;
}

Tensor ctc_loss(const Tensor& log_probs, const std::vector<std::int32_t>& target) {
  if (log_probs.rank() != 2) throw DimensionError("ctc_loss: log_probs must be [t, v+1]");
  std::int64_t t_len = log_probs.dim(0), v1 = log_probs.dim(1);
  if (t_len < 1 || v1 < 2) throw DimensionError("ctc_loss: need >=1 frames and >=2 symbols");
  for (std::int32_t id : target) {
    if (id <= 0 || id >= v1) {
      throw ParameterError("ctc_loss: target id " + std::to_string(id) +
                           " outside [1," + std::to_string(v1 - 1) + "]");
    }
  }
  if (t_len < ctc_min_frames(target)) {
    throw ContractError("ctc_loss: target needs at least " +
                        std::to_string(ctc_min_frames(target)) + " frames, got " +
                        std::to_string(t_len));
  }

  auto ext = extend_target(target);
  std::int64_t s_len = static_cast<std::int64_t>(ext.size());
  NodePtr in = log_probs.node();
  auto out = std::make_shared<TensorNode>();
  out->shape = {1};
  out->data.assign(1, 0.0);
  out->requires_grad = in->requires_grad;

  auto forward = [in, out, ext, t_len, v1]() {
    CtcTables tb = ctc_recursions(in->data, t_len, v1, ext);
    out->data[0] = -tb.log_p;
  };
  auto backward = [in, out, ext, t_len, v1, s_len]() {
    CtcTables tb = ctc_recursions(in->data, t_len, v1, ext);
    double g = out->grad[0];
    for (std::int64_t t = 0; t < t_len; ++t) {
      for (std::int64_t k = 0; k < v1; ++k) {
        double acc = kNegInf;
        for (std::int64_t s = 0; s < s_len; ++s) {
          if (ext[s] != k) continue;
          acc = log_sum_exp(acc, tb.la[t * s_len + s] + tb.lb[t * s_len + s]);
        }
        if (acc == kNegInf) continue;
        in->grad[t * v1 + k] += g * -std::exp(acc - tb.log_p);
      }
    }
  };

  forward();
  if (Tape* tape = active_tape()) {
    out->tape = tape;
    tape->record({in}, out, forward, backward);
  }
  return Tensor(out);
}

CompositeLossResult composite_loss(const Tensor& logits,
                                   const std::vector<std::int32_t>& targets,
                                   const std::vector<std::uint8_t>& layout_mask,
                                   double c_level, const ComplexityLossInputs& cx,
                                   const CompositeLossParams& params) {
  if (targets.empty()) throw ContractError("composite_loss: empty target sequence");
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(targets.size())) {
    throw DimensionError("composite_loss: logits rows must match target length");
  }
  if (layout_mask.size() != targets.size()) {
    throw DimensionError("composite_loss: layout mask length mismatch");
  }
  if (!cx.c_score.defined() || cx.c_score.numel() != 1) {
    throw DimensionError("composite_loss: complexity score must be a defined scalar");
  }

  Tensor logp = log_softmax_rows(logits);
  std::vector<std::uint8_t> text_mask(layout_mask.size());
  std::int64_t n_layout = 0, n_text = 0;
  for (std::size_t i = 0; i < layout_mask.size(); ++i) {
    text_mask[i] = layout_mask[i] ? 0 : 1;
    if (layout_mask[i]) {
      ++n_layout;
    } else {
      ++n_text;
    }
  }

  CompositeLossResult res;
  res.layout_ce = n_layout > 0
                      ? nll_selected(logp, targets, layout_mask, static_cast<double>(n_layout))
                      : Tensor::scalar(0.0);
  res.text_ce = n_text > 0
                    ? nll_selected(logp, targets, text_mask, static_cast<double>(n_text))
                    : Tensor::scalar(0.0);

  Tensor diff = add_scalar(cx.c_score, -cx.c_target);
  Tensor mse = mul(diff, diff);
  res.complexity = cx.grad_penalty.defined()
                       ? add(mse, mul_scalar(cx.grad_penalty, params.lambda_reg))
                       : mse;

  res.layout_weight = params.modulate ? scaling_factor_value(c_level, params.layout_weight)
                                      : params.layout_weight.base;
  res.text_weight = params.modulate ? scaling_factor_value(c_level, params.text_weight)
                                    : params.text_weight.base;
  res.total = add(add(mul_scalar(res.layout_ce, res.layout_weight),
                      mul_scalar(res.text_ce, res.text_weight)),
                  mul_scalar(res.complexity, params.lambda_c));
  return res;
}

std::int64_t adaptive_batch_size(std::int64_t b0, double gamma, std::int64_t level,
                                 std::int64_t b_min) {
  if (b_min < 1 || b0 < b_min) throw ParameterError("adaptive_batch_size: need b0 >= b_min >= 1");
  if (gamma <= 0.0 || gamma >= 1.0) {
    throw ParameterError("adaptive_batch_size: gamma must be in (0,1)");
  }
  if (level < 0) throw ParameterError("adaptive_batch_size: negative level");
  double scaled = static_cast<double>(b0) * std::pow(gamma, static_cast<double>(level));
  return std::max(static_cast<std::int64_t>(std::floor(scaled)), b_min);
}

}  // namespace scriptor
