#include "aim/mlp.hpp"

#include <cmath>

#include "aim/error.hpp"
#include "aim/ops.hpp"

namespace aim {

MlpHead::MlpHead(ParameterStore& store, const std::string& prefix, std::size_t input_width,
                 const std::vector<std::size_t>& hidden_widths, Rng& rng)
    : input_width_(input_width) {
  if (input_width == 0) throw ValidationError("MLP input width must be positive");
  std::vector<std::size_t> widths = hidden_widths;
  widths.push_back(1);
  std::size_t in = input_width;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t out = widths[l];
    if (out == 0) throw ValidationError("MLP widths must be positive");
    // He initialization for relu layers.
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    Tensor w({out, in});
    for (auto& v : w.values()) v = rng.normal(0.0, stddev);
    const auto wid = store.add(prefix + "/w" + std::to_string(l), std::move(w), OptimizerTag::adam);
    const auto bid = store.add(prefix + "/b" + std::to_string(l), Tensor({out}), OptimizerTag::adam);
    layers_.push_back({wid, bid, in, out});
    in = out;
  }
}

void MlpHead::append_inputs(ParameterStore& store, std::size_t count) {
  if (layers_.empty() || count == 0) return;
  auto& layer = layers_.front();
  auto& param = store[layer.weight];
  const std::size_t old_in = layer.in;
  const std::size_t new_in = old_in + count;
  auto widen = [&](const Tensor& t) {
    if (t.size() == 0) return t;
    Tensor out({layer.out, new_in});
    for (std::size_t r = 0; r < layer.out; ++r) {
      for (std::size_t c = 0; c < old_in; ++c) out.at(r, c) = t.at(r, c);
    }
    return out;
  };
  param.value = widen(param.value);
  param.grad = Tensor({layer.out, new_in});
  param.adam.m = widen(param.adam.m);
  param.adam.v = widen(param.adam.v);
  layer.in = new_in;
  input_width_ = new_in;
}

std::vector<double> MlpHead::forward(const ParameterStore& store, std::span<const double> input, std::size_t batch,
                                     Cache& cache) const {
  if (input.size() != batch * input_width_) throw ValidationError("MLP input shape mismatch");
  cache.batch = batch;
  cache.inputs.assign(layers_.size(), {});
  cache.pre.assign(layers_.size(), {});
  std::vector<double> current(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const auto w = store[layer.weight].value.values();
    const auto b = store[layer.bias].value.values();
    std::vector<double> pre(batch * layer.out);
    for (std::size_t r = 0; r < batch; ++r) {
      ops::affine(w, b, std::span<const double>(current).subspan(r * layer.in, layer.in),
                  std::span<double>(pre).subspan(r * layer.out, layer.out));
    }
    cache.inputs[l] = std::move(current);
    const bool last = l + 1 == layers_.size();
    std::vector<double> act(pre.size());
    if (last) {
      act = pre;
    } else {
      ops::relu(pre, act);
    }
    cache.pre[l] = std::move(pre);
    current = std::move(act);
  }
  return current;
}

std::vector<double> MlpHead::backward(ParameterStore& store, const Cache& cache, std::span<const double> dout) const {
  const std::size_t batch = cache.batch;
  if (dout.size() != batch) throw ValidationError("MLP cotangent shape mismatch");
  std::vector<double> grad(dout.begin(), dout.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    std::vector<double> dpre(batch * layer.out, 0.0);
    if (last) {
      dpre = grad;
    } else {
      ops::relu_backward(cache.pre[l], grad, dpre);
    }
    std::vector<double> dinput(batch * layer.in, 0.0);
    auto& wp = store[layer.weight];
    auto& bp = store[layer.bias];
    for (std::size_t r = 0; r < batch; ++r) {
      ops::affine_backward(wp.value.values(), std::span<const double>(cache.inputs[l]).subspan(r * layer.in, layer.in),
                           std::span<const double>(dpre).subspan(r * layer.out, layer.out), wp.grad.values(),
                           bp.grad.values(), std::span<double>(dinput).subspan(r * layer.in, layer.in));
    }
    grad = std::move(dinput);
  }
  return grad;
}

}  // namespace aim
