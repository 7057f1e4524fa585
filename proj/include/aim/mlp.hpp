#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aim/parameter.hpp"
#include "aim/rng.hpp"

namespace aim {

// Fully connected stack: relu on every hidden layer, linear scalar output.
class MlpHead {
 public:
  MlpHead() = default;
  // Registers weights "<prefix>/w<l>" (out x in) and "<prefix>/b<l>".
  MlpHead(ParameterStore& store, const std::string& prefix, std::size_t input_width,
          const std::vector<std::size_t>& hidden_widths, Rng& rng);

  bool empty() const { return layers_.empty(); }
  // Widens the first layer by count zero-weight input columns appended at
  // the end of each row; optimizer moments are widened alongside.
  void append_inputs(ParameterStore& store, std::size_t count);
  std::size_t input_width() const { return input_width_; }

  // Activations for a whole batch, row-major (batch x width) per layer.
  struct Cache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> inputs;  // input to layer l
    std::vector<std::vector<double>> pre;     // pre-activation of layer l
  };

  // input is batch x input_width; returns one scalar per row.
  std::vector<double> forward(const ParameterStore& store, std::span<const double> input, std::size_t batch,
                              Cache& cache) const;
  // Accumulates parameter gradients; returns d input (batch x input_width).
  std::vector<double> backward(ParameterStore& store, const Cache& cache, std::span<const double> dout) const;

 private:
  struct Layer {
    ParameterStore::Id weight;
    ParameterStore::Id bias;
    std::size_t in;
    std::size_t out;
  };
  std::vector<Layer> layers_;
  std::size_t input_width_ = 0;
};

}  // namespace aim
