#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aim/optim.hpp"
#include "aim/tensor.hpp"

namespace aim {

enum class OptimizerTag { adam, grda, frozen };
const char* optimizer_tag_name(OptimizerTag tag);
OptimizerTag parse_optimizer_tag(std::string_view name);

class Parameter {
 public:
  Parameter(std::string name, Tensor value, OptimizerTag tag);

  const std::string& name() const { return name_; }
  OptimizerTag tag() const { return tag_; }

  Tensor value;
  Tensor grad;
  AdamState adam;
  GrdaState grda;

  void zero_grad() { grad.fill(0.0); }

 private:
  std::string name_;
  OptimizerTag tag_;
};

struct OptimizerSettings {
  AdamConfig adam;
  GrdaConfig grda;
};

// Applies the optimizer chosen by the parameter's tag and clears its gradient.
void apply_update(Parameter& param, const OptimizerSettings& settings);

// Registration-ordered collection of named parameters.
class ParameterStore {
 public:
  using Id = std::size_t;

  Id add(std::string name, Tensor value, OptimizerTag tag);

  Parameter& operator[](Id id) { return *params_[id]; }
  const Parameter& operator[](Id id) const { return *params_[id]; }
  std::size_t size() const { return params_.size(); }

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  void zero_grad();
  void step(const OptimizerSettings& settings);
  // Total scalar count over all registered parameters.
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace aim
