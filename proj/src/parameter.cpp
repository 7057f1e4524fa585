#include "aim/parameter.hpp"

#include "aim/error.hpp"

namespace aim {

const char* optimizer_tag_name(OptimizerTag tag) {
  switch (tag) {
    case OptimizerTag::adam: return "adam";
    case OptimizerTag::grda: return "grda";
    case OptimizerTag::frozen: return "frozen";
  }
  return "?";
}

OptimizerTag parse_optimizer_tag(std::string_view name) {
  if (name == "adam") return OptimizerTag::adam;
  if (name == "grda") return OptimizerTag::grda;
  if (name == "frozen") return OptimizerTag::frozen;
  throw ValidationError("unknown optimizer tag '" + std::string(name) + "'");
}

Parameter::Parameter(std::string name, Tensor value_in, OptimizerTag tag)
    : value(std::move(value_in)), grad(value.shape()), name_(std::move(name)), tag_(tag) {
  if (tag_ == OptimizerTag::grda) {
    grda.alpha0 = value;
    grda.accumulator = Tensor(value.shape());
  }
}

void apply_update(Parameter& param, const OptimizerSettings& settings) {
  switch (param.tag()) {
    case OptimizerTag::adam:
      adam_step(param.value, param.grad, param.adam, settings.adam);
      break;
    case OptimizerTag::grda:
      param.grda.config = settings.grda;
      param.value = grda_step(param.grda, param.grad);
      break;
    case OptimizerTag::frozen:
      break;
  }
  param.zero_grad();
}

ParameterStore::Id ParameterStore::add(std::string name, Tensor value, OptimizerTag tag) {
  if (find(name) != nullptr) throw ValidationError("duplicate parameter '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value), tag));
  return params_.size() - 1;
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::step(const OptimizerSettings& settings) {
  for (auto& p : params_) apply_update(*p, settings);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p->value.size();
  return total;
}

}  // namespace aim
