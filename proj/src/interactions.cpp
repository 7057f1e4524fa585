#include "aim/interactions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "aim/error.hpp"

namespace aim {

namespace {

void check_shapes(IfKind kind, EmbeddingRefs embeddings, std::span<const double> params) {
  const std::size_t p = embeddings.size();
  if (p < 2 || p > kMaxOrder) throw ValidationError("interaction order out of range");
  const std::size_t d = embeddings[0].size();
  for (const auto& e : embeddings) {
    if (e.size() != d) throw ValidationError("interaction embeddings differ in width");
  }
  if (kind == IfKind::kernel_matrix && p != 2) {
    throw ValidationError("kernel_matrix is only defined for order 2");
  }
  if (params.size() != if_param_count(kind, p, d)) {
    throw ValidationError(std::string("parameter shape mismatch for ") + if_kind_name(kind));
  }
}

// prod_j e_jk at coordinate k.
double column_product(EmbeddingRefs embeddings, std::size_t k) {
  double prod = embeddings[0][k];
  for (std::size_t j = 1; j < embeddings.size(); ++j) prod *= embeddings[j][k];
  return prod;
}

// prod_{l != skip} e_lk at coordinate k.
double column_product_except(EmbeddingRefs embeddings, std::size_t k, std::size_t skip) {
  double prod = 1.0;
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    if (j != skip) prod *= embeddings[j][k];
  }
  return prod;
}

}  // namespace

const char* if_kind_name(IfKind kind) {
  switch (kind) {
    case IfKind::inner: return "inner";
    case IfKind::outer_approx: return "outer_approx";
    case IfKind::kernel_matrix: return "kernel_matrix";
    case IfKind::kernel_vector: return "kernel_vector";
    case IfKind::kernel_scalar: return "kernel_scalar";
  }
  return "?";
}

IfKind parse_if_kind(std::string_view name) {
  if (name == "inner") return IfKind::inner;
  if (name == "outer_approx" || name == "outer") return IfKind::outer_approx;
  if (name == "kernel_matrix") return IfKind::kernel_matrix;
  if (name == "kernel_vector") return IfKind::kernel_vector;
  if (name == "kernel_scalar") return IfKind::kernel_scalar;
  throw ValidationError("unknown interaction function '" + std::string(name) + "'");
}

std::vector<IfKind> default_if_kinds() {
  return {IfKind::inner, IfKind::outer_approx, IfKind::kernel_vector, IfKind::kernel_scalar};
}

std::size_t if_param_count(IfKind kind, std::size_t order, std::size_t dim) {
  switch (kind) {
    case IfKind::inner: return 0;
    case IfKind::outer_approx: return order * dim;
    case IfKind::kernel_matrix: return dim * dim;
    case IfKind::kernel_vector: return dim;
    case IfKind::kernel_scalar: return 1;
  }
  return 0;
}

InteractionTuple::InteractionTuple(std::vector<std::size_t> fields) : fields_(std::move(fields)) {
  std::sort(fields_.begin(), fields_.end());
  if (fields_.size() < 2) throw ValidationError("an interaction needs at least two fields");
  if (std::adjacent_find(fields_.begin(), fields_.end()) != fields_.end()) {
    throw ValidationError("interaction fields must be distinct");
  }
}

bool InteractionTuple::contains(std::size_t field) const {
  return std::binary_search(fields_.begin(), fields_.end(), field);
}

std::string InteractionTuple::str() const {
  std::string out = "(";
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(fields_[i] + 1);
  }
  return out + ")";
}

double if_forward(IfKind kind, EmbeddingRefs e, std::span<const double> params) {
  check_shapes(kind, e, params);
  const std::size_t d = e[0].size();
  switch (kind) {
    case IfKind::inner: {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += column_product(e, k);
      return acc;
    }
    case IfKind::kernel_vector: {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += params[k] * column_product(e, k);
      return acc;
    }
    case IfKind::kernel_scalar: {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += column_product(e, k);
      return params[0] * acc;
    }
    case IfKind::kernel_matrix: {
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < d; ++b) row += params[a * d + b] * e[1][b];
        acc += e[0][a] * row;
      }
      return acc;
    }
    case IfKind::outer_approx: {
      double prod = 1.0;
      for (std::size_t j = 0; j < e.size(); ++j) {
        double proj = 0.0;
        for (std::size_t k = 0; k < d; ++k) proj += params[j * d + k] * e[j][k];
        prod *= proj;
      }
      return prod;
    }
  }
  return 0.0;
}

void if_backward(IfKind kind, EmbeddingRefs e, std::span<const double> params, double cot, EmbeddingGrads de,
                 std::span<double> dparams) {
  check_shapes(kind, e, params);
  const std::size_t p = e.size();
  const std::size_t d = e[0].size();
  if (de.size() != p || dparams.size() != params.size()) throw ValidationError("if_backward: gradient shape mismatch");
  switch (kind) {
    case IfKind::inner:
    case IfKind::kernel_vector:
    case IfKind::kernel_scalar: {
      for (std::size_t k = 0; k < d; ++k) {
        double scale = cot;
        if (kind == IfKind::kernel_vector) {
          dparams[k] += cot * column_product(e, k);
          scale *= params[k];
        } else if (kind == IfKind::kernel_scalar) {
          scale *= params[0];
        }
        for (std::size_t j = 0; j < p; ++j) de[j][k] += scale * column_product_except(e, k, j);
      }
      if (kind == IfKind::kernel_scalar) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += column_product(e, k);
        dparams[0] += cot * acc;
      }
      return;
    }
    case IfKind::kernel_matrix: {
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
          const double phi = params[a * d + b];
          dparams[a * d + b] += cot * e[0][a] * e[1][b];
          de[0][a] += cot * phi * e[1][b];
          de[1][b] += cot * phi * e[0][a];
        }
      }
      return;
    }
    case IfKind::outer_approx: {
      std::array<double, kMaxOrder> proj{};
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += params[j * d + k] * e[j][k];
        proj[j] = s;
      }
      for (std::size_t j = 0; j < p; ++j) {
        double others = cot;
        for (std::size_t l = 0; l < p; ++l) {
          if (l != j) others *= proj[l];
        }
        for (std::size_t k = 0; k < d; ++k) {
          dparams[j * d + k] += others * e[j][k];
          de[j][k] += others * params[j * d + k];
        }
      }
      return;
    }
  }
}

std::vector<InteractionTuple> enumerate_second_order(std::size_t n) {
  std::vector<InteractionTuple> out;
  if (n < 2) return out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(std::vector<std::size_t>{i, j});
  }
  return out;
}

std::vector<InteractionTuple> combine(std::span<const InteractionTuple> top_prev,
                                      std::span<const std::size_t> singles) {
  std::set<InteractionTuple> pool;
  for (const auto& parent : top_prev) {
    for (auto field : singles) {
      if (parent.contains(field)) continue;
      auto fields = parent.fields();
      fields.push_back(field);
      pool.emplace(std::move(fields));
    }
  }
  return {pool.begin(), pool.end()};
}

std::vector<InteractionTuple> top_k_by_alpha(std::span<const std::pair<InteractionTuple, double>> scored,
                                             std::size_t k) {
  std::vector<std::pair<InteractionTuple, double>> sorted(scored.begin(), scored.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    const double ma = std::abs(a.second), mb = std::abs(b.second);
    if (ma != mb) return ma > mb;
    return a.first < b.first;
  });
  std::vector<InteractionTuple> out;
  for (std::size_t i = 0; i < sorted.size() && i < k; ++i) out.push_back(std::move(sorted[i].first));
  return out;
}

}  // namespace aim
