#pragma once

// Interaction functions (IFs) and the combinatorics of interaction tuples.
//
// An IF maps p embeddings of width d to one scalar:
//   inner          sum_k prod_j e_jk
//   kernel_vector  sum_k phi_k prod_j e_jk
//   kernel_scalar  phi * sum_k prod_j e_jk
//   kernel_matrix  e_1^T Phi e_2              (p = 2 only)
//   outer_approx   prod_j (w_j^T e_j)          rank-1 stand-in for the d x d outer product
//
// Parameters of one (tuple, IF) pair are passed as one flat span:
// outer_approx stores w_1..w_p back to back, kernel_matrix stores Phi
// row-major.

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aim {

inline constexpr std::size_t kMaxOrder = 8;

enum class IfKind { inner, outer_approx, kernel_matrix, kernel_vector, kernel_scalar };

const char* if_kind_name(IfKind kind);
IfKind parse_if_kind(std::string_view name);
// inner, outer_approx, kernel_vector, kernel_scalar
std::vector<IfKind> default_if_kinds();

std::size_t if_param_count(IfKind kind, std::size_t order, std::size_t dim);

// Strictly increasing 0-based field indices; the only stored form.
class InteractionTuple {
 public:
  InteractionTuple() = default;
  // Sorts fields; throws ValidationError on repeats or fewer than two fields.
  explicit InteractionTuple(std::vector<std::size_t> fields);

  const std::vector<std::size_t>& fields() const { return fields_; }
  std::size_t order() const { return fields_.size(); }
  bool contains(std::size_t field) const;
  // "(1,2,3)" with 1-based field numbers.
  std::string str() const;

  auto operator<=>(const InteractionTuple&) const = default;

 private:
  std::vector<std::size_t> fields_;
};

using EmbeddingRefs = std::span<const std::span<const double>>;
using EmbeddingGrads = std::span<const std::span<double>>;

double if_forward(IfKind kind, EmbeddingRefs embeddings, std::span<const double> params);

// Accumulates cotangent-scaled gradients into d_embeddings and d_params.
void if_backward(IfKind kind, EmbeddingRefs embeddings, std::span<const double> params, double cotangent,
                 EmbeddingGrads d_embeddings, std::span<double> d_params);

// All C(n,2) pairs in lexicographic order; empty for n < 2.
std::vector<InteractionTuple> enumerate_second_order(std::size_t field_count);

// Candidate pool for the next order: every parent extended by one field it
// does not contain, canonicalized, deduplicated and sorted.
std::vector<InteractionTuple> combine(std::span<const InteractionTuple> top_prev,
                                      std::span<const std::size_t> singles);

// Sorted by |alpha| descending, ties broken lexicographically; keeps the
// first min(k, size).
std::vector<InteractionTuple> top_k_by_alpha(std::span<const std::pair<InteractionTuple, double>> scored,
                                             std::size_t k);

}  // namespace aim
