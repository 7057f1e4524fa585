#include "aim/ops.hpp"

#include <algorithm>
#include <cmath>

#include "aim/error.hpp"

namespace aim::ops {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}
}  // namespace

void affine(std::span<const double> weight, std::span<const double> bias, std::span<const double> x,
            std::span<double> y) {
  require(bias.size() == y.size() && weight.size() == y.size() * x.size(), "affine: shape mismatch");
  const std::size_t in = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double* w = weight.data() + r * in;
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += w[c] * x[c];
    y[r] = acc + bias[r];
  }
}

void affine_backward(std::span<const double> weight, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dweight, std::span<double> dbias, std::span<double> dx) {
  require(weight.size() == dy.size() * x.size() && dweight.size() == weight.size() && dbias.size() == dy.size(),
          "affine_backward: shape mismatch");
  require(dx.empty() || dx.size() == x.size(), "affine_backward: dx shape mismatch");
  const std::size_t in = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    dbias[r] += g;
    double* dw = dweight.data() + r * in;
    const double* w = weight.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) dw[c] += g * x[c];
    if (!dx.empty()) {
      for (std::size_t c = 0; c < in; ++c) dx[c] += g * w[c];
    }
  }
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require(a.size() == b.size() && a.size() == out.size(), "add: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

void add_backward(std::span<const double> dout, std::span<double> da, std::span<double> db) {
  require(dout.size() == da.size() && dout.size() == db.size(), "add_backward: shape mismatch");
  for (std::size_t i = 0; i < dout.size(); ++i) {
    da[i] += dout[i];
    db[i] += dout[i];
  }
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require(a.size() == b.size() && a.size() == out.size(), "hadamard: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

void hadamard_backward(std::span<const double> a, std::span<const double> b, std::span<const double> dout,
                       std::span<double> da, std::span<double> db) {
  require(a.size() == b.size() && a.size() == dout.size() && da.size() == a.size() && db.size() == b.size(),
          "hadamard_backward: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] += dout[i] * b[i];
    db[i] += dout[i] * a[i];
  }
}

void relu(std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "relu: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  require(x.size() == dy.size() && x.size() == dx.size(), "relu_backward: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double sigmoid_backward(double y, double dy) { return dy * y * (1.0 - y); }

double sum(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

void sum_backward(double dout, std::span<double> dx) {
  for (auto& v : dx) v += dout;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void dot_backward(std::span<const double> a, std::span<const double> b, double dout, std::span<double> da,
                  std::span<double> db) {
  require(a.size() == b.size() && da.size() == a.size() && db.size() == b.size(), "dot_backward: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] += dout * b[i];
    db[i] += dout * a[i];
  }
}

double logloss_from_logit(double logit, int label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double logloss_from_logit_grad(double logit, int label) { return sigmoid(logit) - label; }

}  // namespace aim::ops
