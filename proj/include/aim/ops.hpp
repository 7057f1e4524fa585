#pragma once

// Dense forward ops with their paired gradient ops. Gradient ops take the
// upstream cotangent and *accumulate* into the gradient outputs.

#include <span>

namespace aim::ops {

// y = W x + b, W is (out x in) row-major.
void affine(std::span<const double> weight, std::span<const double> bias, std::span<const double> x,
            std::span<double> y);
void affine_backward(std::span<const double> weight, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dweight, std::span<double> dbias, std::span<double> dx);

void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void add_backward(std::span<const double> dout, std::span<double> da, std::span<double> db);

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);
void hadamard_backward(std::span<const double> a, std::span<const double> b, std::span<const double> dout,
                       std::span<double> da, std::span<double> db);

void relu(std::span<const double> x, std::span<double> y);
void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

double sigmoid(double z);
// d sigmoid / dz expressed through the output y = sigmoid(z).
double sigmoid_backward(double y, double dy);

double sum(std::span<const double> x);
void sum_backward(double dout, std::span<double> dx);

double dot(std::span<const double> a, std::span<const double> b);
void dot_backward(std::span<const double> a, std::span<const double> b, double dout, std::span<double> da,
                  std::span<double> db);

// Stable binary cross-entropy from a logit: max(z,0) - z*y + log(1+exp(-|z|)).
double logloss_from_logit(double logit, int label);
double logloss_from_logit_grad(double logit, int label);

}  // namespace aim::ops
