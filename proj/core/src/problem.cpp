#include "rootsgd/problem.hpp"

#include <string>

#include "rootsgd/errors.hpp"

namespace rootsgd {

Sample Problem::draw(RandomStream& stream) const {
  Sample s;
  draw_into(stream, s);
  return s;
}

void Problem::require_dimension(std::span<const double> theta,
                                const char* what) const {
  if (theta.size() != dimension()) {
    throw DimensionMismatch(std::string(what) + ": theta has length " +
                            std::to_string(theta.size()) + ", problem '" +
                            std::string(name()) + "' has dimension " +
                            std::to_string(dimension()));
  }
}

Vector Problem::stochastic_grad(std::span<const double> theta,
                                const Sample& xi) const {
  require_dimension(theta, "stochastic_grad");
  Vector out(dimension());
  grad_into(theta, xi, out);
  return out;
}

Vector Problem::population_grad(std::span<const double> theta) const {
  require_dimension(theta, "population_grad");
  Vector out(dimension());
  population_grad_into(theta, out);
  return out;
}

Vector Problem::noise_at(std::span<const double> theta, const Sample& xi) const {
  Vector g = stochastic_grad(theta, xi);
  const Vector pop = population_grad(theta);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= pop[i];
  return g;
}

DenseMatrix Problem::stochastic_hessian(std::span<const double> theta,
                                        const Sample& xi) const {
  require_dimension(theta, "stochastic_hessian");
  return hessian_impl(theta, xi);
}

DenseMatrix Problem::hessian_impl(std::span<const double>, const Sample&) const {
  throw UnsupportedOperation("problem '" + std::string(name()) +
                             "' does not provide stochastic Hessians");
}

DenseMatrix hessian_noise_square(const DenseMatrix& tensor, std::size_t d) {
  if (tensor.rows() != d * d || tensor.cols() != d * d) {
    throw DimensionMismatch("hessian_noise_square: tensor must be d^2 x d^2");
  }
  DenseMatrix sq(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += tensor(i * d + j, j * d + k);
      sq(i, k) = s;
    }
  return sq;
}

}  // namespace rootsgd
