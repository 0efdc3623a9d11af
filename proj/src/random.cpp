#include "tubal/random.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/laplace_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace tubal {

double Rng::normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(engine_); }

double Rng::normal(double mean, double stddev) {
  return boost::random::normal_distribution<double>(mean, stddev)(engine_);
}

double Rng::laplace(double mu, double b) {
  return boost::random::laplace_distribution<double>(mu, b)(engine_);
}

double Rng::exponential(double lambda) {
  return boost::random::exponential_distribution<double>(lambda)(engine_);
}

bool Rng::bernoulli(double p) { return boost::random::bernoulli_distribution<double>(p)(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
  return boost::random::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

}  // namespace tubal
