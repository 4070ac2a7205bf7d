#include "kib/rational.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kib {

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::domain_error("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = g ? num / g : 0;
  den_ = g ? den / g : 1;
}

Rational Rational::from_double(double value, std::int64_t max_den) {
  if (!std::isfinite(value)) throw std::invalid_argument("Rational::from_double: non-finite value");
  // Continued-fraction convergents.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double x = value;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_f = std::floor(x);
    if (std::abs(a_f) > 9e15) break;
    const auto a = static_cast<std::int64_t>(a_f);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    const double frac = x - a_f;
    if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - value) <=
        1e-15 * std::max(1.0, std::abs(value)))
      break;
    if (frac < 1e-300) break;
    x = 1.0 / frac;
  }
  if (k1 == 0) throw std::invalid_argument("Rational::from_double: no approximation");
  Rational r(h1, k1);
  if (std::abs(r.to_double() - value) > 1e-12 * std::max(1.0, std::abs(value)))
    throw std::invalid_argument("Rational::from_double: " + std::to_string(value) +
                                " is not a rational with small denominator");
  return r;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
}
Rational operator-(const Rational& a, const Rational& b) {
  return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_};
}
Rational operator*(const Rational& a, const Rational& b) { return {a.num_ * b.num_, a.den_ * b.den_}; }
Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
  return {a.num_ * b.den_, a.den_ * b.num_};
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  return a.num_ * b.den_ <=> b.num_ * a.den_;
}

}  // namespace kib
