#pragma once

// Sparse multivariate polynomials over a fixed variable count, with the
// graded lexicographic monomial order used throughout the library:
// lower total degree first, ties broken so that higher powers on earlier
// variables come first.  The degree-d monomial vector therefore reads
// [1, x1, x2, ..., xn, x1^2, x1*x2, ..., xn^d].

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace umos {

class Exponent {
 public:
  explicit Exponent(std::vector<int> powers);
  static Exponent zero(int nvars);
  static Exponent unit(int nvars, int var);

  int nvars() const { return static_cast<int>(powers_.size()); }
  int degree() const { return degree_; }
  int operator[](int i) const { return powers_[i]; }
  const std::vector<int>& powers() const { return powers_; }

  Exponent operator+(const Exponent& other) const;

  bool operator==(const Exponent& other) const { return powers_ == other.powers_; }
  bool operator!=(const Exponent& other) const { return !(*this == other); }
  // graded lexicographic: by degree, then lexicographically larger powers first
  bool operator<(const Exponent& other) const;

  std::string to_string() const;

 private:
  std::vector<int> powers_;
  int degree_;
};

// All exponents in n variables up to a total degree, in graded lex order.
// index_of is an arithmetic rank computation, no hashing involved.
class MonomialBasis {
 public:
  MonomialBasis(int nvars, int max_degree);

  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return exponents_.size(); }
  const Exponent& operator[](std::size_t i) const { return exponents_[i]; }
  const std::vector<Exponent>& exponents() const { return exponents_; }

  std::size_t index_of(const Exponent& e) const;  // throws if out of range

  static std::size_t dimension(int nvars, int max_degree);

 private:
  int nvars_;
  int max_degree_;
  std::vector<Exponent> exponents_;
};

class Polynomial {
 public:
  explicit Polynomial(int nvars);
  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int var);  // 0-based, represents x_{var+1}
  static Polynomial from_terms(int nvars,
                               const std::vector<std::pair<Exponent, double>>& terms);

  int nvars() const { return nvars_; }
  int degree() const;  // zero polynomial has degree 0
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  double constant_term() const;
  double coefficient(const Exponent& e) const;
  std::size_t term_count() const { return terms_.size(); }
  const std::map<Exponent, double>& terms() const { return terms_; }

  void add_term(const Exponent& e, double c);  // accumulates, prunes exact zeros

  double evaluate(const std::vector<double>& u) const;
  double max_abs_coefficient() const;
  Polynomial derivative(int var) const;

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator-(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial pow(int k) const;

  bool operator==(const Polynomial& other) const;

  std::string to_string() const;

 private:
  int nvars_;
  std::map<Exponent, double> terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

// Parses the textual format `coeff * x1^a1 * ... * xn^an` joined by +/-.
// Exponents default to 1, coefficients to 1; `x` is accepted for `x1`.
Polynomial parse_polynomial(const std::string& text, int nvars);

}  // namespace umos
