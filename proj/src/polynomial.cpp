#include "umos/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace umos {

Exponent::Exponent(std::vector<int> powers) : powers_(std::move(powers)) {
  if (powers_.empty()) throw std::invalid_argument("Exponent: empty power vector");
  for (int p : powers_)
    if (p < 0) throw std::invalid_argument("Exponent: negative power");
  degree_ = std::accumulate(powers_.begin(), powers_.end(), 0);
}

Exponent Exponent::zero(int nvars) { return Exponent(std::vector<int>(nvars, 0)); }

Exponent Exponent::unit(int nvars, int var) {
  std::vector<int> p(nvars, 0);
  p.at(var) = 1;
  return Exponent(std::move(p));
}

Exponent Exponent::operator+(const Exponent& other) const {
  if (nvars() != other.nvars())
    throw std::invalid_argument("Exponent: variable count mismatch");
  std::vector<int> p(powers_);
  for (int i = 0; i < nvars(); ++i) p[i] += other.powers_[i];
  return Exponent(std::move(p));
}

bool Exponent::operator<(const Exponent& other) const {
  if (degree_ != other.degree_) return degree_ < other.degree_;
  return powers_ > other.powers_;  // higher leading powers come first
}

std::string Exponent::to_string() const {
  if (degree_ == 0) return "1";
  std::ostringstream os;
  bool first = true;
  for (int i = 0; i < nvars(); ++i) {
    if (powers_[i] == 0) continue;
    if (!first) os << "*";
    os << "x" << (i + 1);
    if (powers_[i] > 1) os << "^" << powers_[i];
    first = false;
  }
  return os.str();
}

namespace {

// number of monomials of exact degree d in n variables
std::size_t exact_count(int nvars, int d) {
  // C(n-1+d, d)
  long double r = 1.0L;
  for (int i = 1; i <= d; ++i) r = r * (nvars - 1 + i) / i;
  return static_cast<std::size_t>(std::llround((double)r));
}

void enumerate_rec(int nvars, int pos, int remaining, std::vector<int>& cur,
                   std::vector<Exponent>& out) {
  if (pos == nvars - 1) {
    cur[pos] = remaining;
    out.emplace_back(cur);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    cur[pos] = v;
    enumerate_rec(nvars, pos + 1, remaining - v, cur, out);
  }
}

}  // namespace

MonomialBasis::MonomialBasis(int nvars, int max_degree)
    : nvars_(nvars), max_degree_(max_degree) {
  if (nvars < 1) throw std::invalid_argument("MonomialBasis: nvars must be >= 1");
  if (max_degree < 0) throw std::invalid_argument("MonomialBasis: negative degree");
  exponents_.reserve(dimension(nvars, max_degree));
  std::vector<int> cur(nvars, 0);
  for (int d = 0; d <= max_degree; ++d) enumerate_rec(nvars, 0, d, cur, exponents_);
}

std::size_t MonomialBasis::dimension(int nvars, int max_degree) {
  // C(n + d, d)
  long double r = 1.0L;
  for (int i = 1; i <= max_degree; ++i) r = r * (nvars + i) / i;
  return static_cast<std::size_t>(std::llround((double)r));
}

std::size_t MonomialBasis::index_of(const Exponent& e) const {
  if (e.nvars() != nvars_)
    throw std::invalid_argument("MonomialBasis::index_of: variable count mismatch");
  int d = e.degree();
  if (d > max_degree_)
    throw std::out_of_range("MonomialBasis::index_of: degree exceeds basis");
  std::size_t idx = 0;
  for (int t = 0; t < d; ++t) idx += exact_count(nvars_, t);
  // rank within the fixed-degree stratum, descending lex
  int remaining = d;
  for (int i = 0; i < nvars_ - 1; ++i) {
    int ai = e[i];
    for (int v = remaining; v > ai; --v) idx += exact_count(nvars_ - 1 - i, remaining - v);
    remaining -= ai;
  }
  return idx;
}

Polynomial::Polynomial(int nvars) : nvars_(nvars) {
  if (nvars < 1) throw std::invalid_argument("Polynomial: nvars must be >= 1");
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Exponent::zero(nvars), c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int var) {
  Polynomial p(nvars);
  p.add_term(Exponent::unit(nvars, var), 1.0);
  return p;
}

Polynomial Polynomial::from_terms(
    int nvars, const std::vector<std::pair<Exponent, double>>& terms) {
  Polynomial p(nvars);
  for (const auto& [e, c] : terms) p.add_term(e, c);
  return p;
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (e.nvars() != nvars_)
    throw std::invalid_argument("Polynomial::add_term: variable count mismatch");
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    if (c != 0.0) terms_.emplace(e, c);
    return;
  }
  it->second += c;
  if (it->second == 0.0) terms_.erase(it);
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, e.degree());
  return d;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.degree() == 0);
}

double Polynomial::constant_term() const {
  auto it = terms_.find(Exponent::zero(nvars_));
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::evaluate(const std::vector<double>& u) const {
  if (static_cast<int>(u.size()) != nvars_)
    throw std::invalid_argument("Polynomial::evaluate: wrong point dimension");
  double total = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < e[i]; ++k) m *= u[i];
    total += m;
  }
  return total;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial d(nvars_);
  for (const auto& [e, c] : terms_) {
    const int p = e[var];
    if (p == 0) continue;
    std::vector<int> powers = e.powers();
    powers[static_cast<std::size_t>(var)] = p - 1;
    d.add_term(Exponent(std::move(powers)), c * p);
  }
  return d;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  if (nvars_ != other.nvars_)
    throw std::invalid_argument("Polynomial: variable count mismatch");
  Polynomial r(*this);
  for (const auto& [e, c] : other.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
  if (nvars_ != other.nvars_)
    throw std::invalid_argument("Polynomial: variable count mismatch");
  Polynomial r(*this);
  for (const auto& [e, c] : other.terms_) r.add_term(e, -c);
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  if (nvars_ != other.nvars_)
    throw std::invalid_argument("Polynomial: variable count mismatch");
  Polynomial r(nvars_);
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : other.terms_) r.add_term(ea + eb, ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(nvars_);
  if (s == 0.0) return r;
  for (const auto& [e, c] : terms_) r.add_term(e, c * s);
  return r;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
  Polynomial r = Polynomial::constant(nvars_, 1.0);
  for (int i = 0; i < k; ++i) r = r * (*this);
  return r;
}

bool Polynomial::operator==(const Polynomial& other) const {
  return nvars_ == other.nvars_ && terms_ == other.terms_;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    double coef = c;
    if (first) {
      if (coef < 0) {
        os << "-";
        coef = -coef;
      }
    } else {
      os << (coef < 0 ? " - " : " + ");
      coef = std::abs(coef);
    }
    if (e.degree() == 0) {
      os << coef;
    } else {
      if (coef != 1.0) os << coef << "*";
      os << e.to_string();
    }
    first = false;
  }
  return os.str();
}

namespace {

struct Parser {
  const std::string& s;
  std::size_t pos = 0;
  int nvars;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() {
    skip_ws();
    return s[pos];
  }

  double parse_number() {
    skip_ws();
    std::size_t end = pos;
    while (end < s.size() &&
           (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' ||
            s[end] == 'e' || s[end] == 'E' ||
            ((s[end] == '+' || s[end] == '-') && end > pos &&
             (s[end - 1] == 'e' || s[end - 1] == 'E'))))
      ++end;
    if (end == pos) throw std::invalid_argument("polynomial parse: expected number");
    double v = std::stod(s.substr(pos, end - pos));
    pos = end;
    return v;
  }

  int parse_int() {
    skip_ws();
    std::size_t end = pos;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    if (end == pos) throw std::invalid_argument("polynomial parse: expected integer");
    int v = std::stoi(s.substr(pos, end - pos));
    pos = end;
    return v;
  }

  // factor := number | x | xN, optionally followed by ^INT
  void parse_factor(double& coef, std::vector<int>& powers) {
    skip_ws();
    if (pos >= s.size()) throw std::invalid_argument("polynomial parse: unexpected end");
    char c = s[pos];
    if (c == 'x' || c == 'X') {
      ++pos;
      int var = 1;
      if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
        var = parse_int();
      if (var < 1 || var > nvars)
        throw std::invalid_argument("polynomial parse: variable index out of range");
      int exp = 1;
      skip_ws();
      if (pos < s.size() && s[pos] == '^') {
        ++pos;
        exp = parse_int();
        if (exp < 0) throw std::invalid_argument("polynomial parse: negative exponent");
      }
      powers[var - 1] += exp;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = parse_number();
      skip_ws();
      if (pos < s.size() && s[pos] == '^') {
        ++pos;
        v = std::pow(v, parse_int());
      }
      coef *= v;
    } else {
      throw std::invalid_argument(std::string("polynomial parse: unexpected '") + c + "'");
    }
  }

  Polynomial run() {
    Polynomial p(nvars);
    bool first = true;
    while (!eof()) {
      double sign = 1.0;
      skip_ws();
      while (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        if (s[pos] == '-') sign = -sign;
        ++pos;
        skip_ws();
      }
      if (pos >= s.size()) {
        if (!first) throw std::invalid_argument("polynomial parse: trailing operator");
        break;
      }
      double coef = sign;
      std::vector<int> powers(nvars, 0);
      parse_factor(coef, powers);
      skip_ws();
      while (pos < s.size() && s[pos] == '*') {
        ++pos;
        parse_factor(coef, powers);
        skip_ws();
      }
      p.add_term(Exponent(powers), coef);
      first = false;
    }
    return p;
  }
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, int nvars) {
  Parser parser{text, 0, nvars};
  return parser.run();
}

}  // namespace umos
