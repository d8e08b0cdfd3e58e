#include "csos/polynomial.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace csos {

namespace {

void require_same_nvars(const Polynomial& a, const Polynomial& b,
                        const char* op) {
  if (a.nvars() != b.nvars()) {
    throw std::invalid_argument(std::string(op) + ": polynomials have " +
                                std::to_string(a.nvars()) + " and " +
                                std::to_string(b.nvars()) + " variables");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool GradedLexLess::operator()(const Exponent& a, const Exponent& b) const {
  const int da = total_degree(a);
  const int db = total_degree(b);
  if (da != db) return da < db;
  // Same degree: larger leading exponent sorts first (x1^2 before x1 x2).
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

int total_degree(const Exponent& e) {
  return std::accumulate(e.begin(), e.end(), 0);
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Exponent(nvars, 0), c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  if (index < 0 || index >= nvars) {
    throw std::invalid_argument("variable index out of range");
  }
  Exponent e(nvars, 0);
  e[index] = 1;
  Polynomial p(nvars);
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::monomial(const Exponent& e, double c) {
  Polynomial p(static_cast<int>(e.size()));
  p.add_term(e, c);
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return -1;
  // Graded order: last term has the highest degree.
  return total_degree(terms_.rbegin()->first);
}

double Polynomial::coeff(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::constant_term() const {
  return coeff(Exponent(nvars_, 0));
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (static_cast<int>(e.size()) != nvars_) {
    throw std::invalid_argument("exponent length " + std::to_string(e.size()) +
                                " does not match nvars " +
                                std::to_string(nvars_));
  }
  for (int a : e) {
    if (a < 0) throw std::invalid_argument("negative exponent");
  }
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kDefaultPrune) terms_.erase(it);
}

void Polynomial::prune(double threshold) {
  std::erase_if(terms_,
                [&](const auto& kv) { return std::abs(kv.second) < threshold; });
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  require_same_nvars(*this, other, "add");
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  require_same_nvars(*this, other, "sub");
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  for (auto& [e, c] : terms_) c *= s;
  prune();
  return *this;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

Polynomial add(const Polynomial& a, const Polynomial& b) {
  Polynomial r = a;
  r += b;
  return r;
}

Polynomial sub(const Polynomial& a, const Polynomial& b) {
  Polynomial r = a;
  r -= b;
  return r;
}

Polynomial mul(const Polynomial& a, const Polynomial& b) {
  require_same_nvars(a, b, "mul");
  const int n = a.nvars();
  Polynomial::TermMap acc;
  Exponent e(n);
  for (const auto& [ea, ca] : a.terms()) {
    for (const auto& [eb, cb] : b.terms()) {
      for (int i = 0; i < n; ++i) e[i] = ea[i] + eb[i];
      acc[e] += ca * cb;
    }
  }
  Polynomial r(n);
  for (const auto& [ex, c] : acc) r.add_term(ex, c);
  return r;
}

Polynomial scale(const Polynomial& p, double s) {
  Polynomial r = p;
  r *= s;
  return r;
}

Polynomial pow(const Polynomial& p, int k) {
  if (k < 0) throw std::invalid_argument("negative polynomial power");
  Polynomial result = Polynomial::constant(p.nvars(), 1.0);
  Polynomial base = p;
  while (k > 0) {
    if (k & 1) result = mul(result, base);
    k >>= 1;
    if (k > 0) base = mul(base, base);
  }
  return result;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  return add(a, b);
}
Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  return sub(a, b);
}
Polynomial operator-(const Polynomial& a) { return scale(a, -1.0); }
Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  return mul(a, b);
}
Polynomial operator*(double s, const Polynomial& p) { return scale(p, s); }
Polynomial operator*(const Polynomial& p, double s) { return scale(p, s); }

double eval(const Polynomial& p,
            const Eigen::Ref<const Eigen::VectorXd>& point) {
  if (point.size() != p.nvars()) {
    throw std::invalid_argument("eval: point has " +
                                std::to_string(point.size()) +
                                " entries, polynomial has " +
                                std::to_string(p.nvars()) + " variables");
  }
  double sum = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double term = c;
    for (int i = 0; i < p.nvars(); ++i) {
      if (e[i] != 0) term *= std::pow(point[i], e[i]);
    }
    sum += term;
  }
  return sum;
}

Polynomial derivative(const Polynomial& p, int var) {
  if (var < 0 || var >= p.nvars()) {
    throw std::invalid_argument("derivative: variable index out of range");
  }
  Polynomial d(p.nvars());
  for (const auto& [e, c] : p.terms()) {
    if (e[var] == 0) continue;
    Exponent de = e;
    de[var] -= 1;
    d.add_term(de, c * e[var]);
  }
  return d;
}

std::vector<Polynomial> grad(const Polynomial& p) {
  std::vector<Polynomial> g;
  g.reserve(p.nvars());
  for (int i = 0; i < p.nvars(); ++i) g.push_back(derivative(p, i));
  return g;
}

Polynomial lie_derivative(const Polynomial& p,
                          const std::vector<Polynomial>& field) {
  if (static_cast<int>(field.size()) != p.nvars()) {
    throw std::invalid_argument("lie_derivative: field dimension mismatch");
  }
  Polynomial r(p.nvars());
  for (int i = 0; i < p.nvars(); ++i) {
    Polynomial d = derivative(p, i);
    if (!d.is_zero()) r += mul(d, field[i]);
  }
  return r;
}

Polynomial compose_affine(const Polynomial& p, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& b) {
  if (A.rows() != p.nvars() || b.size() != p.nvars()) {
    throw std::invalid_argument(
        "compose_affine: A must have nvars rows and b nvars entries");
  }
  const int n_out = static_cast<int>(A.cols());
  const int n_in = p.nvars();
  // Affine images of each variable and a cache of their powers.
  std::vector<std::vector<Polynomial>> powers(n_in);
  for (int i = 0; i < n_in; ++i) {
    Polynomial li = Polynomial::constant(n_out, b[i]);
    for (int j = 0; j < n_out; ++j) {
      if (A(i, j) != 0.0) {
        Exponent e(n_out, 0);
        e[j] = 1;
        li.add_term(e, A(i, j));
      }
    }
    powers[i].push_back(Polynomial::constant(n_out, 1.0));
    powers[i].push_back(std::move(li));
  }
  Polynomial out(n_out);
  for (const auto& [e, c] : p.terms()) {
    Polynomial term = Polynomial::constant(n_out, c);
    for (int i = 0; i < n_in; ++i) {
      while (static_cast<int>(powers[i].size()) <= e[i]) {
        powers[i].push_back(mul(powers[i].back(), powers[i][1]));
      }
      if (e[i] > 0) term = mul(term, powers[i][e[i]]);
    }
    out += term;
  }
  return out;
}

double max_coeff_diff(const Polynomial& a, const Polynomial& b) {
  require_same_nvars(a, b, "max_coeff_diff");
  double m = 0.0;
  for (const auto& [e, c] : a.terms()) m = std::max(m, std::abs(c - b.coeff(e)));
  for (const auto& [e, c] : b.terms()) {
    if (!a.terms().count(e)) m = std::max(m, std::abs(c));
  }
  return m;
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [e, c] : p.terms()) {
    if (!first) out += " + ";
    first = false;
    out += format_double(c);
    bool star = false;
    for (int i = 0; i < p.nvars(); ++i) {
      if (e[i] == 0) continue;
      out += star ? " " : " * ";
      star = true;
      out += "x" + std::to_string(i + 1) + "^" + std::to_string(e[i]);
    }
  }
  return out;
}

Polynomial parse_polynomial(const std::string& text, int nvars) {
  Polynomial p(nvars);
  std::istringstream in(text);
  std::string tok;
  // Tokens: coefficient, optional "*", factors "xK^A", separated by "+".
  std::vector<std::string> tokens;
  while (in >> tok) tokens.push_back(tok);
  if (tokens.size() == 1 && tokens[0] == "0") return p;
  size_t i = 0;
  while (i < tokens.size()) {
    double c = 0.0;
    try {
      size_t used = 0;
      c = std::stod(tokens[i], &used);
      if (used != tokens[i].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("parse_polynomial: bad coefficient '" +
                                  tokens[i] + "'");
    }
    ++i;
    Exponent e(nvars, 0);
    if (i < tokens.size() && tokens[i] == "*") {
      ++i;
      while (i < tokens.size() && tokens[i] != "+") {
        const std::string& f = tokens[i];
        const auto caret = f.find('^');
        if (f.empty() || f[0] != 'x' || caret == std::string::npos) {
          throw std::invalid_argument("parse_polynomial: bad factor '" + f +
                                      "'");
        }
        const int var = std::stoi(f.substr(1, caret - 1)) - 1;
        const int a = std::stoi(f.substr(caret + 1));
        if (var < 0 || var >= nvars) {
          throw std::invalid_argument("parse_polynomial: variable " + f +
                                      " out of range");
        }
        e[var] += a;
        ++i;
      }
    }
    p.add_term(e, c);
    if (i < tokens.size()) {
      if (tokens[i] != "+") {
        throw std::invalid_argument("parse_polynomial: expected '+'");
      }
      ++i;
    }
  }
  return p;
}

}  // namespace csos
