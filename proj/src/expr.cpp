#include "pmc/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace pmc {

namespace {

// ---------------------------------------------------------------------------
// Truncated Taylor arithmetic, total degree <= 3, dim in {2,3}.
// Coefficients are stored in graded-lex multi-index order; coefficient of
// multi-index a represents d^a f / a! at the expansion point.
// ---------------------------------------------------------------------------

constexpr int kMaxCoef = 20;  // dim 3: C(3+3,3)

struct TaylorTables {
  int dim = 0;
  int ncoef[4] = {};            // coefficients needed up to each order
  std::array<std::array<int, 3>, kMaxCoef> midx{};
  double fact[kMaxCoef] = {};   // a! per coefficient slot
  struct Tri { int k, i, j; };
  std::vector<Tri> tri;         // product table, sorted by degree of target
  int tri_upto[4] = {};         // tri prefix length per order
};

TaylorTables build_tables(int dim) {
  TaylorTables t;
  t.dim = dim;
  std::vector<std::array<int, 3>> mi;
  for (int deg = 0; deg <= 3; ++deg) {
    for (int a1 = deg; a1 >= 0; --a1) {
      if (dim == 2) {
        mi.push_back({a1, deg - a1, 0});
      } else {
        for (int a2 = deg - a1; a2 >= 0; --a2)
          mi.push_back({a1, a2, deg - a1 - a2});
      }
    }
    t.ncoef[deg] = (int)mi.size();
  }
  for (int i = 0; i < t.ncoef[3]; ++i) {
    t.midx[i] = mi[i];
    double f = 1.0;
    for (int d = 0; d < 3; ++d)
      for (int k = 2; k <= mi[i][d]; ++k) f *= k;
    t.fact[i] = f;
  }
  auto find = [&](const std::array<int, 3>& a) {
    for (int i = 0; i < t.ncoef[3]; ++i)
      if (t.midx[i] == a) return i;
    return -1;
  };
  for (int deg = 0; deg <= 3; ++deg) {
    for (int i = 0; i < t.ncoef[3]; ++i) {
      for (int j = 0; j < t.ncoef[3]; ++j) {
        std::array<int, 3> s = {t.midx[i][0] + t.midx[j][0],
                                t.midx[i][1] + t.midx[j][1],
                                t.midx[i][2] + t.midx[j][2]};
        if (s[0] + s[1] + s[2] != deg) continue;
        t.tri.push_back({find(s), i, j});
      }
    }
    t.tri_upto[deg] = (int)t.tri.size();
  }
  return t;
}

const TaylorTables& tables(int dim) {
  static const TaylorTables t2 = build_tables(2);
  static const TaylorTables t3 = build_tables(3);
  return dim == 2 ? t2 : t3;
}

struct TV {
  std::array<double, kMaxCoef> c;
};

inline void tv_zero(TV& r, int n) {
  for (int i = 0; i < n; ++i) r.c[i] = 0.0;
}

inline void tv_mul(const TaylorTables& t, int order, const TV& a, const TV& b,
                   TV& r) {
  tv_zero(r, t.ncoef[order]);
  const int m = t.tri_upto[order];
  for (int q = 0; q < m; ++q) {
    const auto& tr = t.tri[q];
    r.c[tr.k] += a.c[tr.i] * b.c[tr.j];
  }
}

// r = f(u) with f given by its derivative values f0..f3 at u.c[0], via
// Horner on w = u - u0 (w is nilpotent: w^4 truncates away).
inline void tv_compose(const TaylorTables& t, int order, const TV& u,
                       const double* f, TV& r) {
  TV w = u;
  w.c[0] = 0.0;
  static const double inv_fact[4] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  tv_zero(r, t.ncoef[order]);
  r.c[0] = f[order] * inv_fact[order];
  TV tmp;
  for (int k = order - 1; k >= 0; --k) {
    tv_mul(t, order, r, w, tmp);
    r = tmp;
    r.c[0] += f[k] * inv_fact[k];
  }
}

const char* func_name(int f) {
  static const char* names[] = {"sin", "cos", "exp", "log", "sqrt"};
  return names[f];
}

} // namespace

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  Parser(std::string_view text, int dim, Expr& out)
      : s_(text), dim_(dim), out_(out) {}

  void run() {
    int root = parse_expr();
    skip_ws();
    if (pos_ != s_.size())
      fail(pos_, "unexpected input after expression");
    (void)root;
  }

 private:
  [[noreturn]] void fail(std::size_t off, const std::string& msg) {
    throw ParseError(ParseError::Kind::syntax, off,
                     msg + " at offset " + std::to_string(off));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) { ++pos_; return true; }
    return false;
  }

  int add_node(Expr::Node n) {
    out_.nodes_.push_back(n);
    return (int)out_.nodes_.size() - 1;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      skip_ws();
      std::size_t off = pos_;
      if (accept('+')) {
        int rhs = parse_term();
        Expr::Node n{Expr::Kind::add};
        n.a = lhs; n.b = rhs; n.offset = (unsigned)off;
        lhs = add_node(n);
      } else if (accept('-')) {
        int rhs = parse_term();
        Expr::Node n{Expr::Kind::sub};
        n.a = lhs; n.b = rhs; n.offset = (unsigned)off;
        lhs = add_node(n);
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      skip_ws();
      std::size_t off = pos_;
      if (accept('*')) {
        int rhs = parse_unary();
        Expr::Node n{Expr::Kind::mul};
        n.a = lhs; n.b = rhs; n.offset = (unsigned)off;
        lhs = add_node(n);
      } else if (accept('/')) {
        int rhs = parse_unary();
        Expr::Node n{Expr::Kind::div};
        n.a = lhs; n.b = rhs; n.offset = (unsigned)off;
        lhs = add_node(n);
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    skip_ws();
    std::size_t off = pos_;
    if (accept('-')) {
      int a = parse_unary();
      Expr::Node n{Expr::Kind::neg};
      n.a = a; n.offset = (unsigned)off;
      return add_node(n);
    }
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    skip_ws();
    if (!accept('^')) return base;
    skip_ws();
    std::size_t off = pos_;
    bool negexp = false;
    if (accept('-')) negexp = true;
    skip_ws();
    std::size_t doff = pos_;
    if (pos_ >= s_.size() || !std::isdigit((unsigned char)s_[pos_]))
      fail(pos_, "expected integer exponent");
    long v = 0;
    while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) {
      v = v * 10 + (s_[pos_] - '0');
      if (v > 999) fail(doff, "exponent too large");
      ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E'))
      fail(pos_, "exponent must be an integer");
    Expr::Node n{Expr::Kind::pow};
    n.a = base;
    n.ipow = negexp ? -(int)v : (int)v;
    n.offset = (unsigned)off;
    return add_node(n);
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail(pos_, "expected operand");
    std::size_t off = pos_;
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      if (!accept(')')) fail(pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit((unsigned char)c) || c == '.') return parse_number();
    if (std::isalpha((unsigned char)c) || c == '_') return parse_ident();
    fail(off, "expected operand");
  }

  int parse_number() {
    std::size_t off = pos_;
    std::size_t i = pos_;
    bool digits = false;
    while (i < s_.size() && std::isdigit((unsigned char)s_[i])) { ++i; digits = true; }
    if (i < s_.size() && s_[i] == '.') {
      ++i;
      while (i < s_.size() && std::isdigit((unsigned char)s_[i])) { ++i; digits = true; }
    }
    if (!digits) fail(off, "malformed number");
    if (i < s_.size() && (s_[i] == 'e' || s_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
      if (j < s_.size() && std::isdigit((unsigned char)s_[j])) {
        while (j < s_.size() && std::isdigit((unsigned char)s_[j])) ++j;
        i = j;
      }
    }
    std::string tok(s_.substr(off, i - off));
    pos_ = i;
    Expr::Node n{Expr::Kind::constant};
    n.cval = std::strtod(tok.c_str(), nullptr);
    n.offset = (unsigned)off;
    return add_node(n);
  }

  int parse_ident() {
    std::size_t off = pos_;
    std::size_t i = pos_;
    while (i < s_.size() &&
           (std::isalnum((unsigned char)s_[i]) || s_[i] == '_')) ++i;
    std::string name(s_.substr(off, i - off));
    pos_ = i;

    // variable: x<digits>
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      long idx = std::strtol(name.c_str() + 1, nullptr, 10);
      if (idx < 1 || idx > dim_)
        throw ParseError(ParseError::Kind::variable_range, off,
                         "variable " + name + " out of range for dim " +
                             std::to_string(dim_) + " at offset " +
                             std::to_string(off));
      Expr::Node n{Expr::Kind::variable};
      n.var = (int)idx - 1;
      n.offset = (unsigned)off;
      return add_node(n);
    }

    static const char* fnames[] = {"sin", "cos", "exp", "log", "sqrt"};
    for (int f = 0; f < 5; ++f) {
      if (name == fnames[f]) {
        if (!accept('(')) fail(pos_, "expected '(' after function name");
        int arg = parse_expr();
        if (!accept(')')) fail(pos_, "expected ')'");
        Expr::Node n{Expr::Kind::call};
        n.a = arg;
        n.func = (Expr::Func)f;
        n.offset = (unsigned)off;
        return add_node(n);
      }
    }
    fail(off, "unknown identifier '" + name + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int dim_;
  Expr& out_;
};

Expr Expr::parse(std::string_view text, int dim) {
  if (dim != 2 && dim != 3)
    throw ParseError(ParseError::Kind::syntax, 0, "dim must be 2 or 3");
  Expr e;
  e.dim_ = dim;
  e.source_ = std::string(text);
  Parser p(text, dim, e);
  p.run();
  return e;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

void Expr::domain_fail(int idx, const std::string& what) const {
  throw EvalDomainError(nodes_[idx].offset, print_node(idx),
                        what + " in subexpression '" + print_node(idx) +
                            "' at offset " + std::to_string(nodes_[idx].offset));
}

double Expr::eval(const double* x) const {
  thread_local std::vector<double> v;
  v.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case Kind::constant: v[i] = n.cval; break;
      case Kind::variable: v[i] = x[n.var]; break;
      case Kind::add: v[i] = v[n.a] + v[n.b]; break;
      case Kind::sub: v[i] = v[n.a] - v[n.b]; break;
      case Kind::mul: v[i] = v[n.a] * v[n.b]; break;
      case Kind::div:
        if (v[n.b] == 0.0) domain_fail((int)i, "division by zero");
        v[i] = v[n.a] / v[n.b];
        break;
      case Kind::neg: v[i] = -v[n.a]; break;
      case Kind::pow: {
        if (n.ipow < 0 && v[n.a] == 0.0)
          domain_fail((int)i, "zero raised to a negative power");
        double base = v[n.a];
        long k = n.ipow < 0 ? -(long)n.ipow : n.ipow;
        double acc = 1.0, b = base;
        while (k) {
          if (k & 1) acc *= b;
          b *= b;
          k >>= 1;
        }
        v[i] = n.ipow < 0 ? 1.0 / acc : acc;
        break;
      }
      case Kind::call: {
        double u = v[n.a];
        switch (n.func) {
          case Func::sin: v[i] = std::sin(u); break;
          case Func::cos: v[i] = std::cos(u); break;
          case Func::exp: v[i] = std::exp(u); break;
          case Func::log:
            if (u <= 0.0) domain_fail((int)i, "log of non-positive value");
            v[i] = std::log(u);
            break;
          case Func::sqrt:
            if (u < 0.0) domain_fail((int)i, "sqrt of negative value");
            v[i] = std::sqrt(u);
            break;
        }
        break;
      }
    }
  }
  return v.back();
}

Jet3 Expr::eval_jet(const double* x, int order) const {
  const TaylorTables& t = tables(dim_);
  const int nc = t.ncoef[order];
  thread_local std::vector<TV> v;
  v.resize(nodes_.size());

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    TV& r = v[i];
    switch (n.kind) {
      case Kind::constant:
        tv_zero(r, nc);
        r.c[0] = n.cval;
        break;
      case Kind::variable:
        tv_zero(r, nc);
        r.c[0] = x[n.var];
        if (order >= 1) r.c[1 + n.var] = 1.0;
        break;
      case Kind::add:
        for (int q = 0; q < nc; ++q) r.c[q] = v[n.a].c[q] + v[n.b].c[q];
        break;
      case Kind::sub:
        for (int q = 0; q < nc; ++q) r.c[q] = v[n.a].c[q] - v[n.b].c[q];
        break;
      case Kind::neg:
        for (int q = 0; q < nc; ++q) r.c[q] = -v[n.a].c[q];
        break;
      case Kind::mul: {
        TV tmp;
        tv_mul(t, order, v[n.a], v[n.b], tmp);
        r = tmp;
        break;
      }
      case Kind::div: {
        double u0 = v[n.b].c[0];
        if (u0 == 0.0) domain_fail((int)i, "division by zero");
        double f[4] = {1.0 / u0, -1.0 / (u0 * u0), 2.0 / (u0 * u0 * u0),
                       -6.0 / (u0 * u0 * u0 * u0)};
        TV rec, tmp;
        tv_compose(t, order, v[n.b], f, rec);
        tv_mul(t, order, v[n.a], rec, tmp);
        r = tmp;
        break;
      }
      case Kind::pow: {
        int k = n.ipow;
        TV base = v[n.a];
        if (k < 0) {
          double u0 = base.c[0];
          if (u0 == 0.0) domain_fail((int)i, "zero raised to a negative power");
          double f[4] = {1.0 / u0, -1.0 / (u0 * u0), 2.0 / (u0 * u0 * u0),
                         -6.0 / (u0 * u0 * u0 * u0)};
          TV rec;
          tv_compose(t, order, base, f, rec);
          base = rec;
          k = -k;
        }
        TV acc;
        tv_zero(acc, nc);
        acc.c[0] = 1.0;
        TV tmp;
        while (k) {
          if (k & 1) {
            tv_mul(t, order, acc, base, tmp);
            acc = tmp;
          }
          k >>= 1;
          if (k) {
            tv_mul(t, order, base, base, tmp);
            base = tmp;
          }
        }
        r = acc;
        break;
      }
      case Kind::call: {
        double u0 = v[n.a].c[0];
        double f[4] = {0, 0, 0, 0};
        switch (n.func) {
          case Func::sin:
            f[0] = std::sin(u0); f[1] = std::cos(u0);
            f[2] = -f[0]; f[3] = -f[1];
            break;
          case Func::cos:
            f[0] = std::cos(u0); f[1] = -std::sin(u0);
            f[2] = -f[0]; f[3] = -f[1];
            break;
          case Func::exp:
            f[0] = f[1] = f[2] = f[3] = std::exp(u0);
            break;
          case Func::log:
            if (u0 <= 0.0) domain_fail((int)i, "log of non-positive value");
            f[0] = std::log(u0); f[1] = 1.0 / u0;
            f[2] = -1.0 / (u0 * u0); f[3] = 2.0 / (u0 * u0 * u0);
            break;
          case Func::sqrt: {
            if (u0 < 0.0) domain_fail((int)i, "sqrt of negative value");
            if (u0 == 0.0 && order >= 1)
              domain_fail((int)i, "sqrt derivative at zero");
            double s = std::sqrt(u0);
            f[0] = s;
            if (order >= 1) f[1] = 0.5 / s;
            if (order >= 2) f[2] = -0.25 / (s * u0);
            if (order >= 3) f[3] = 0.375 / (s * u0 * u0);
            break;
          }
        }
        TV tmp;
        tv_compose(t, order, v[n.a], f, tmp);
        r = tmp;
        break;
      }
    }
  }

  // Unpack coefficients into derivatives: d^a f = coeff(a) * a!.
  const TV& root = v.back();
  Jet3 j;
  j.dim = dim_;
  j.order = order;
  j.value = root.c[0];
  for (int q = 1; q < nc; ++q) {
    const auto& a = t.midx[q];
    double d = root.c[q] * t.fact[q];
    int ids[3], cnt = 0;
    for (int dI = 0; dI < 3; ++dI)
      for (int rep = 0; rep < a[dI]; ++rep) ids[cnt++] = dI;
    if (cnt == 1) {
      j.grad[ids[0]] = d;
    } else if (cnt == 2) {
      j.hess[ids[0]][ids[1]] = d;
      j.hess[ids[1]][ids[0]] = d;
    } else if (cnt == 3) {
      int p[3] = {ids[0], ids[1], ids[2]};
      // mirror across all permutations
      j.third[p[0]][p[1]][p[2]] = d;
      j.third[p[0]][p[2]][p[1]] = d;
      j.third[p[1]][p[0]][p[2]] = d;
      j.third[p[1]][p[2]][p[0]] = d;
      j.third[p[2]][p[0]][p[1]] = d;
      j.third[p[2]][p[1]][p[0]] = d;
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

std::string Expr::print_node(int idx) const {
  const Node& n = nodes_[idx];
  char buf[40];
  switch (n.kind) {
    case Kind::constant:
      std::snprintf(buf, sizeof buf, "%.17g", n.cval);
      return buf;
    case Kind::variable:
      return "x" + std::to_string(n.var + 1);
    case Kind::add:
      return "(" + print_node(n.a) + " + " + print_node(n.b) + ")";
    case Kind::sub:
      return "(" + print_node(n.a) + " - " + print_node(n.b) + ")";
    case Kind::mul:
      return "(" + print_node(n.a) + " * " + print_node(n.b) + ")";
    case Kind::div:
      return "(" + print_node(n.a) + " / " + print_node(n.b) + ")";
    case Kind::neg:
      return "(-" + print_node(n.a) + ")";
    case Kind::pow:
      return "(" + print_node(n.a) + "^" + std::to_string(n.ipow) + ")";
    case Kind::call:
      return std::string(func_name((int)n.func)) + "(" + print_node(n.a) + ")";
  }
  return {};
}

std::string Expr::print() const {
  if (nodes_.empty()) return {};
  return print_node((int)nodes_.size() - 1);
}

} // namespace pmc
