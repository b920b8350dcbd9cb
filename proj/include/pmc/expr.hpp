#pragma once

// Closed-form scalar fields on R^2 / R^3, parsed from a small expression
// grammar. Evaluation comes in two flavors: plain values, and truncated
// Taylor jets through third order propagated forward through the expression
// tree. Jets give exact derivatives (up to roundoff in the elementary
// operations), which the geometry layer relies on; there is no symbolic
// differentiation and no finite differencing here.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pmc {

class ParseError : public std::runtime_error {
 public:
  enum class Kind { syntax, variable_range };

  ParseError(Kind kind, std::size_t offset, const std::string& msg)
      : std::runtime_error(msg), kind_(kind), offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

class EvalDomainError : public std::runtime_error {
 public:
  EvalDomainError(std::size_t offset, std::string subexpr,
                  const std::string& msg)
      : std::runtime_error(msg), offset_(offset),
        subexpr_(std::move(subexpr)) {}

  std::size_t offset() const { return offset_; }
  const std::string& subexpr() const { return subexpr_; }

 private:
  std::size_t offset_;
  std::string subexpr_;
};

// Derivatives of a scalar field at one point, through the requested order.
// grad/hess/third are zero above the requested order; hess and third are
// stored fully (symmetric entries mirrored) so callers can index freely.
struct Jet3 {
  int dim = 0;
  int order = 0;
  double value = 0.0;
  std::array<double, 3> grad{};
  std::array<std::array<double, 3>, 3> hess{};
  double third[3][3][3] = {};

  bool has(int k) const { return k <= order; }
};

class Expr {
 public:
  Expr() = default;

  // Grammar: + - * / unary-minus, integer powers b^k (k may be negative),
  // calls sin cos exp log sqrt, variables x1..x<dim>, decimal literals,
  // parentheses. Throws ParseError with a byte offset on bad input.
  static Expr parse(std::string_view text, int dim);

  int dim() const { return dim_; }
  bool empty() const { return nodes_.empty(); }

  double eval(const double* x) const;
  double eval(const std::vector<double>& x) const { return eval(x.data()); }

  // Value and derivatives at x, order in {0,1,2,3}.
  Jet3 eval_jet(const double* x, int order) const;

  // Canonical fully parenthesized form; parse(print()) reproduces the
  // same tree.
  std::string print() const;

  const std::string& source() const { return source_; }

 private:
  friend class Parser;

  enum class Kind : unsigned char {
    constant, variable, add, sub, mul, div, neg, pow, call
  };
  enum class Func : unsigned char { sin, cos, exp, log, sqrt };

  struct Node {
    Kind kind;
    int a = -1;        // child indices into nodes_
    int b = -1;
    double cval = 0.0; // constant
    int var = 0;       // variable (0-based)
    int ipow = 0;      // pow
    Func func = Func::sin;
    unsigned offset = 0;  // byte offset in source text, for diagnostics
  };

  std::string print_node(int idx) const;
  [[noreturn]] void domain_fail(int idx, const std::string& what) const;

  std::vector<Node> nodes_;  // postorder: children precede parents
  int dim_ = 0;
  std::string source_;
};

} // namespace pmc
