#pragma once

// Scalar expression trees over states x1..xn, disturbances d1..dl and a level s.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | var | func '(' expr ')' | '(' expr ')'
//   var     := 'x'<k> | 'd'<k> | 's'          (k is 1-based)
//   func    := sin | cos | exp | log | sqrt | tanh | abs

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lyapcert/errors.hpp"
#include "lyapcert/numeric.hpp"

namespace lyapcert {

namespace detail {

enum class ExprKind { Num, StateVar, DistVar, Level, Add, Sub, Mul, Div, Pow, Neg, Func };
enum class ExprFn { Sin, Cos, Exp, Log, Sqrt, Tanh, Abs };

struct ExprNode {
  ExprKind kind = ExprKind::Num;
  double value = 0.0;
  std::size_t index = 0;
  ExprFn fn = ExprFn::Sin;
  std::shared_ptr<const ExprNode> a, b;
};

using ExprPtr = std::shared_ptr<const ExprNode>;

inline double eval_node(const ExprNode& n, const double* x, const double* d, double s) {
  switch (n.kind) {
    case ExprKind::Num: return n.value;
    case ExprKind::StateVar: return x[n.index];
    case ExprKind::DistVar: return d[n.index];
    case ExprKind::Level: return s;
    case ExprKind::Add: return eval_node(*n.a, x, d, s) + eval_node(*n.b, x, d, s);
    case ExprKind::Sub: return eval_node(*n.a, x, d, s) - eval_node(*n.b, x, d, s);
    case ExprKind::Mul: return eval_node(*n.a, x, d, s) * eval_node(*n.b, x, d, s);
    case ExprKind::Div: return eval_node(*n.a, x, d, s) / eval_node(*n.b, x, d, s);
    case ExprKind::Neg: return -eval_node(*n.a, x, d, s);
    case ExprKind::Pow: {
      const double base = eval_node(*n.a, x, d, s);
      if (n.b->kind == ExprKind::Num) {
        const double e = n.b->value;
        if (e == 2.0) return base * base;
        if (e == 3.0) return base * base * base;
        return std::pow(base, e);
      }
      return std::pow(base, eval_node(*n.b, x, d, s));
    }
    case ExprKind::Func: {
      const double v = eval_node(*n.a, x, d, s);
      switch (n.fn) {
        case ExprFn::Sin: return std::sin(v);
        case ExprFn::Cos: return std::cos(v);
        case ExprFn::Exp: return std::exp(v);
        case ExprFn::Log: return std::log(v);
        case ExprFn::Sqrt: return std::sqrt(v);
        case ExprFn::Tanh: return std::tanh(v);
        case ExprFn::Abs: return std::abs(v);
      }
    }
  }
  return 0.0;
}

}  // namespace detail

class Expr {
 public:
  using Kind = detail::ExprKind;
  using Fn = detail::ExprFn;

  static constexpr int kNotPolynomial = std::numeric_limits<int>::max() / 4;

  Expr() : Expr(num(0.0)) {}

  /// Parses `text`; variable indices are checked against n_state and n_dist.
  [[nodiscard]] static Expr parse(std::string_view text, std::size_t n_state, std::size_t n_dist,
                                  bool allow_level = false) {
    Parser p{text, 0, n_state, n_dist, allow_level};
    Expr e = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    return e;
  }

  [[nodiscard]] static Expr num(double v) { return make(Kind::Num, v); }
  [[nodiscard]] static Expr state(std::size_t i) { return make(Kind::StateVar, 0.0, i); }
  [[nodiscard]] static Expr dist(std::size_t i) { return make(Kind::DistVar, 0.0, i); }
  [[nodiscard]] static Expr level() { return make(Kind::Level); }

  [[nodiscard]] double eval(const double* x, const double* d = nullptr, double s = 0.0) const {
    return detail::eval_node(*node_, x, d, s);
  }
  [[nodiscard]] double eval(const std::vector<double>& x, const std::vector<double>& d = {}, double s = 0.0) const {
    return eval(x.data(), d.empty() ? nullptr : d.data(), s);
  }

  /// Polynomial degree in the state (StateVar) or disturbance (DistVar) variables;
  /// kNotPolynomial when the expression is not a polynomial in them.
  [[nodiscard]] int degree(Kind which) const { return degree_of(*node_, which); }
  [[nodiscard]] bool polynomial_in_state() const { return degree(Kind::StateVar) < kNotPolynomial; }

  /// Symbolic partial derivative in x_i; valid for expressions polynomial in the state.
  [[nodiscard]] Expr diff_state(std::size_t i) const { return diff(node_, i); }

  [[nodiscard]] std::string to_string() const { return str(*node_); }
  [[nodiscard]] bool is_zero_constant() const { return node_->kind == Kind::Num && node_->value == 0.0; }
  [[nodiscard]] Kind kind() const { return node_->kind; }

 private:
  using Ptr = detail::ExprPtr;
  using Node = detail::ExprNode;

  explicit Expr(Ptr n) : node_(std::move(n)) {}

  static Expr make(Kind k, double v = 0.0, std::size_t idx = 0, Ptr a = nullptr, Ptr b = nullptr,
                   Fn fn = Fn::Sin) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = v;
    n->index = idx;
    n->a = std::move(a);
    n->b = std::move(b);
    n->fn = fn;
    return Expr(Ptr(std::move(n)));
  }
  static bool is_num(const Ptr& p, double v) { return p->kind == Kind::Num && p->value == v; }

  static Expr add(const Expr& a, const Expr& b) {
    if (is_num(a.node_, 0.0)) return b;
    if (is_num(b.node_, 0.0)) return a;
    if (a.kind() == Kind::Num && b.kind() == Kind::Num) return num(a.node_->value + b.node_->value);
    return make(Kind::Add, 0, 0, a.node_, b.node_);
  }
  static Expr sub(const Expr& a, const Expr& b) {
    if (is_num(b.node_, 0.0)) return a;
    if (a.kind() == Kind::Num && b.kind() == Kind::Num) return num(a.node_->value - b.node_->value);
    if (is_num(a.node_, 0.0)) return neg(b);
    return make(Kind::Sub, 0, 0, a.node_, b.node_);
  }
  static Expr mul(const Expr& a, const Expr& b) {
    if (is_num(a.node_, 0.0) || is_num(b.node_, 0.0)) return num(0.0);
    if (is_num(a.node_, 1.0)) return b;
    if (is_num(b.node_, 1.0)) return a;
    if (a.kind() == Kind::Num && b.kind() == Kind::Num) return num(a.node_->value * b.node_->value);
    return make(Kind::Mul, 0, 0, a.node_, b.node_);
  }
  static Expr div(const Expr& a, const Expr& b) {
    if (is_num(a.node_, 0.0)) return num(0.0);
    if (is_num(b.node_, 1.0)) return a;
    return make(Kind::Div, 0, 0, a.node_, b.node_);
  }
  static Expr pow(const Expr& a, const Expr& b) {
    if (is_num(b.node_, 0.0)) return num(1.0);
    if (is_num(b.node_, 1.0)) return a;
    return make(Kind::Pow, 0, 0, a.node_, b.node_);
  }
  static Expr neg(const Expr& a) {
    if (a.kind() == Kind::Num) return num(-a.node_->value);
    return make(Kind::Neg, 0, 0, a.node_);
  }

  static int degree_of(const Node& n, Kind which) {
    switch (n.kind) {
      case Kind::Num:
      case Kind::Level: return 0;
      case Kind::StateVar:
      case Kind::DistVar: return n.kind == which ? 1 : 0;
      case Kind::Add:
      case Kind::Sub: return std::max(degree_of(*n.a, which), degree_of(*n.b, which));
      case Kind::Mul: return std::min(kNotPolynomial, degree_of(*n.a, which) + degree_of(*n.b, which));
      case Kind::Neg: return degree_of(*n.a, which);
      case Kind::Div: return degree_of(*n.b, which) == 0 ? degree_of(*n.a, which) : kNotPolynomial;
      case Kind::Pow: {
        const int db = degree_of(*n.a, which);
        if (degree_of(*n.b, which) != 0) return kNotPolynomial;
        if (db == 0) return 0;
        if (n.b->kind == Kind::Num) {
          const double e = n.b->value;
          if (e >= 0.0 && e == std::floor(e) && e < 64.0) return std::min(kNotPolynomial, db * static_cast<int>(e));
        }
        return kNotPolynomial;
      }
      case Kind::Func: return degree_of(*n.a, which) == 0 ? 0 : kNotPolynomial;
    }
    return kNotPolynomial;
  }

  static Expr diff(const Ptr& p, std::size_t i) {
    const Node& n = *p;
    const Expr a = n.a ? Expr(n.a) : Expr(p), b = n.b ? Expr(n.b) : Expr(p);
    switch (n.kind) {
      case Kind::Num:
      case Kind::DistVar:
      case Kind::Level: return num(0.0);
      case Kind::StateVar: return num(n.index == i ? 1.0 : 0.0);
      case Kind::Add: return add(diff(n.a, i), diff(n.b, i));
      case Kind::Sub: return sub(diff(n.a, i), diff(n.b, i));
      case Kind::Neg: return neg(diff(n.a, i));
      case Kind::Mul: return add(mul(diff(n.a, i), b), mul(a, diff(n.b, i)));
      case Kind::Div: return div(diff(n.a, i), b);
      case Kind::Pow: {
        if (degree_of(*n.a, Kind::StateVar) == 0) return num(0.0);
        const double e = n.b->value;
        return mul(mul(num(e), pow(a, num(e - 1.0))), diff(n.a, i));
      }
      case Kind::Func: return num(0.0);
    }
    return num(0.0);
  }

  static const char* fn_name(Fn f) {
    switch (f) {
      case Fn::Sin: return "sin";
      case Fn::Cos: return "cos";
      case Fn::Exp: return "exp";
      case Fn::Log: return "log";
      case Fn::Sqrt: return "sqrt";
      case Fn::Tanh: return "tanh";
      case Fn::Abs: return "abs";
    }
    return "?";
  }

  static std::string str(const Node& n) {
    switch (n.kind) {
      case Kind::Num: return n.value < 0 ? "(" + format_double(n.value) + ")" : format_double(n.value);
      case Kind::StateVar: return "x" + std::to_string(n.index + 1);
      case Kind::DistVar: return "d" + std::to_string(n.index + 1);
      case Kind::Level: return "s";
      case Kind::Add: return "(" + str(*n.a) + "+" + str(*n.b) + ")";
      case Kind::Sub: return "(" + str(*n.a) + "-" + str(*n.b) + ")";
      case Kind::Mul: return "(" + str(*n.a) + "*" + str(*n.b) + ")";
      case Kind::Div: return "(" + str(*n.a) + "/" + str(*n.b) + ")";
      case Kind::Pow: return "(" + str(*n.a) + "^" + str(*n.b) + ")";
      case Kind::Neg: return "(-" + str(*n.a) + ")";
      case Kind::Func: return std::string(fn_name(n.fn)) + "(" + str(*n.a) + ")";
    }
    return "?";
  }

  struct Parser {
    std::string_view text;
    std::size_t pos;
    std::size_t n_state, n_dist;
    bool allow_level;

    [[noreturn]] void fail(const std::string& what) const {
      throw ConfigError("expression '" + std::string(text) + "' column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    Expr expr() {
      Expr lhs = term();
      for (;;) {
        if (accept('+')) lhs = make(Kind::Add, 0, 0, lhs.node_, term().node_);
        else if (accept('-')) lhs = make(Kind::Sub, 0, 0, lhs.node_, term().node_);
        else return lhs;
      }
    }
    Expr term() {
      Expr lhs = unary();
      for (;;) {
        if (accept('*')) lhs = make(Kind::Mul, 0, 0, lhs.node_, unary().node_);
        else if (accept('/')) lhs = make(Kind::Div, 0, 0, lhs.node_, unary().node_);
        else return lhs;
      }
    }
    Expr unary() {
      if (accept('-')) return neg(unary());
      if (accept('+')) return unary();
      return power();
    }
    Expr power() {
      Expr base = primary();
      if (accept('^')) return make(Kind::Pow, 0, 0, base.node_, unary().node_);
      return base;
    }
    Expr primary() {
      skip();
      if (pos >= text.size()) fail("unexpected end of expression");
      const char c = text[pos];
      if (c == '(') {
        ++pos;
        Expr e = expr();
        if (!accept(')')) fail("missing ')'");
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        double v = 0.0;
        const auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (res.ec != std::errc()) fail("bad number");
        pos = static_cast<std::size_t>(res.ptr - text.data());
        return num(v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < text.size() && std::isalnum(static_cast<unsigned char>(text[pos]))) ++pos;
        const std::string_view id = text.substr(start, pos - start);
        static constexpr std::pair<std::string_view, Fn> fns[] = {
            {"sin", Fn::Sin}, {"cos", Fn::Cos}, {"exp", Fn::Exp},   {"log", Fn::Log},
            {"sqrt", Fn::Sqrt}, {"tanh", Fn::Tanh}, {"abs", Fn::Abs}};
        for (const auto& [name, f] : fns) {
          if (id == name) {
            if (!accept('(')) fail("expected '(' after " + std::string(name));
            Expr a = expr();
            if (!accept(')')) fail("missing ')'");
            return make(Kind::Func, 0, 0, a.node_, nullptr, f);
          }
        }
        if (id == "s") {
          if (!allow_level) {
            pos = start;
            fail("level variable s not allowed here");
          }
          return level();
        }
        if ((id[0] == 'x' || id[0] == 'd') && id.size() > 1) {
          std::size_t k = 0;
          const auto res = std::from_chars(id.data() + 1, id.data() + id.size(), k);
          if (res.ec == std::errc() && res.ptr == id.data() + id.size() && k >= 1) {
            const std::size_t limit = id[0] == 'x' ? n_state : n_dist;
            if (k > limit) {
              pos = start;
              fail("variable " + std::string(id) + " out of range");
            }
            return id[0] == 'x' ? state(k - 1) : dist(k - 1);
          }
        }
        pos = start;
        fail("unknown identifier '" + std::string(id) + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  Ptr node_;
};

/// Gradient of a state expression: symbolic when polynomial in x, else central
/// differences at relative step 1e-7.
class ExprGradient {
 public:
  ExprGradient(const Expr& e, std::size_t n) : expr_(e), n_(n), symbolic_(e.polynomial_in_state()) {
    if (symbolic_) {
      for (std::size_t i = 0; i < n; ++i) partials_.push_back(e.diff_state(i));
    }
  }

  [[nodiscard]] std::vector<double> operator()(const std::vector<double>& x) const {
    std::vector<double> g(n_);
    if (symbolic_) {
      for (std::size_t i = 0; i < n_; ++i) g[i] = partials_[i].eval(x);
      return g;
    }
    std::vector<double> xp(x);
    for (std::size_t i = 0; i < n_; ++i) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
      xp[i] = x[i] + h;
      const double fp = expr_.eval(xp);
      xp[i] = x[i] - h;
      const double fm = expr_.eval(xp);
      xp[i] = x[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  [[nodiscard]] bool symbolic() const noexcept { return symbolic_; }

 private:
  Expr expr_;
  std::size_t n_;
  bool symbolic_;
  std::vector<Expr> partials_;
};

}  // namespace lyapcert
