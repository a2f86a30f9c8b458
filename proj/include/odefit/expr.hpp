#pragma once

// Expression DSL used for right-hand sides, inputs, initial conditions.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?            right associative
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// `pi` and `e` are built-in constants. See docs/dsl.md for the full grammar.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "odefit/dual.hpp"

namespace odefit {

/// Syntax or semantic error in an expression, carrying a character span.
class ExprError : public std::runtime_error {
 public:
  ExprError(const std::string& message, std::size_t begin, std::size_t end)
      : std::runtime_error(message + " at [" + std::to_string(begin) + ", " + std::to_string(end) + ")"),
        begin_(begin),
        end_(end) {}

  std::size_t begin() const noexcept { return begin_; }
  std::size_t end() const noexcept { return end_; }

 private:
  std::size_t begin_;
  std::size_t end_;
};

/// Evaluation referenced a symbol that the environment does not bind.
class UnboundSymbol : public std::runtime_error {
 public:
  explicit UnboundSymbol(const std::string& name)
      : std::runtime_error("unbound symbol: " + name), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

enum class UnaryOp { neg, abs, sign, exp, ln, log10, sqrt, sin, cos, tanh };
enum class BinaryOp { add, sub, mul, div, pow };
enum class CallOp { min, max };

class Expr;

namespace ast {
/// A literal. `label` is non-empty for the built-in constants `pi` and `e`.
struct Constant {
  double value;
  std::string label;
};
struct Symbol {
  std::string name;
};
struct Unary {
  UnaryOp op;
  std::shared_ptr<const struct Node> child;
};
struct Binary {
  BinaryOp op;
  std::shared_ptr<const struct Node> left;
  std::shared_ptr<const struct Node> right;
};
struct Call {
  CallOp op;
  std::vector<std::shared_ptr<const struct Node>> args;
};
struct Node {
  std::variant<Constant, Symbol, Unary, Binary, Call> data;
};
using NodePtr = std::shared_ptr<const Node>;
}  // namespace ast

/// Immutable expression tree with value semantics (nodes are shared).
class Expr {
 public:
  Expr() : node_(std::make_shared<const ast::Node>(ast::Node{ast::Constant{0.0, {}}})) {}
  explicit Expr(ast::NodePtr node) : node_(std::move(node)) {}

  static Expr constant(double v) { return Expr(make(ast::Constant{v, {}})); }
  static Expr symbol(std::string name) { return Expr(make(ast::Symbol{std::move(name)})); }
  static Expr unary(UnaryOp op, const Expr& child) { return Expr(make(ast::Unary{op, child.node_})); }
  static Expr binary(BinaryOp op, const Expr& l, const Expr& r) {
    return Expr(make(ast::Binary{op, l.node_, r.node_}));
  }
  static Expr call(CallOp op, const std::vector<Expr>& args) {
    std::vector<ast::NodePtr> nodes;
    for (const auto& a : args) nodes.push_back(a.node_);
    return Expr(make(ast::Call{op, std::move(nodes)}));
  }

  const ast::Node& node() const { return *node_; }
  const ast::NodePtr& ptr() const { return node_; }

  friend bool operator==(const Expr& a, const Expr& b) { return equal(*a.node_, *b.node_); }

 private:
  template <class T>
  static ast::NodePtr make(T&& v) {
    return std::make_shared<const ast::Node>(ast::Node{std::forward<T>(v)});
  }

  static bool equal(const ast::Node& a, const ast::Node& b) {
    if (a.data.index() != b.data.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
          using T = std::decay_t<decltype(x)>;
          const auto& y = std::get<T>(b.data);
          if constexpr (std::is_same_v<T, ast::Constant>) {
            return x.label == y.label && (x.value == y.value || (std::isnan(x.value) && std::isnan(y.value)));
          } else if constexpr (std::is_same_v<T, ast::Symbol>) {
            return x.name == y.name;
          } else if constexpr (std::is_same_v<T, ast::Unary>) {
            return x.op == y.op && equal(*x.child, *y.child);
          } else if constexpr (std::is_same_v<T, ast::Binary>) {
            return x.op == y.op && equal(*x.left, *y.left) && equal(*x.right, *y.right);
          } else {
            if (x.op != y.op || x.args.size() != y.args.size()) return false;
            for (std::size_t i = 0; i < x.args.size(); ++i)
              if (!equal(*x.args[i], *y.args[i])) return false;
            return true;
          }
        },
        a.data);
  }

  ast::NodePtr node_;
};

inline constexpr std::string_view unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::neg: return "-";
    case UnaryOp::abs: return "abs";
    case UnaryOp::sign: return "sign";
    case UnaryOp::exp: return "exp";
    case UnaryOp::ln: return "ln";
    case UnaryOp::log10: return "log10";
    case UnaryOp::sqrt: return "sqrt";
    case UnaryOp::sin: return "sin";
    case UnaryOp::cos: return "cos";
    case UnaryOp::tanh: return "tanh";
  }
  return "?";
}

/// Names that cannot be used as user identifiers.
inline bool is_reserved_name(std::string_view name) {
  static const std::set<std::string_view> reserved{"t",   "pi",   "e",    "abs", "sign", "exp",
                                                   "ln",  "log10", "sqrt", "sin", "cos",  "tanh",
                                                   "min", "max"};
  return reserved.count(name) > 0;
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ExprError("empty expression", 0, text_.size());
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < text_.size()) throw ExprError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_, pos_ + 1);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      const std::size_t end = std::min(pos_ + 1, text_.size());
      throw ExprError(std::string("expected '") + c + "'", pos_, end);
    }
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) lhs = Expr::binary(BinaryOp::add, lhs, parse_product());
      else if (accept('-')) lhs = Expr::binary(BinaryOp::sub, lhs, parse_product());
      else return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = Expr::binary(BinaryOp::mul, lhs, parse_unary());
      else if (accept('/')) lhs = Expr::binary(BinaryOp::div, lhs, parse_unary());
      else return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::unary(UnaryOp::neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(BinaryOp::pow, base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ExprError("unexpected end of expression", pos_, pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    throw ExprError("unexpected character '" + std::string(1, c) + "'", pos_, pos_ + 1);
  }

  Expr parse_number() {
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        throw ExprError("malformed exponent in number", begin, look);
      }
    }
    double value = 0.0;
    const auto* first = text_.data() + begin;
    const auto* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ExprError("malformed number", begin, pos_);
    return Expr::constant(value);
  }

  Expr parse_name() {
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string name(text_.substr(begin, pos_ - begin));
    const std::size_t end = pos_;

    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      std::vector<Expr> args{parse_sum()};
      while (accept(',')) args.push_back(parse_sum());
      expect(')');
      return make_call(name, std::move(args), begin, end);
    }
    if (name == "pi") return Expr(std::make_shared<const ast::Node>(ast::Node{ast::Constant{std::numbers::pi, "pi"}}));
    if (name == "e") return Expr(std::make_shared<const ast::Node>(ast::Node{ast::Constant{std::numbers::e, "e"}}));
    return Expr::symbol(name);
  }

  static Expr make_call(const std::string& name, std::vector<Expr> args, std::size_t begin, std::size_t end) {
    static const std::map<std::string, UnaryOp, std::less<>> unary{
        {"abs", UnaryOp::abs}, {"sign", UnaryOp::sign}, {"exp", UnaryOp::exp},
        {"ln", UnaryOp::ln},   {"log10", UnaryOp::log10}, {"sqrt", UnaryOp::sqrt},
        {"sin", UnaryOp::sin}, {"cos", UnaryOp::cos},   {"tanh", UnaryOp::tanh}};
    if (auto it = unary.find(name); it != unary.end()) {
      if (args.size() != 1) throw ExprError(name + " takes exactly one argument", begin, end);
      return Expr::unary(it->second, args.front());
    }
    if (name == "min" || name == "max") {
      if (args.size() < 2) throw ExprError(name + " takes at least two arguments", begin, end);
      return Expr::call(name == "min" ? CallOp::min : CallOp::max, args);
    }
    throw ExprError("unknown function '" + name + "'", begin, end);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses DSL text into an expression tree. Throws ExprError.
inline Expr parse_expr(std::string_view text) { return detail::Parser(text).parse(); }

inline void collect_symbols(const ast::Node& n, std::set<std::string>& out) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ast::Symbol>) out.insert(x.name);
        else if constexpr (std::is_same_v<T, ast::Unary>) collect_symbols(*x.child, out);
        else if constexpr (std::is_same_v<T, ast::Binary>) {
          collect_symbols(*x.left, out);
          collect_symbols(*x.right, out);
        } else if constexpr (std::is_same_v<T, ast::Call>) {
          for (const auto& a : x.args) collect_symbols(*a, out);
        }
      },
      n.data);
}

inline std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e.node(), out);
  return out;
}

namespace detail {

template <class T>
T apply_unary(UnaryOp op, const T& x) {
  switch (op) {
    case UnaryOp::neg: return -x;
    case UnaryOp::abs: return math::abs(x);
    case UnaryOp::sign: return math::sign(x);
    case UnaryOp::exp: return math::exp(x);
    case UnaryOp::ln: return math::ln(x);
    case UnaryOp::log10: return math::log10(x);
    case UnaryOp::sqrt: return math::sqrt(x);
    case UnaryOp::sin: return math::sin(x);
    case UnaryOp::cos: return math::cos(x);
    case UnaryOp::tanh: return math::tanh(x);
  }
  return x;
}

template <class T>
T apply_binary(BinaryOp op, const T& a, const T& b) {
  switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::div: return a / b;
    case BinaryOp::pow: return math::pow(a, b);
  }
  return a;
}

inline double scalar_of(double x) { return x; }
inline double scalar_of(const Dual& x) { return x.value; }

// min/max select an argument (first wins ties) and return it whole, so the
// derivative is that of the selected argument. NaN in any argument wins.
template <class T>
T apply_select(CallOp op, std::span<const T> args) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const double v = scalar_of(args[i]);
    if (std::isnan(v)) return args[i];
    if (i == 0) continue;
    const double b = scalar_of(args[best]);
    if (op == CallOp::min ? v < b : v > b) best = i;
  }
  return args[best];
}

template <class T, class Lookup>
T evaluate_tree(const ast::Node& n, const Lookup& lookup) {
  return std::visit(
      [&](const auto& x) -> T {
        using N = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<N, ast::Constant>) return T(x.value);
        else if constexpr (std::is_same_v<N, ast::Symbol>) return lookup(x.name);
        else if constexpr (std::is_same_v<N, ast::Unary>) return apply_unary(x.op, evaluate_tree<T>(*x.child, lookup));
        else if constexpr (std::is_same_v<N, ast::Binary>) {
          const T a = evaluate_tree<T>(*x.left, lookup);
          const T b = evaluate_tree<T>(*x.right, lookup);
          return apply_binary(x.op, a, b);
        } else {
          std::vector<T> vals;
          vals.reserve(x.args.size());
          for (const auto& a : x.args) vals.push_back(evaluate_tree<T>(*a, lookup));
          return apply_select<T>(x.op, vals);
        }
      },
      n.data);
}

}  // namespace detail

using Environment = std::map<std::string, double, std::less<>>;

/// IEEE double evaluation. Domain errors propagate as inf/NaN; throws
/// UnboundSymbol when a symbol is missing from `env`.
inline double eval(const Expr& e, const Environment& env) {
  return detail::evaluate_tree<double>(e.node(), [&](const std::string& name) {
    auto it = env.find(name);
    if (it == env.end()) throw UnboundSymbol(name);
    return it->second;
  });
}

/// Directional derivative along `seed` (symbols absent from seed have zero
/// seed component). The value is bit-identical to eval().
inline Dual eval_dual(const Expr& e, const Environment& env, const Environment& seed) {
  return detail::evaluate_tree<Dual>(e.node(), [&](const std::string& name) {
    auto it = env.find(name);
    if (it == env.end()) throw UnboundSymbol(name);
    auto s = seed.find(name);
    return Dual(it->second, s == seed.end() ? 0.0 : s->second);
  });
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Precedence levels for the printer: sum 1, product 2, negation 3, power 4,
// atoms 5.
inline std::pair<std::string, int> print_node(const ast::Node& n) {
  return std::visit(
      [](const auto& x) -> std::pair<std::string, int> {
        using N = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<N, ast::Constant>) {
          if (!x.label.empty()) return {x.label, 5};
          if (x.value < 0.0 || std::signbit(x.value)) return {"(" + format_number(x.value) + ")", 5};
          return {format_number(x.value), 5};
        } else if constexpr (std::is_same_v<N, ast::Symbol>) {
          return {x.name, 5};
        } else if constexpr (std::is_same_v<N, ast::Unary>) {
          auto [child, level] = print_node(*x.child);
          if (x.op == UnaryOp::neg) return {"-" + (level < 3 ? "(" + child + ")" : child), 3};
          return {std::string(unary_name(x.op)) + "(" + child + ")", 5};
        } else if constexpr (std::is_same_v<N, ast::Binary>) {
          auto [l, ll] = print_node(*x.left);
          auto [r, rl] = print_node(*x.right);
          auto wrap = [](const std::string& s) { return "(" + s + ")"; };
          switch (x.op) {
            case BinaryOp::add:
            case BinaryOp::sub:
              return {(ll < 1 ? wrap(l) : l) + (x.op == BinaryOp::add ? " + " : " - ") + (rl <= 1 ? wrap(r) : r), 1};
            case BinaryOp::mul:
            case BinaryOp::div:
              return {(ll < 2 ? wrap(l) : l) + (x.op == BinaryOp::mul ? "*" : "/") + (rl <= 2 ? wrap(r) : r), 2};
            case BinaryOp::pow:
              return {(ll <= 4 ? wrap(l) : l) + "^" + (rl < 3 ? wrap(r) : r), 4};
          }
          return {"", 5};
        } else {
          std::string s = x.op == CallOp::min ? "min(" : "max(";
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (i) s += ", ";
            s += print_node(*x.args[i]).first;
          }
          return {s + ")", 5};
        }
      },
      n.data);
}

}  // namespace detail

/// Canonical text form; parse_expr(to_string(e)) == e for parsed trees.
inline std::string to_string(const Expr& e) { return detail::print_node(e.node()).first; }

/// Replaces symbols found in `values` by constants and folds every subtree
/// whose leaves are all constants. Folding uses the same operations as
/// evaluation, so folded results are bit-identical.
inline Expr fold_constants(const Expr& e, const Environment& values) {
  struct Folder {
    const Environment& values;
    ast::NodePtr run(const ast::NodePtr& p) const {
      return std::visit(
          [&](const auto& x) -> ast::NodePtr {
            using N = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<N, ast::Constant>) {
              return p;
            } else if constexpr (std::is_same_v<N, ast::Symbol>) {
              auto it = values.find(x.name);
              if (it == values.end()) return p;
              return Expr::constant(it->second).ptr();
            } else if constexpr (std::is_same_v<N, ast::Unary>) {
              auto c = run(x.child);
              if (auto* k = std::get_if<ast::Constant>(&c->data)) return Expr::constant(detail::apply_unary(x.op, k->value)).ptr();
              return Expr(std::make_shared<const ast::Node>(ast::Node{ast::Unary{x.op, c}})).ptr();
            } else if constexpr (std::is_same_v<N, ast::Binary>) {
              auto l = run(x.left);
              auto r = run(x.right);
              auto* kl = std::get_if<ast::Constant>(&l->data);
              auto* kr = std::get_if<ast::Constant>(&r->data);
              if (kl && kr) return Expr::constant(detail::apply_binary(x.op, kl->value, kr->value)).ptr();
              return std::make_shared<const ast::Node>(ast::Node{ast::Binary{x.op, l, r}});
            } else {
              std::vector<ast::NodePtr> args;
              bool all_const = true;
              for (const auto& a : x.args) {
                args.push_back(run(a));
                all_const = all_const && std::holds_alternative<ast::Constant>(args.back()->data);
              }
              if (all_const) {
                std::vector<double> vals;
                for (const auto& a : args) vals.push_back(std::get<ast::Constant>(a->data).value);
                return Expr::constant(detail::apply_select<double>(x.op, vals)).ptr();
              }
              return std::make_shared<const ast::Node>(ast::Node{ast::Call{x.op, std::move(args)}});
            }
          },
          p->data);
    }
  };
  return Expr(Folder{values}.run(e.ptr()));
}

/// Expression compiled to postfix code over numbered slots. Evaluation is
/// allocation free given a caller-owned stack.
class Program {
 public:
  enum class Code : unsigned char { constant, slot, unary, binary, call };
  struct Instr {
    Code code;
    unsigned char op;
    std::uint32_t index;  // slot index, or argument count for calls
    double value;
  };

  Program() = default;

  /// Compiles `e`; `slot_of` maps every free symbol to a slot index.
  static Program compile(const Expr& e, const std::function<std::uint32_t(const std::string&)>& slot_of) {
    Program p;
    int depth = 0;
    p.emit(e.node(), slot_of, depth);
    return p;
  }

  std::size_t max_depth() const { return max_depth_; }
  std::span<const Instr> code() const { return code_; }

  template <class T>
  T evaluate(std::span<const T> slots, std::vector<T>& stack) const {
    if (stack.size() < max_depth_) stack.resize(max_depth_);
    std::size_t sp = 0;
    for (const Instr& in : code_) {
      switch (in.code) {
        case Code::constant: stack[sp++] = T(in.value); break;
        case Code::slot: stack[sp++] = slots[in.index]; break;
        case Code::unary: stack[sp - 1] = detail::apply_unary(static_cast<UnaryOp>(in.op), stack[sp - 1]); break;
        case Code::binary:
          stack[sp - 2] = detail::apply_binary(static_cast<BinaryOp>(in.op), stack[sp - 2], stack[sp - 1]);
          --sp;
          break;
        case Code::call: {
          const std::size_t n = in.index;
          stack[sp - n] = detail::apply_select<T>(static_cast<CallOp>(in.op), std::span<const T>(stack.data() + sp - n, n));
          sp -= n - 1;
          break;
        }
      }
    }
    return stack[0];
  }

 private:
  void emit(const ast::Node& n, const std::function<std::uint32_t(const std::string&)>& slot_of, int& depth) {
    std::visit(
        [&](const auto& x) {
          using N = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<N, ast::Constant>) {
            code_.push_back({Code::constant, 0, 0, x.value});
            bump(depth, 1);
          } else if constexpr (std::is_same_v<N, ast::Symbol>) {
            code_.push_back({Code::slot, 0, slot_of(x.name), 0.0});
            bump(depth, 1);
          } else if constexpr (std::is_same_v<N, ast::Unary>) {
            emit(*x.child, slot_of, depth);
            code_.push_back({Code::unary, static_cast<unsigned char>(x.op), 0, 0.0});
          } else if constexpr (std::is_same_v<N, ast::Binary>) {
            emit(*x.left, slot_of, depth);
            emit(*x.right, slot_of, depth);
            code_.push_back({Code::binary, static_cast<unsigned char>(x.op), 0, 0.0});
            bump(depth, -1);
          } else {
            for (const auto& a : x.args) emit(*a, slot_of, depth);
            code_.push_back({Code::call, static_cast<unsigned char>(x.op), static_cast<std::uint32_t>(x.args.size()), 0.0});
            bump(depth, 1 - static_cast<int>(x.args.size()));
          }
        },
        n.data);
  }

  void bump(int& depth, int delta) {
    depth += delta;
    max_depth_ = std::max<std::size_t>(max_depth_, static_cast<std::size_t>(depth));
  }

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

}  // namespace odefit
