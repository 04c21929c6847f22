#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/jet.hpp"

namespace darboux {

enum class ExprOp {
  Number,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Pow,  // base in `a`; constant exponent folded at parse time
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Ln,
  Sqrt,
};

struct ExprNode {
  ExprOp op;
  std::size_t offset = 0;  // byte offset of the node's token in the source
  double number = 0;       // Number value, or the folded Pow exponent
  bool exp_is_int = false; // Pow: exponent is integral
  long long exp_int = 0;   // Pow: integral exponent
  int var = -1;            // Var: index into the variable list
  std::unique_ptr<const ExprNode> a, b;
};

namespace detail {

struct Token {
  enum Kind { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End } kind;
  std::size_t offset;
  double number = 0;
  std::string_view text{};
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::size_t at = pos_;
    if (pos_ >= src_.size()) {
      tok_ = {Token::End, at};
      return;
    }
    const char c = src_[pos_];
    auto one = [&](Token::Kind k) {
      ++pos_;
      tok_ = {k, at};
    };
    switch (c) {
      case '+': one(Token::Plus); return;
      case '-': one(Token::Minus); return;
      case '*': one(Token::Star); return;
      case '/': one(Token::Slash); return;
      case '^': one(Token::Caret); return;
      case '(': one(Token::LParen); return;
      case ')': one(Token::RParen); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) ++end;
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t e = end + 1;
        if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
        if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
          ++e;
          while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) ++e;
          end = e;
        }
      }
      double value = 0;
      const auto res = std::from_chars(src_.data() + pos_, src_.data() + end, value);
      if (res.ec != std::errc{} || res.ptr != src_.data() + end)
        throw ParseError("malformed number literal", at);
      pos_ = end;
      tok_ = {Token::Num, at, value};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
        ++end;
      tok_ = {Token::Ident, at, 0, src_.substr(pos_, end - pos_)};
      pos_ = end;
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", at);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_{Token::End, 0};
};

class Parser;

}  // namespace detail

// A parsed scalar expression over a fixed ordered list of variables.
// Immutable after construction; evaluation is const and thread-safe.
class Expression {
 public:
  static Expression parse(std::string_view src, std::vector<std::string> variables);

  // Plain value at a point (point.size() == variables().size()).
  double value(std::span<const double> point) const { return eval_value(*root_, point); }

  // Value, gradient and Hessian at a point.
  Jet2 jet2(std::span<const double> point) const { return eval_jet(*root_, point); }

  // Canonical text form: parse(str(), variables()) evaluates identically.
  std::string str() const {
    std::string out;
    print(*root_, out);
    return out;
  }

  const std::vector<std::string>& variables() const { return vars_; }
  const ExprNode& root() const { return *root_; }

 private:
  friend class detail::Parser;

  Expression(std::shared_ptr<const ExprNode> root, std::vector<std::string> vars)
      : root_(std::move(root)), vars_(std::move(vars)) {}

  static double eval_value(const ExprNode& n, std::span<const double> p);
  static Jet2 eval_jet(const ExprNode& n, std::span<const double> p);
  void print(const ExprNode& n, std::string& out) const;

  std::shared_ptr<const ExprNode> root_;
  std::vector<std::string> vars_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& vars) : lex_(src), vars_(vars) {}

  std::unique_ptr<const ExprNode> run() {
    auto n = parse_sum();
    if (lex_.peek().kind != Token::End)
      throw ParseError("unexpected trailing input", lex_.peek().offset);
    return n;
  }

 private:
  using NodePtr = std::unique_ptr<const ExprNode>;

  static NodePtr make(ExprOp op, std::size_t off, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_unique<ExprNode>();
    n->op = op;
    n->offset = off;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr parse_sum() {
    auto n = parse_product();
    while (lex_.peek().kind == Token::Plus || lex_.peek().kind == Token::Minus) {
      const Token t = lex_.take();
      n = make(t.kind == Token::Plus ? ExprOp::Add : ExprOp::Sub, t.offset, std::move(n),
               parse_product());
    }
    return n;
  }

  NodePtr parse_product() {
    auto n = parse_unary();
    while (lex_.peek().kind == Token::Star || lex_.peek().kind == Token::Slash) {
      const Token t = lex_.take();
      n = make(t.kind == Token::Star ? ExprOp::Mul : ExprOp::Div, t.offset, std::move(n),
               parse_unary());
    }
    return n;
  }

  NodePtr parse_unary() {
    if (lex_.peek().kind == Token::Minus) {
      const Token t = lex_.take();
      return make(ExprOp::Neg, t.offset, parse_unary());
    }
    return parse_power();
  }

  // '^' binds tighter than unary minus and associates left: a^b^c = (a^b)^c.
  NodePtr parse_power() {
    auto n = parse_atom();
    while (lex_.peek().kind == Token::Caret) {
      const Token t = lex_.take();
      auto e = parse_exponent();
      n = fold_pow(std::move(n), std::move(e), t.offset);
    }
    return n;
  }

  // The exponent of '^' may carry a leading minus: x^-2.
  NodePtr parse_exponent() {
    if (lex_.peek().kind == Token::Minus) {
      const Token t = lex_.take();
      return make(ExprOp::Neg, t.offset, parse_exponent());
    }
    return parse_atom();
  }

  NodePtr parse_atom() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Token::Num: {
        auto n = make(ExprOp::Number, t.offset);
        const_cast<ExprNode&>(*n).number = t.number;
        return n;
      }
      case Token::Ident: {
        if (lex_.peek().kind == Token::LParen) {
          lex_.take();
          auto arg = parse_sum();
          expect(Token::RParen, "expected ')'");
          return make(function_op(t), t.offset, std::move(arg));
        }
        if (t.text == "pi") {
          auto n = make(ExprOp::Number, t.offset);
          const_cast<ExprNode&>(*n).number = kPiLiteral;
          return n;
        }
        for (std::size_t i = 0; i < vars_.size(); ++i)
          if (vars_[i] == t.text) {
            auto n = make(ExprOp::Var, t.offset);
            const_cast<ExprNode&>(*n).var = static_cast<int>(i);
            return n;
          }
        throw ParseError("unknown identifier '" + std::string(t.text) + "'", t.offset);
      }
      case Token::LParen: {
        auto n = parse_sum();
        expect(Token::RParen, "expected ')'");
        return n;
      }
      default:
        throw ParseError("expected a number, name or '('", t.offset);
    }
  }

  static ExprOp function_op(const Token& t) {
    if (t.text == "sin") return ExprOp::Sin;
    if (t.text == "cos") return ExprOp::Cos;
    if (t.text == "tan") return ExprOp::Tan;
    if (t.text == "exp") return ExprOp::Exp;
    if (t.text == "ln") return ExprOp::Ln;
    if (t.text == "sqrt") return ExprOp::Sqrt;
    throw ParseError("unknown function '" + std::string(t.text) + "'", t.offset);
  }

  // Exponents must be constant; fold the subtree to a number now so the
  // evaluator can dispatch between integer and real powers.
  NodePtr fold_pow(NodePtr base, NodePtr exponent, std::size_t off) {
    require_constant(*exponent);
    const double e = fold_constant(*exponent);
    auto n = make(ExprOp::Pow, off, std::move(base));
    auto& m = const_cast<ExprNode&>(*n);
    m.number = e;
    m.exp_is_int = std::nearbyint(e) == e && std::abs(e) <= 1e9;
    m.exp_int = m.exp_is_int ? static_cast<long long>(e) : 0;
    return n;
  }

  static void require_constant(const ExprNode& n) {
    if (n.op == ExprOp::Var)
      throw ParseError("exponent must be a constant expression", n.offset);
    if (n.a) require_constant(*n.a);
    if (n.b) require_constant(*n.b);
  }

  static double fold_constant(const ExprNode& n);

  void expect(Token::Kind k, const char* msg) {
    const Token t = lex_.take();
    if (t.kind != k) throw ParseError(msg, t.offset);
  }

  static constexpr double kPiLiteral = 3.14159265358979323846;

  Lexer lex_;
  const std::vector<std::string>& vars_;
};

}  // namespace detail

inline Expression Expression::parse(std::string_view src, std::vector<std::string> variables) {
  if (variables.size() > kMaxJetVars)
    throw ParseError("at most " + std::to_string(kMaxJetVars) + " variables are supported", 0);
  for (std::size_t i = 0; i < variables.size(); ++i) {
    const std::string& name = variables[i];
    if (name == "pi" || name == "sin" || name == "cos" || name == "tan" || name == "exp" ||
        name == "ln" || name == "sqrt")
      throw ParseError("variable name '" + name + "' shadows a built-in", 0);
    for (std::size_t j = i + 1; j < variables.size(); ++j)
      if (variables[j] == name) throw ParseError("duplicate variable name '" + name + "'", 0);
  }
  detail::Parser parser(src, variables);
  std::shared_ptr<const ExprNode> root(parser.run());
  return Expression(std::move(root), std::move(variables));
}

inline double Expression::eval_value(const ExprNode& n, std::span<const double> p) {
  switch (n.op) {
    case ExprOp::Number: return n.number;
    case ExprOp::Var: return p[static_cast<std::size_t>(n.var)];
    case ExprOp::Add: return eval_value(*n.a, p) + eval_value(*n.b, p);
    case ExprOp::Sub: return eval_value(*n.a, p) - eval_value(*n.b, p);
    case ExprOp::Mul: return eval_value(*n.a, p) * eval_value(*n.b, p);
    case ExprOp::Div: {
      const double d = eval_value(*n.b, p);
      if (d == 0.0) throw EvalError("division by zero", n.offset);
      return eval_value(*n.a, p) / d;
    }
    case ExprOp::Pow: {
      const double base = eval_value(*n.a, p);
      if (n.exp_is_int) {
        if (base == 0.0 && n.exp_int < 0) throw EvalError("division by zero", n.offset);
        return std::pow(base, static_cast<double>(n.exp_int));
      }
      if (base <= 0.0)
        throw EvalError("non-integer power of a non-positive base", n.offset);
      return std::pow(base, n.number);
    }
    case ExprOp::Neg: return -eval_value(*n.a, p);
    case ExprOp::Sin: return std::sin(eval_value(*n.a, p));
    case ExprOp::Cos: return std::cos(eval_value(*n.a, p));
    case ExprOp::Tan: return std::tan(eval_value(*n.a, p));
    case ExprOp::Exp: return std::exp(eval_value(*n.a, p));
    case ExprOp::Ln: {
      const double a = eval_value(*n.a, p);
      if (a <= 0.0) throw EvalError("ln of a non-positive value", n.offset);
      return std::log(a);
    }
    case ExprOp::Sqrt: {
      const double a = eval_value(*n.a, p);
      if (a < 0.0) throw EvalError("sqrt of a negative value", n.offset);
      return std::sqrt(a);
    }
  }
  throw EvalError("corrupt expression node", n.offset);
}

inline Jet2 Expression::eval_jet(const ExprNode& n, std::span<const double> p) {
  const std::size_t nv = p.size();
  switch (n.op) {
    case ExprOp::Number: return Jet2::constant(n.number, nv);
    case ExprOp::Var: return Jet2::variable(p[static_cast<std::size_t>(n.var)],
                                            static_cast<std::size_t>(n.var), nv);
    case ExprOp::Add: return eval_jet(*n.a, p) + eval_jet(*n.b, p);
    case ExprOp::Sub: return eval_jet(*n.a, p) - eval_jet(*n.b, p);
    case ExprOp::Mul: return eval_jet(*n.a, p) * eval_jet(*n.b, p);
    case ExprOp::Div: {
      const Jet2 d = eval_jet(*n.b, p);
      if (d.value() == 0.0) throw EvalError("division by zero", n.offset);
      return eval_jet(*n.a, p) / d;
    }
    case ExprOp::Pow: {
      const Jet2 base = eval_jet(*n.a, p);
      if (n.exp_is_int) {
        if (base.value() == 0.0 && n.exp_int < 0) throw EvalError("division by zero", n.offset);
        return pow_int(base, n.exp_int);
      }
      if (base.value() <= 0.0)
        throw EvalError("non-integer power of a non-positive base", n.offset);
      return pow_real(base, n.number);
    }
    case ExprOp::Neg: return -eval_jet(*n.a, p);
    case ExprOp::Sin: return sin(eval_jet(*n.a, p));
    case ExprOp::Cos: return cos(eval_jet(*n.a, p));
    case ExprOp::Tan: return tan(eval_jet(*n.a, p));
    case ExprOp::Exp: return exp(eval_jet(*n.a, p));
    case ExprOp::Ln: {
      const Jet2 a = eval_jet(*n.a, p);
      if (a.value() <= 0.0) throw EvalError("ln of a non-positive value", n.offset);
      return log(a);
    }
    case ExprOp::Sqrt: {
      const Jet2 a = eval_jet(*n.a, p);
      if (a.value() < 0.0) throw EvalError("sqrt of a negative value", n.offset);
      return sqrt(a);
    }
  }
  throw EvalError("corrupt expression node", n.offset);
}

inline double detail::Parser::fold_constant(const ExprNode& n) {
  // Constant subtrees have no variables, so evaluation needs no point.
  try {
    return Expression::eval_value(n, {});
  } catch (const EvalError& e) {
    throw ParseError(std::string("exponent does not fold: ") + e.what(), n.offset);
  }
}

inline void Expression::print(const ExprNode& n, std::string& out) const {
  auto number = [&out](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
  };
  switch (n.op) {
    case ExprOp::Number:
      if (n.number < 0) {
        out += "(-";
        number(-n.number);
        out += ')';
      } else {
        number(n.number);
      }
      return;
    case ExprOp::Var: out += vars_[static_cast<std::size_t>(n.var)]; return;
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Mul:
    case ExprOp::Div: {
      out += '(';
      print(*n.a, out);
      out += n.op == ExprOp::Add ? '+' : n.op == ExprOp::Sub ? '-' : n.op == ExprOp::Mul ? '*' : '/';
      print(*n.b, out);
      out += ')';
      return;
    }
    case ExprOp::Pow: {
      out += '(';
      print(*n.a, out);
      out += '^';
      if (n.number < 0) {
        out += '-';
        number(-n.number);
      } else {
        number(n.number);
      }
      out += ')';
      return;
    }
    case ExprOp::Neg:
      out += "(-";
      print(*n.a, out);
      out += ')';
      return;
    case ExprOp::Sin: out += "sin("; break;
    case ExprOp::Cos: out += "cos("; break;
    case ExprOp::Tan: out += "tan("; break;
    case ExprOp::Exp: out += "exp("; break;
    case ExprOp::Ln: out += "ln("; break;
    case ExprOp::Sqrt: out += "sqrt("; break;
  }
  print(*n.a, out);
  out += ')';
}

}  // namespace darboux
