#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace k2gof {

struct ExprParseError : std::runtime_error {
  explicit ExprParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Small arithmetic expression for user-supplied densities.
/// Grammar: + - * / ^, exp(...), log(...), pow(a, b), numeric literals,
/// variables x1..xd (data coordinates) and b1..bp (parameters).
class Expr {
 public:
  /// vars layout at evaluation time: x1..xd then b1..bp.
  static Expr parse(const std::string& text, int d, int p) {
    Parser parser(text, d, p);
    Expr e;
    e.nodes_ = parser.run();
    e.root_ = static_cast<int>(e.nodes_.size()) - 1;
    return e;
  }

  double eval(const double* vars) const { return eval_node(root_, vars); }

  double eval(const std::vector<double>& vars) const { return eval(vars.data()); }

 private:
  enum class Op { kConst, kVar, kAdd, kSub, kMul, kDiv, kPow, kNeg, kExp, kLog };

  struct Node {
    Op op;
    double value = 0.0;  // kConst
    int slot = -1;       // kVar
    int lhs = -1, rhs = -1;
  };

  std::vector<Node> nodes_;
  int root_ = -1;

  double eval_node(int k, const double* vars) const {
    const Node& n = nodes_[k];
    switch (n.op) {
      case Op::kConst: return n.value;
      case Op::kVar: return vars[n.slot];
      case Op::kAdd: return eval_node(n.lhs, vars) + eval_node(n.rhs, vars);
      case Op::kSub: return eval_node(n.lhs, vars) - eval_node(n.rhs, vars);
      case Op::kMul: return eval_node(n.lhs, vars) * eval_node(n.rhs, vars);
      case Op::kDiv: return eval_node(n.lhs, vars) / eval_node(n.rhs, vars);
      case Op::kPow: return std::pow(eval_node(n.lhs, vars), eval_node(n.rhs, vars));
      case Op::kNeg: return -eval_node(n.lhs, vars);
      case Op::kExp: return std::exp(eval_node(n.lhs, vars));
      case Op::kLog: return std::log(eval_node(n.lhs, vars));
    }
    return 0.0;
  }

  class Parser {
   public:
    Parser(const std::string& text, int d, int p) : s_(text), d_(d), p_(p) {}

    std::vector<Node> run() {
      int root = parse_expr();
      skip_ws();
      if (pos_ != s_.size())
        fail("unexpected trailing input at position " + std::to_string(pos_));
      (void)root;
      return std::move(nodes_);
    }

   private:
    const std::string& s_;
    std::size_t pos_ = 0;
    int d_, p_;
    std::vector<Node> nodes_;

    [[noreturn]] void fail(const std::string& msg) { throw ExprParseError("expression: " + msg); }

    void skip_ws() {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == c) {
        ++pos_;
        return true;
      }
      return false;
    }

    char peek() {
      skip_ws();
      return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    int push(Node n) {
      nodes_.push_back(n);
      return static_cast<int>(nodes_.size()) - 1;
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (eat('+')) lhs = push({Op::kAdd, 0, -1, lhs, parse_term()});
        else if (eat('-')) lhs = push({Op::kSub, 0, -1, lhs, parse_term()});
        else return lhs;
      }
    }

    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        if (eat('*')) lhs = push({Op::kMul, 0, -1, lhs, parse_unary()});
        else if (eat('/')) lhs = push({Op::kDiv, 0, -1, lhs, parse_unary()});
        else return lhs;
      }
    }

    int parse_unary() {
      if (eat('-')) return push({Op::kNeg, 0, -1, parse_unary(), -1});
      return parse_power();
    }

    // '^' binds tighter than unary minus on its left and is right-associative.
    int parse_power() {
      int base = parse_primary();
      if (eat('^')) {
        int expo = eat('-') ? push({Op::kNeg, 0, -1, parse_power(), -1}) : parse_power();
        return push({Op::kPow, 0, -1, base, expo});
      }
      return base;
    }

    int parse_primary() {
      skip_ws();
      if (pos_ >= s_.size()) fail("unexpected end of input");
      char c = s_[pos_];
      if (c == '(') {
        ++pos_;
        int e = parse_expr();
        if (!eat(')')) fail("missing ')'");
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
      if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
      fail(std::string("unexpected character '") + c + "'");
    }

    int parse_number() {
      std::size_t end = pos_;
      while (end < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
              s_[end] == 'e' || s_[end] == 'E' ||
              ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
               (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
        ++end;
      double v;
      try {
        v = std::stod(s_.substr(pos_, end - pos_));
      } catch (const std::exception&) {
        fail("bad numeric literal at position " + std::to_string(pos_));
      }
      pos_ = end;
      Node n{Op::kConst, v, -1, -1, -1};
      return push(n);
    }

    int parse_ident() {
      std::size_t end = pos_;
      while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
        ++end;
      std::string name = s_.substr(pos_, end - pos_);
      pos_ = end;

      if (name == "exp" || name == "log") {
        if (!eat('(')) fail(name + " expects '('");
        int a = parse_expr();
        if (!eat(')')) fail("missing ')' after " + name);
        return push({name == "exp" ? Op::kExp : Op::kLog, 0, -1, a, -1});
      }
      if (name == "pow") {
        if (!eat('(')) fail("pow expects '('");
        int a = parse_expr();
        if (!eat(',')) fail("pow expects two arguments");
        int b = parse_expr();
        if (!eat(')')) fail("missing ')' after pow");
        return push({Op::kPow, 0, -1, a, b});
      }

      if ((name[0] == 'x' || name[0] == 'b') && name.size() > 1) {
        int idx = 0;
        for (std::size_t k = 1; k < name.size(); ++k) {
          if (!std::isdigit(static_cast<unsigned char>(name[k]))) idx = -1;
          if (idx >= 0) idx = idx * 10 + (name[k] - '0');
        }
        if (idx >= 1) {
          if (name[0] == 'x' && idx <= d_) {
            Node n{Op::kVar, 0, idx - 1, -1, -1};
            return push(n);
          }
          if (name[0] == 'b' && idx <= p_) {
            Node n{Op::kVar, 0, d_ + idx - 1, -1, -1};
            return push(n);
          }
        }
      }
      fail("unknown identifier '" + name + "'");
    }
  };
};

}  // namespace k2gof
