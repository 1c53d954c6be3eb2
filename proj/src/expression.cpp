#include "stabocp/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace stabocp {

Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.g + b.g, a.h + b.h}; }
Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.g - b.g, a.h - b.h}; }
Jet2 operator-(const Jet2& a) { return {-a.v, -a.g, -a.h}; }

Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.v * b.v, a.v * b.g + b.v * a.g,
          a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose()};
}

Jet2 chain(const Jet2& a, double f, double df, double d2f) {
  return {f, df * a.g, df * a.h + d2f * a.g * a.g.transpose()};
}

Jet2 operator/(const Jet2& a, const Jet2& b) {
  const double inv = 1.0 / b.v;
  return a * chain(b, inv, -inv * inv, 2 * inv * inv * inv);
}

struct Expression::Node {
  enum Kind { Const, X, Y, Add, Sub, Mul, Div, Pow, Neg, Func, Min, Max } kind = Const;
  double value = 0;
  std::string fn;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& s, const std::map<std::string, double>& c) : s_(s), consts_(c) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidInput("expression '" + s_ + "': " + msg + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (accept('+')) n = make(Node::Add, n, product());
      else if (accept('-')) n = make(Node::Sub, n, product());
      else return n;
    }
  }
  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Node::Mul, n, unary());
      else if (accept('/')) n = make(Node::Div, n, unary());
      else return n;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Node::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make(Node::Pow, base, unary());  // right associative
    return base;
  }
  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr n = sum();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      const double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      auto n = std::make_shared<Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (accept('(')) {
        NodePtr first = sum();
        if (name == "pow" || name == "min" || name == "max") {
          expect(',');
          NodePtr second = sum();
          expect(')');
          return make(name == "pow" ? Node::Pow : name == "min" ? Node::Min : Node::Max, first, second);
        }
        expect(')');
        static const char* known[] = {"sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "atan", "abs"};
        bool ok = false;
        for (const char* k : known) ok = ok || name == k;
        if (!ok) fail("unknown function '" + name + "'");
        auto n = std::make_shared<Node>();
        n->kind = Node::Func;
        n->fn = name;
        n->a = first;
        return n;
      }
      if (name == "x" || name == "x1") return make(Node::X);
      if (name == "y" || name == "x2") return make(Node::Y);
      auto n = std::make_shared<Node>();
      if (name == "pi") {
        n->value = std::numbers::pi;
        return n;
      }
      auto it = consts_.find(name);
      if (it == consts_.end()) fail("unknown symbol '" + name + "'");
      n->value = it->second;
      return n;
    }
    fail("unexpected character");
  }

  const std::string& s_;
  const std::map<std::string, double>& consts_;
  std::size_t pos_ = 0;
};

double eval(const Node& n, const Vec2& p) {
  switch (n.kind) {
    case Node::Const: return n.value;
    case Node::X: return p.x();
    case Node::Y: return p.y();
    case Node::Add: return eval(*n.a, p) + eval(*n.b, p);
    case Node::Sub: return eval(*n.a, p) - eval(*n.b, p);
    case Node::Mul: return eval(*n.a, p) * eval(*n.b, p);
    case Node::Div: return eval(*n.a, p) / eval(*n.b, p);
    case Node::Pow: return std::pow(eval(*n.a, p), eval(*n.b, p));
    case Node::Neg: return -eval(*n.a, p);
    case Node::Min: return std::min(eval(*n.a, p), eval(*n.b, p));
    case Node::Max: return std::max(eval(*n.a, p), eval(*n.b, p));
    case Node::Func: {
      const double a = eval(*n.a, p);
      const std::string& f = n.fn;
      if (f == "sin") return std::sin(a);
      if (f == "cos") return std::cos(a);
      if (f == "tan") return std::tan(a);
      if (f == "exp") return std::exp(a);
      if (f == "log") return std::log(a);
      if (f == "sqrt") return std::sqrt(a);
      if (f == "tanh") return std::tanh(a);
      if (f == "atan") return std::atan(a);
      return std::abs(a);
    }
  }
  return 0;
}

bool is_constant(const Node& n) {
  if (n.kind == Node::X || n.kind == Node::Y) return false;
  if (n.a && !is_constant(*n.a)) return false;
  if (n.b && !is_constant(*n.b)) return false;
  return true;
}

Jet2 jet(const Node& n, const Vec2& p) {
  switch (n.kind) {
    case Node::Const: return Jet2::constant(n.value);
    case Node::X: return Jet2::variable(p.x(), 0);
    case Node::Y: return Jet2::variable(p.y(), 1);
    case Node::Add: return jet(*n.a, p) + jet(*n.b, p);
    case Node::Sub: return jet(*n.a, p) - jet(*n.b, p);
    case Node::Mul: return jet(*n.a, p) * jet(*n.b, p);
    case Node::Div: return jet(*n.a, p) / jet(*n.b, p);
    case Node::Neg: return -jet(*n.a, p);
    case Node::Min: {
      Jet2 a = jet(*n.a, p), b = jet(*n.b, p);
      return a.v <= b.v ? a : b;
    }
    case Node::Max: {
      Jet2 a = jet(*n.a, p), b = jet(*n.b, p);
      return a.v >= b.v ? a : b;
    }
    case Node::Pow: {
      const Jet2 a = jet(*n.a, p);
      if (is_constant(*n.b)) {
        const double c = eval(*n.b, p);
        if (c == 0) return Jet2::constant(1);
        if (c == 1) return a;
        return chain(a, std::pow(a.v, c), c * std::pow(a.v, c - 1), c * (c - 1) * std::pow(a.v, c - 2));
      }
      const Jet2 b = jet(*n.b, p);
      const double la = std::log(a.v);
      const Jet2 lg = chain(a, la, 1 / a.v, -1 / (a.v * a.v));
      const Jet2 e = b * lg;
      const double ev = std::exp(e.v);
      return chain(e, ev, ev, ev);
    }
    case Node::Func: {
      const Jet2 a = jet(*n.a, p);
      const double x = a.v;
      const std::string& f = n.fn;
      if (f == "sin") return chain(a, std::sin(x), std::cos(x), -std::sin(x));
      if (f == "cos") return chain(a, std::cos(x), -std::sin(x), -std::cos(x));
      if (f == "tan") {
        const double t = std::tan(x), s = 1 + t * t;
        return chain(a, t, s, 2 * t * s);
      }
      if (f == "exp") {
        const double e = std::exp(x);
        return chain(a, e, e, e);
      }
      if (f == "log") return chain(a, std::log(x), 1 / x, -1 / (x * x));
      if (f == "sqrt") {
        const double r = std::sqrt(x);
        return chain(a, r, 0.5 / r, -0.25 / (r * x));
      }
      if (f == "tanh") {
        const double t = std::tanh(x), s = 1 - t * t;
        return chain(a, t, s, -2 * t * s);
      }
      if (f == "atan") return chain(a, std::atan(x), 1 / (1 + x * x), -2 * x / ((1 + x * x) * (1 + x * x)));
      return chain(a, std::abs(x), x < 0 ? -1.0 : 1.0, 0.0);
    }
  }
  return {};
}

}  // namespace

Expression::Expression(const std::string& text, const std::map<std::string, double>& constants)
    : text_(text), root_(Parser(text_, constants).parse()) {}

double Expression::operator()(const Vec2& p) const {
  if (!root_) throw InvalidInput("empty expression");
  return eval(*root_, p);
}

Jet2 Expression::jet(const Vec2& p) const {
  if (!root_) throw InvalidInput("empty expression");
  return stabocp::jet(*root_, p);
}

}  // namespace stabocp
