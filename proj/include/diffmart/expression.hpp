#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include "diffmart/errors.hpp"

namespace diffmart {

// Arithmetic expressions in one variable `x`, used for user-supplied drift
// and volatility coefficients. Operators + - * / ^ (right-associative ^),
// functions exp, log, sqrt, pow(a, b). Parsed once into a small tree.
class Expression {
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    struct Node {
        enum class Op { constant, variable, add, sub, mul, div, pow, neg, fexp, flog, fsqrt } op;
        double value = 0.0;
        NodePtr lhs, rhs;
    };

  public:
    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        NodePtr root = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size())
            throw ConfigError("expression: unexpected trailing input at position " +
                              std::to_string(p.pos) + " in \"" + text + "\"");
        return Expression(std::move(root), text);
    }

    double operator()(double x) const { return eval(*root_, x); }

    const std::string& text() const { return text_; }

  private:
    Expression(NodePtr root, std::string text)
        : root_(std::move(root)), text_(std::move(text)) {}

    static double eval(const Node& n, double x) {
        using Op = Node::Op;
        switch (n.op) {
            case Op::constant: return n.value;
            case Op::variable: return x;
            case Op::add: return eval(*n.lhs, x) + eval(*n.rhs, x);
            case Op::sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
            case Op::mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
            case Op::div: return eval(*n.lhs, x) / eval(*n.rhs, x);
            case Op::pow: return std::pow(eval(*n.lhs, x), eval(*n.rhs, x));
            case Op::neg: return -eval(*n.lhs, x);
            case Op::fexp: return std::exp(eval(*n.lhs, x));
            case Op::flog: return std::log(eval(*n.lhs, x));
            case Op::fsqrt: return std::sqrt(eval(*n.lhs, x));
        }
        return 0.0;
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& why) const {
            throw ConfigError("expression: " + why + " at position " +
                              std::to_string(pos) + " in \"" + s + "\"");
        }

        void skip_ws() {
            while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
        }

        bool consume(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        static NodePtr make(Node::Op op, NodePtr l = nullptr, NodePtr r = nullptr,
                            double v = 0.0) {
            auto n = std::make_shared<Node>();
            n->op = op;
            n->value = v;
            n->lhs = std::move(l);
            n->rhs = std::move(r);
            return n;
        }

        NodePtr parse_expr() {
            NodePtr lhs = parse_term();
            for (;;) {
                if (consume('+'))
                    lhs = make(Node::Op::add, lhs, parse_term());
                else if (consume('-'))
                    lhs = make(Node::Op::sub, lhs, parse_term());
                else
                    return lhs;
            }
        }

        NodePtr parse_term() {
            NodePtr lhs = parse_unary();
            for (;;) {
                if (consume('*'))
                    lhs = make(Node::Op::mul, lhs, parse_unary());
                else if (consume('/'))
                    lhs = make(Node::Op::div, lhs, parse_unary());
                else
                    return lhs;
            }
        }

        NodePtr parse_unary() {
            if (consume('-')) return make(Node::Op::neg, parse_unary());
            if (consume('+')) return parse_unary();
            return parse_power();
        }

        NodePtr parse_power() {
            NodePtr base = parse_primary();
            // Right-associative: 2^3^2 is 2^(3^2). Exponent may carry a sign.
            if (consume('^')) return make(Node::Op::pow, base, parse_unary());
            return base;
        }

        NodePtr parse_primary() {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end of input");
            char c = s[pos];
            if (std::isdigit((unsigned char)c) || c == '.') {
                const char* start = s.c_str() + pos;
                char* end = nullptr;
                double v = std::strtod(start, &end);
                if (end == start) fail("malformed number");
                pos += (std::size_t)(end - start);
                return make(Node::Op::constant, nullptr, nullptr, v);
            }
            if (c == '(') {
                ++pos;
                NodePtr inner = parse_expr();
                if (!consume(')')) fail("expected ')'");
                return inner;
            }
            if (std::isalpha((unsigned char)c)) {
                std::size_t start = pos;
                while (pos < s.size() && std::isalnum((unsigned char)s[pos])) ++pos;
                std::string name = s.substr(start, pos - start);
                if (name == "x") return make(Node::Op::variable);
                if (name == "pow") {
                    if (!consume('(')) fail("expected '(' after pow");
                    NodePtr a = parse_expr();
                    if (!consume(',')) fail("pow requires two arguments");
                    NodePtr b = parse_expr();
                    if (!consume(')')) fail("expected ')'");
                    return make(Node::Op::pow, a, b);
                }
                Node::Op op;
                if (name == "exp")
                    op = Node::Op::fexp;
                else if (name == "log")
                    op = Node::Op::flog;
                else if (name == "sqrt")
                    op = Node::Op::fsqrt;
                else {
                    pos = start;
                    fail("unknown identifier \"" + name + "\"");
                }
                if (!consume('(')) fail("expected '(' after function name");
                NodePtr a = parse_expr();
                if (!consume(')')) fail("expected ')'");
                return make(op, a);
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    NodePtr root_;
    std::string text_;
};

} // namespace diffmart
