#pragma once

#include <cctype>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ktune/config.hpp"
#include "ktune/errors.hpp"

namespace ktune {

/// A parsed constraint expression over the parameters of one space.
///
/// Grammar (C-style, integer semantics, no unary minus):
///
///   expr   := or
///   or     := and ( "||" and )*
///   and    := cmp ( "&&" cmp )*
///   cmp    := sum ( ("==" | "!=" | "<=" | ">=" | "<" | ">") sum )?
///   sum    := term ( ("+" | "-") term )*
///   term   := factor ( ("*" | "/" | "%") factor )*
///   factor := "!" factor | "(" expr ")" | integer | identifier
///
/// Comparisons and logical operators yield 0 or 1 and may be used as
/// arithmetic operands. "&&" and "||" short-circuit, so a guarded division
/// like `B != 0 && A % B == 0` never faults. Division and modulo truncate
/// toward zero; a zero right-hand side raises DivisionByZero carrying the
/// source text of the offending subexpression.
class ConstraintExpr {
  public:
    ConstraintExpr() = default;

    /// Parses `text` against the given parameter name list. Unknown
    /// identifiers raise UnknownParameter; malformed input raises SyntaxError
    /// with the 0-based offset of the first offending character.
    static ConstraintExpr parse(std::string text,
                                std::shared_ptr<const Configuration::Names> names) {
        if (!names) {
            names = std::make_shared<const Configuration::Names>();
        }
        ConstraintExpr expr;
        expr.text_ = std::move(text);
        expr.names_ = std::move(names);
        Parser parser(expr);
        expr.root_ = parser.run();
        return expr;
    }

    static ConstraintExpr parse(std::string text, Configuration::Names names) {
        return parse(std::move(text),
                     std::make_shared<const Configuration::Names>(std::move(names)));
    }

    /// Integer value of the expression for `config`.
    Value evaluate_value(const Configuration& config) const {
        if (nodes_.empty()) {
            throw Error("evaluating a default-constructed constraint");
        }
        const std::vector<Value>* fast = nullptr;
        if (config.names_ptr() == names_) {
            fast = &config.values();
        }
        return eval(root_, config, fast);
    }

    /// Boolean view: nonzero is satisfied.
    bool evaluate(const Configuration& config) const {
        return evaluate_value(config) != 0;
    }

    const std::string& text() const {
        return text_;
    }

    /// Names of the parameters the expression actually references.
    std::vector<std::string> referenced() const {
        std::vector<std::string> out;
        for (const Node& node: nodes_) {
            if (node.op == Op::param) {
                const std::string& name = (*names_)[node.param];
                bool seen = false;
                for (const std::string& existing: out) {
                    if (existing == name) {
                        seen = true;
                        break;
                    }
                }
                if (!seen) {
                    out.push_back(name);
                }
            }
        }
        return out;
    }

  private:
    enum class Op: uint8_t {
        literal, param, lnot,
        mul, div, mod, add, sub,
        lt, le, gt, ge, eq, ne,
        land, lor
    };

    struct Node {
        Op op;
        Value literal = 0;    // Op::literal
        uint32_t param = 0;   // Op::param: index into names_
        uint32_t lhs = 0;
        uint32_t rhs = 0;
        uint32_t begin = 0;   // source span [begin, end) for diagnostics
        uint32_t end = 0;
    };

    // -------------------------------------------------------------------
    // Lexer + recursive-descent parser
    // -------------------------------------------------------------------

    enum class Tok: uint8_t {
        integer, identifier, lparen, rparen,
        bang, star, slash, percent, plus, minus,
        lt, le, gt, ge, eq, ne, land, lor,
        end
    };

    struct Token {
        Tok kind;
        uint32_t begin;
        uint32_t end;
        Value number = 0;
    };

    class Parser {
      public:
        explicit Parser(ConstraintExpr& expr): expr_(expr) {
            tokenize();
        }

        uint32_t run() {
            uint32_t root = parse_or(0);
            if (peek().kind != Tok::end) {
                fail(peek().begin, "unexpected trailing input");
            }
            return root;
        }

      private:
        [[noreturn]] void fail(size_t offset, const std::string& what) const {
            throw SyntaxError(expr_.text_, offset, what);
        }

        void tokenize() {
            const std::string& s = expr_.text_;
            size_t i = 0;
            while (i < s.size()) {
                char c = s[i];
                if (std::isspace(static_cast<unsigned char>(c))) {
                    ++i;
                    continue;
                }
                uint32_t begin = static_cast<uint32_t>(i);
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    Value number = 0;
                    while (i < s.size()
                           && std::isdigit(static_cast<unsigned char>(s[i]))) {
                        int digit = s[i] - '0';
                        if (number > (kMaxValue - digit) / 10) {
                            fail(begin, "integer literal too large");
                        }
                        number = number * 10 + digit;
                        ++i;
                    }
                    push(Tok::integer, begin, i, number);
                    continue;
                }
                if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                    while (i < s.size()
                           && (std::isalnum(static_cast<unsigned char>(s[i]))
                               || s[i] == '_')) {
                        ++i;
                    }
                    push(Tok::identifier, begin, i);
                    continue;
                }
                switch (c) {
                    case '(': push(Tok::lparen, begin, ++i); continue;
                    case ')': push(Tok::rparen, begin, ++i); continue;
                    case '*': push(Tok::star, begin, ++i); continue;
                    case '/': push(Tok::slash, begin, ++i); continue;
                    case '%': push(Tok::percent, begin, ++i); continue;
                    case '+': push(Tok::plus, begin, ++i); continue;
                    case '-': push(Tok::minus, begin, ++i); continue;
                    case '!':
                        if (i + 1 < s.size() && s[i + 1] == '=') {
                            i += 2;
                            push(Tok::ne, begin, i);
                        } else {
                            push(Tok::bang, begin, ++i);
                        }
                        continue;
                    case '<':
                        if (i + 1 < s.size() && s[i + 1] == '=') {
                            i += 2;
                            push(Tok::le, begin, i);
                        } else {
                            push(Tok::lt, begin, ++i);
                        }
                        continue;
                    case '>':
                        if (i + 1 < s.size() && s[i + 1] == '=') {
                            i += 2;
                            push(Tok::ge, begin, i);
                        } else {
                            push(Tok::gt, begin, ++i);
                        }
                        continue;
                    case '=':
                        if (i + 1 < s.size() && s[i + 1] == '=') {
                            i += 2;
                            push(Tok::eq, begin, i);
                            continue;
                        }
                        fail(begin, "single '=' (use '==')");
                    case '&':
                        if (i + 1 < s.size() && s[i + 1] == '&') {
                            i += 2;
                            push(Tok::land, begin, i);
                            continue;
                        }
                        fail(begin, "single '&' (use '&&')");
                    case '|':
                        if (i + 1 < s.size() && s[i + 1] == '|') {
                            i += 2;
                            push(Tok::lor, begin, i);
                            continue;
                        }
                        fail(begin, "single '|' (use '||')");
                    default:
                        fail(begin, std::string("unexpected character '") + c
                                        + "'");
                }
            }
            push(Tok::end, static_cast<uint32_t>(s.size()),
                 static_cast<uint32_t>(s.size()));
        }

        void push(Tok kind, size_t begin, size_t end, Value number = 0) {
            tokens_.push_back(Token{kind, static_cast<uint32_t>(begin),
                                    static_cast<uint32_t>(end), number});
        }

        const Token& peek() const {
            return tokens_[pos_];
        }

        Token take() {
            return tokens_[pos_++];
        }

        bool accept(Tok kind) {
            if (tokens_[pos_].kind == kind) {
                ++pos_;
                return true;
            }
            return false;
        }

        uint32_t add_node(Node node) {
            expr_.nodes_.push_back(node);
            return static_cast<uint32_t>(expr_.nodes_.size() - 1);
        }

        uint32_t add_binary(Op op, uint32_t lhs, uint32_t rhs) {
            Node node;
            node.op = op;
            node.lhs = lhs;
            node.rhs = rhs;
            node.begin = expr_.nodes_[lhs].begin;
            node.end = expr_.nodes_[rhs].end;
            return add_node(node);
        }

        void check_depth(int depth) const {
            if (depth > kMaxDepth) {
                fail(peek().begin, "expression nested too deeply");
            }
        }

        uint32_t parse_or(int depth) {
            check_depth(depth);
            uint32_t lhs = parse_and(depth + 1);
            while (accept(Tok::lor)) {
                uint32_t rhs = parse_and(depth + 1);
                lhs = add_binary(Op::lor, lhs, rhs);
            }
            return lhs;
        }

        uint32_t parse_and(int depth) {
            uint32_t lhs = parse_cmp(depth + 1);
            while (accept(Tok::land)) {
                uint32_t rhs = parse_cmp(depth + 1);
                lhs = add_binary(Op::land, lhs, rhs);
            }
            return lhs;
        }

        uint32_t parse_cmp(int depth) {
            uint32_t lhs = parse_sum(depth + 1);
            Op op;
            switch (peek().kind) {
                case Tok::eq: op = Op::eq; break;
                case Tok::ne: op = Op::ne; break;
                case Tok::le: op = Op::le; break;
                case Tok::ge: op = Op::ge; break;
                case Tok::lt: op = Op::lt; break;
                case Tok::gt: op = Op::gt; break;
                default: return lhs;
            }
            take();
            uint32_t rhs = parse_sum(depth + 1);
            return add_binary(op, lhs, rhs);
        }

        uint32_t parse_sum(int depth) {
            uint32_t lhs = parse_term(depth + 1);
            while (true) {
                if (accept(Tok::plus)) {
                    lhs = add_binary(Op::add, lhs, parse_term(depth + 1));
                } else if (accept(Tok::minus)) {
                    lhs = add_binary(Op::sub, lhs, parse_term(depth + 1));
                } else {
                    return lhs;
                }
            }
        }

        uint32_t parse_term(int depth) {
            uint32_t lhs = parse_factor(depth + 1);
            while (true) {
                if (accept(Tok::star)) {
                    lhs = add_binary(Op::mul, lhs, parse_factor(depth + 1));
                } else if (accept(Tok::slash)) {
                    lhs = add_binary(Op::div, lhs, parse_factor(depth + 1));
                } else if (accept(Tok::percent)) {
                    lhs = add_binary(Op::mod, lhs, parse_factor(depth + 1));
                } else {
                    return lhs;
                }
            }
        }

        uint32_t parse_factor(int depth) {
            check_depth(depth);
            const Token& tok = peek();
            switch (tok.kind) {
                case Tok::bang: {
                    Token bang = take();
                    uint32_t operand = parse_factor(depth + 1);
                    Node node;
                    node.op = Op::lnot;
                    node.lhs = operand;
                    node.begin = bang.begin;
                    node.end = expr_.nodes_[operand].end;
                    return add_node(node);
                }
                case Tok::lparen: {
                    Token open = take();
                    uint32_t inner = parse_or(depth + 1);
                    if (!accept(Tok::rparen)) {
                        fail(peek().begin, "expected ')'");
                    }
                    // Widen the span so diagnostics quote the parentheses.
                    expr_.nodes_[inner].begin = open.begin;
                    expr_.nodes_[inner].end = tokens_[pos_ - 1].end;
                    return inner;
                }
                case Tok::integer: {
                    Token lit = take();
                    Node node;
                    node.op = Op::literal;
                    node.literal = lit.number;
                    node.begin = lit.begin;
                    node.end = lit.end;
                    return add_node(node);
                }
                case Tok::identifier: {
                    Token ident = take();
                    std::string name =
                        expr_.text_.substr(ident.begin, ident.end - ident.begin);
                    uint32_t index = 0;
                    bool found = false;
                    for (size_t i = 0; i < expr_.names_->size(); ++i) {
                        if ((*expr_.names_)[i] == name) {
                            index = static_cast<uint32_t>(i);
                            found = true;
                            break;
                        }
                    }
                    if (!found) {
                        throw UnknownParameter(name);
                    }
                    Node node;
                    node.op = Op::param;
                    node.param = index;
                    node.begin = ident.begin;
                    node.end = ident.end;
                    return add_node(node);
                }
                case Tok::end:
                    fail(tok.begin, "unexpected end of input");
                default:
                    fail(tok.begin, "expected a value, identifier, '!' or '('");
            }
        }

        static constexpr int kMaxDepth = 256;
        static constexpr Value kMaxValue =
            std::numeric_limits<Value>::max();

        ConstraintExpr& expr_;
        std::vector<Token> tokens_;
        size_t pos_ = 0;
    };

    // -------------------------------------------------------------------
    // Evaluation
    // -------------------------------------------------------------------

    Value eval(uint32_t index, const Configuration& config,
               const std::vector<Value>* fast) const {
        const Node& node = nodes_[index];
        switch (node.op) {
            case Op::literal:
                return node.literal;
            case Op::param:
                if (fast) {
                    return (*fast)[node.param];
                }
                return config.at((*names_)[node.param]);
            case Op::lnot:
                return eval(node.lhs, config, fast) == 0 ? 1 : 0;
            case Op::land:
                return (eval(node.lhs, config, fast) != 0
                        && eval(node.rhs, config, fast) != 0)
                           ? 1
                           : 0;
            case Op::lor:
                return (eval(node.lhs, config, fast) != 0
                        || eval(node.rhs, config, fast) != 0)
                           ? 1
                           : 0;
            default:
                break;
        }
        Value lhs = eval(node.lhs, config, fast);
        Value rhs = eval(node.rhs, config, fast);
        switch (node.op) {
            case Op::mul: return lhs * rhs;
            case Op::div:
                if (rhs == 0) {
                    throw DivisionByZero(span(node));
                }
                return lhs / rhs;
            case Op::mod:
                if (rhs == 0) {
                    throw DivisionByZero(span(node));
                }
                return lhs % rhs;
            case Op::add: return lhs + rhs;
            case Op::sub: return lhs - rhs;
            case Op::lt: return lhs < rhs ? 1 : 0;
            case Op::le: return lhs <= rhs ? 1 : 0;
            case Op::gt: return lhs > rhs ? 1 : 0;
            case Op::ge: return lhs >= rhs ? 1 : 0;
            case Op::eq: return lhs == rhs ? 1 : 0;
            case Op::ne: return lhs != rhs ? 1 : 0;
            default:
                throw Error("corrupt constraint node");
        }
    }

    std::string span(const Node& node) const {
        return text_.substr(node.begin, node.end - node.begin);
    }

    std::string text_;
    std::shared_ptr<const Configuration::Names> names_;
    std::vector<Node> nodes_;
    uint32_t root_ = 0;
};

}  // namespace ktune
