#include "cylheat/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include "cylheat/errors.hpp"

namespace cylheat {

struct Expression::Node {
    enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 } kind;
    double value = 0.0;
    int var = 0;
    double (*fn1)(double) = nullptr;
    double (*fn2)(double, double) = nullptr;
    std::shared_ptr<const Node> a, b;

    double eval(std::span<const double> x) const {
        switch (kind) {
            case Kind::Number: return value;
            case Kind::Var: return x[var];
            case Kind::Neg: return -a->eval(x);
            case Kind::Add: return a->eval(x) + b->eval(x);
            case Kind::Sub: return a->eval(x) - b->eval(x);
            case Kind::Mul: return a->eval(x) * b->eval(x);
            case Kind::Div: return a->eval(x) / b->eval(x);
            case Kind::Pow: return std::pow(a->eval(x), b->eval(x));
            case Kind::Call1: return fn1(a->eval(x));
            case Kind::Call2: return fn2(a->eval(x), b->eval(x));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

double f_sin(double v) { return std::sin(v); }
double f_cos(double v) { return std::cos(v); }
double f_tan(double v) { return std::tan(v); }
double f_exp(double v) { return std::exp(v); }
double f_log(double v) { return std::log(v); }
double f_sqrt(double v) { return std::sqrt(v); }
double f_abs(double v) { return std::abs(v); }
double f_tanh(double v) { return std::tanh(v); }
double f_atan(double v) { return std::atan(v); }
double f_min(double a, double b) { return std::min(a, b); }
double f_max(double a, double b) { return std::max(a, b); }
double f_pow(double a, double b) { return std::pow(a, b); }

class Parser {
public:
    Parser(const std::string& s, int dim, std::set<int>& vars) : s_(s), dim_(dim), vars_(vars) {}

    NodePtr parse() {
        auto n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression \"" + s_ + "\" at position " + std::to_string(pos_) + ": " + what);
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    static NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
        auto n = std::make_shared<Expression::Node>();
        n->kind = k;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (eat('+')) lhs = make(Kind::Add, lhs, term());
            else if (eat('-')) lhs = make(Kind::Sub, lhs, term());
            else return lhs;
        }
    }
    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (eat('*')) lhs = make(Kind::Mul, lhs, unary());
            else if (eat('/')) lhs = make(Kind::Div, lhs, unary());
            else return lhs;
        }
    }
    NodePtr unary() {
        if (eat('-')) return make(Kind::Neg, unary());
        if (eat('+')) return unary();
        return power();
    }
    NodePtr power() {
        auto base = primary();
        if (eat('^')) return make(Kind::Pow, base, unary());  // right associative
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto n = expr();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("bad number");
            }
            pos_ += used;
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::Number;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            return identifier(id);
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }
    NodePtr identifier(const std::string& id) {
        auto num = [](double v) {
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::Number;
            n->value = v;
            return n;
        };
        if (id == "pi") return num(std::numbers::pi);
        if (id == "e") return num(std::numbers::e);
        if (id.size() > 1 && id[0] == 'x' &&
            id.find_first_not_of("0123456789", 1) == std::string::npos) {
            const int k = std::stoi(id.substr(1));
            if (k < 1 || k > dim_) fail("coordinate " + id + " outside 1.." + std::to_string(dim_));
            vars_.insert(k - 1);
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::Var;
            n->var = k - 1;
            return n;
        }
        static const std::pair<const char*, double (*)(double)> one[] = {
            {"sin", f_sin}, {"cos", f_cos}, {"tan", f_tan},   {"exp", f_exp},  {"log", f_log},
            {"sqrt", f_sqrt}, {"abs", f_abs}, {"tanh", f_tanh}, {"atan", f_atan}};
        static const std::pair<const char*, double (*)(double, double)> two[] = {
            {"min", f_min}, {"max", f_max}, {"pow", f_pow}};
        for (const auto& [name, fn] : one) {
            if (id == name) {
                if (!eat('(')) fail("expected '(' after " + id);
                auto n = std::make_shared<Expression::Node>();
                n->kind = Kind::Call1;
                n->fn1 = fn;
                n->a = expr();
                if (!eat(')')) fail("missing ')' after argument of " + id);
                return n;
            }
        }
        for (const auto& [name, fn] : two) {
            if (id == name) {
                if (!eat('(')) fail("expected '(' after " + id);
                auto n = std::make_shared<Expression::Node>();
                n->kind = Kind::Call2;
                n->fn2 = fn;
                n->a = expr();
                if (!eat(',')) fail(id + " takes two arguments");
                n->b = expr();
                if (!eat(')')) fail("missing ')' after arguments of " + id);
                return n;
            }
        }
        fail("unknown identifier '" + id + "'");
    }

    const std::string& s_;
    int dim_;
    std::set<int>& vars_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, int dim) {
    Expression e;
    e.text_ = text;
    Parser p(e.text_, dim, e.vars_);
    e.root_ = p.parse();
    return e;
}

double Expression::evaluate(std::span<const double> x) const { return root_->eval(x); }

}  // namespace cylheat
