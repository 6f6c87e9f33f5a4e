#pragma once

#include <memory>
#include <set>
#include <span>
#include <string>

namespace cylheat {

// Small arithmetic language over coordinates x1..xd:
//   numbers, pi, e, + - * / ^, unary minus, parentheses,
//   sin cos tan exp log sqrt abs tanh atan (one argument), min max pow (two).
class Expression {
public:
    static Expression parse(const std::string& text, int dim);

    double evaluate(std::span<const double> x) const;
    // Zero-based indices of the coordinates the expression reads.
    const std::set<int>& variables() const { return vars_; }
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::set<int> vars_;
    std::string text_;
};

}  // namespace cylheat
