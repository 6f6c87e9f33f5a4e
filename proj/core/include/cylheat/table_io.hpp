#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cylheat/parametrix.hpp"

namespace cylheat {

// Tabulated parametrix data for one model and field: backward slices
// p^A(t, ., y) at a set of freeze points and forward slices p^A(t, x, .).
struct ParametrixTable {
    std::shared_ptr<const ParametrixContext> ctx;
    std::vector<BackwardSlice> backward;
    std::vector<ForwardSlice> forward;

    double quadrature_tolerance() const { return ctx->scheme.tolerance; }
    const BackwardSlice& backward_at(std::span<const double> y) const;
    const ForwardSlice& forward_at(std::span<const double> x) const;
};

// Which slices to tabulate.
struct TableLayout {
    std::vector<std::vector<double>> backward_points;  // freeze points y
    std::vector<double> backward_times;
    std::vector<std::vector<double>> forward_points;   // start points x
    std::vector<double> forward_times;
    SeriesOptions series;
};

ParametrixTable build_table(std::shared_ptr<const ParametrixContext> ctx, const TableLayout& layout);

// Binary file: 8-byte magic, u64 metadata length, JSON metadata (model,
// field, scheme, slice layout), then little-endian float64 arrays.
void save_table(const ParametrixTable& table, const std::string& path);
ParametrixTable load_table(const std::string& path);

}  // namespace cylheat
