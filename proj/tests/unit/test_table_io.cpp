#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "cylheat/errors.hpp"
#include "cylheat/table_io.hpp"

using namespace cylheat;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

ParametrixTable small_table() {
    const auto p = ModelParams::make(1.0, 2, 1.0, 1.0, 1.2, 0.1, 1.0);
    QuadratureScheme sc;
    sc.space.nodes = 21;
    sc.time_nodes = 6;
    TableLayout layout;
    layout.backward_points = {{0.0, 0.0}};
    layout.backward_times = {0.5};
    layout.forward_points = {{0.2, 0.1}};
    layout.forward_times = {0.5};
    layout.series.time_derivative = true;
    return build_table(std::make_shared<ParametrixContext>(CoefficientField::smooth_periodic(p, 1.0), sc), layout);
}

}  // namespace

TEST(TableIo, RoundTripIsExact) {
    const auto tab = small_table();
    const fs::path path = fs::temp_directory_path() / "cylheat_table_roundtrip.cyl";
    save_table(tab, path.string());
    const auto back = load_table(path.string());
    ASSERT_EQ(back.backward.size(), 1u);
    ASSERT_EQ(back.forward.size(), 1u);
    EXPECT_EQ(back.ctx->scheme.space.nodes, 21);
    EXPECT_EQ(back.ctx->params().beta_declared, 1.0);
    EXPECT_EQ(back.backward[0].pA(0.5), tab.backward[0].pA(0.5));
    EXPECT_EQ(back.forward[0].pA(0.5), tab.forward[0].pA(0.5));
    const std::vector<double> x = {0.4, -0.3};
    EXPECT_EQ(back.backward[0].value(0.5, x), tab.backward[0].value(0.5, x));
    EXPECT_EQ(back.backward[0].time_derivative(0.5, x), tab.backward[0].time_derivative(0.5, x));
    EXPECT_EQ(back.backward[0].summary().term_norms, tab.backward[0].summary().term_norms);
    const std::vector<double> y = {0.0, 0.0};
    EXPECT_EQ(&back.backward_at(y), &back.backward[0]);
    fs::remove(path);
}

TEST(TableIo, OutputIsDeterministic) {
    const auto tab = small_table();
    const fs::path a = fs::temp_directory_path() / "cylheat_table_a.cyl";
    const fs::path b = fs::temp_directory_path() / "cylheat_table_b.cyl";
    save_table(tab, a.string());
    save_table(small_table(), b.string());
    EXPECT_EQ(slurp(a), slurp(b));
    fs::remove(a);
    fs::remove(b);
}

TEST(TableIo, RejectsForeignFiles) {
    const fs::path path = fs::temp_directory_path() / "cylheat_not_a_table.cyl";
    std::ofstream(path) << "hello";
    EXPECT_THROW(load_table(path.string()), ConfigError);
    EXPECT_THROW(load_table((fs::temp_directory_path() / "cylheat_missing.cyl").string()), ConfigError);
    fs::remove(path);
}
