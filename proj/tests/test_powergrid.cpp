#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gridtrace/powergrid.hpp"

using namespace gridtrace;
namespace fs = std::filesystem;

namespace {

PvProfile flat_pv(double start = 0.0) {
    PvProfile pv;
    pv.seed = 1;
    pv.start_kw = start;
    pv.min_kw = -5.0;
    return pv;
}

}  // namespace

TEST_CASE("all-zero inputs balance to zero") {
    PowerGrid grid(LoadProfile{}, flat_pv(0.0), 6.0);
    PowerSnapshot s = grid.step(0);
    CHECK(s.load_kw == 0.0);
    CHECK(s.pv_kw == 0.0);
    CHECK(s.bss_kw == 0.0);
    CHECK(s.grid_sum_kw == 0.0);
}

TEST_CASE("grid_sum is the exact algebraic sum") {
    LoadProfile load;
    load.steps = {{0.0, 3.0}};
    PowerGrid grid(load, flat_pv(-2.0), 6.0);
    grid.apply_setpoint(-1.0);
    grid.step(0);  // setpoint takes effect at the step after application
    PowerSnapshot s = grid.step(seconds(1.0));
    CHECK(s.load_kw == 3.0);
    CHECK(s.pv_kw == -2.0);
    CHECK(s.bss_kw == -1.0);
    CHECK(s.grid_sum_kw == 0.0);  // exact, not approximate
}

TEST_CASE("setpoint clamps to capacity") {
    PowerGrid grid(LoadProfile{}, flat_pv(), 5.0);
    CHECK(grid.apply_setpoint(-1.0) == -1.0);
    CHECK(grid.apply_setpoint(-10.0) == -5.0);
    CHECK(grid.apply_setpoint(7.5) == 5.0);
}

TEST_CASE("setpoint actuates with a one-step delay") {
    PowerGrid grid(LoadProfile{}, flat_pv(), 6.0);
    grid.step(0);
    grid.apply_setpoint(-2.0);
    CHECK(grid.bss_kw() == 0.0);  // not yet
    PowerSnapshot s = grid.step(seconds(1.0));
    CHECK(s.bss_kw == -2.0);
    CHECK(grid.bss_kw() == -2.0);
}

TEST_CASE("load profile steps hold until the next step time") {
    LoadProfile load;
    load.steps = {{0.0, 2.0}, {615.0, 2.5}, {645.0, 3.0}};
    CHECK(load.at(0.0) == 2.0);
    CHECK(load.at(614.9) == 2.0);
    CHECK(load.at(615.0) == 2.5);
    CHECK(load.at(700.0) == 3.0);
    CHECK(LoadProfile{}.at(100.0) == 0.0);
}

TEST_CASE("pv walk is bounded, steps by the configured amount, and reflects") {
    PvProfile pv;
    pv.seed = 42;
    pv.interval_s = 30.0;
    pv.min_kw = -5.0;
    pv.step_kw = 0.5;
    pv.start_kw = -2.0;
    PowerGrid grid(LoadProfile{}, pv, 6.0);

    double prev = pv.start_kw;
    bool moved = false;
    for (int t = 0; t < 1200; ++t) {
        PowerSnapshot s = grid.step(seconds(static_cast<double>(t)));
        CHECK(s.pv_kw <= 0.0);
        CHECK(s.pv_kw >= pv.min_kw);
        double delta = std::abs(s.pv_kw - prev);
        CHECK((delta == 0.0 || delta == pv.step_kw));
        if (delta != 0.0) moved = true;
        prev = s.pv_kw;
    }
    CHECK(moved);
}

TEST_CASE("pv walk reflects at the upper bound") {
    PvProfile pv;
    pv.seed = 0;  // whichever way the coin falls, start at 0 forces -step
    pv.start_kw = 0.0;
    pv.step_kw = 0.5;
    PowerGrid grid(LoadProfile{}, pv, 6.0);
    grid.step(0);
    PowerSnapshot s = grid.step(seconds(30.0));
    CHECK(s.pv_kw == -0.5);
}

TEST_CASE("identical seeds give identical pv series") {
    auto series = [](uint64_t seed) {
        PvProfile pv;
        pv.seed = seed;
        PowerGrid grid(LoadProfile{}, pv, 6.0);
        std::vector<double> out;
        for (int t = 0; t < 600; t += 30) out.push_back(grid.step(seconds(double(t))).pv_kw);
        return out;
    };
    CHECK(series(42) == series(42));
    CHECK(series(42) != series(7));
}

TEST_CASE("csv export writes the pinned schema") {
    LoadProfile load;
    load.steps = {{0.0, 2.0}};
    PowerGrid grid(load, flat_pv(-2.0), 6.0);
    for (int t = 0; t < 3; ++t) grid.step(seconds(double(t)));

    std::string path = (fs::temp_directory_path() / "gt_power.csv").string();
    CHECK(PowerGrid::export_csv(grid.history(), path) == 3);

    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw");
    std::getline(in, row);
    CHECK(row == "0.000000,2.000000,-2.000000,0.000000,0.000000");
    int rows = 1;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 3);
    fs::remove(path);
}

TEST_CASE("csv export refuses an empty history") {
    CHECK_THROWS_AS(PowerGrid::export_csv({}, "/tmp/gt_never.csv"), IoError);
}
