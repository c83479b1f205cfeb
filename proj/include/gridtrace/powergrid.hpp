#ifndef GRIDTRACE_POWERGRID_HPP
#define GRIDTRACE_POWERGRID_HPP

#include <string>
#include <vector>

#include "gridtrace/rng.hpp"
#include "gridtrace/simcore.hpp"

namespace gridtrace {

// Substation measurement at one grid step. Signs: consumption positive,
// generation negative, so a perfectly balanced grid reads 0 kW.
struct PowerSnapshot {
    SimTime t;
    double load_kw;
    double pv_kw;
    double bss_kw;
    double grid_sum_kw;  // load + pv + bss, exact by construction
};

struct LoadProfile {
    // (start_t seconds, kw) steps; start_t strictly increasing, kw >= 0
    std::vector<std::pair<double, double>> steps;

    double at(double t_s) const;
};

struct PvProfile {
    uint64_t seed = 0;
    double interval_s = 30.0;
    double min_kw = -5.0;  // generation is negative; bounds are [min, 0]
    double step_kw = 0.5;
    double start_kw = -2.0;
};

// Algebraic bus-sum balance model standing in for a load-flow study:
// per-step load from a step profile, PV from a seeded bounded random
// walk, BSS from the last applied setpoint.
class PowerGrid {
public:
    PowerGrid(const LoadProfile& load, const PvProfile& pv, double bss_capacity_kw);

    PowerSnapshot step(SimTime t);

    // Clamped to [-capacity, +capacity]; takes effect from the next step.
    double apply_setpoint(double value_kw);

    double load_kw(SimTime t) const { return load_.at(static_cast<double>(t) / 1e6); }
    double pv_kw() const { return pv_value_; }
    double bss_kw() const { return bss_applied_; }
    double capacity_kw() const { return capacity_; }

    const std::vector<PowerSnapshot>& history() const { return history_; }

    // Header `t_s,load_kw,pv_kw,bss_kw,grid_sum_kw`, floats with 6
    // decimals. Errors on empty history.
    static uint64_t export_csv(const std::vector<PowerSnapshot>& history, const std::string& path);

private:
    void maybe_walk_pv(SimTime t);

    LoadProfile load_;
    PvProfile pv_;
    double capacity_;
    Rng rng_;
    double pv_value_;
    SimTime next_pv_step_ = 0;
    double bss_applied_ = 0.0;
    double bss_pending_ = 0.0;
    std::vector<PowerSnapshot> history_;
};

}  // namespace gridtrace

#endif
