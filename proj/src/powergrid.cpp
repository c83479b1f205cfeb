#include "gridtrace/powergrid.hpp"

#include <algorithm>
#include <cstdio>

#include "gridtrace/errors.hpp"

namespace gridtrace {

double LoadProfile::at(double t_s) const {
    double kw = 0.0;
    for (const auto& [start, value] : steps) {
        if (start > t_s) break;
        kw = value;
    }
    return kw;
}

PowerGrid::PowerGrid(const LoadProfile& load, const PvProfile& pv, double bss_capacity_kw)
    : load_(load), pv_(pv), capacity_(bss_capacity_kw), rng_(pv.seed),
      pv_value_(std::clamp(pv.start_kw, pv.min_kw, 0.0)) {}

void PowerGrid::maybe_walk_pv(SimTime t) {
    SimTime interval = seconds(pv_.interval_s);
    while (t >= next_pv_step_) {
        if (next_pv_step_ > 0) {
            double delta = rng_.coin() ? pv_.step_kw : -pv_.step_kw;
            double v = pv_value_ + delta;
            if (v > 0.0 || v < pv_.min_kw) v = pv_value_ - delta;  // reflect at bounds
            pv_value_ = v;
        }
        next_pv_step_ += interval;
    }
}

PowerSnapshot PowerGrid::step(SimTime t) {
    maybe_walk_pv(t);
    bss_applied_ = bss_pending_;  // one-step actuation delay
    PowerSnapshot s;
    s.t = t;
    s.load_kw = load_.at(static_cast<double>(t) / 1e6);
    s.pv_kw = pv_value_;
    s.bss_kw = bss_applied_;
    s.grid_sum_kw = s.load_kw + s.pv_kw + s.bss_kw;
    history_.push_back(s);
    return s;
}

double PowerGrid::apply_setpoint(double value_kw) {
    double applied = std::clamp(value_kw, -capacity_, capacity_);
    bss_pending_ = applied;
    return applied;
}

uint64_t PowerGrid::export_csv(const std::vector<PowerSnapshot>& history,
                               const std::string& path) {
    if (history.empty()) throw IoError("refusing to export empty power history");
    FILE* f = fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    fprintf(f, "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw\n");
    for (const auto& s : history) {
        fprintf(f, "%.6f,%.6f,%.6f,%.6f,%.6f\n", static_cast<double>(s.t) / 1e6, s.load_kw,
                s.pv_kw, s.bss_kw, s.grid_sum_kw);
    }
    if (fclose(f) != 0) throw IoError("write failed: " + path);
    return history.size();
}

}  // namespace gridtrace
