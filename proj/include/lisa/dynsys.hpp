#pragma once

// Benchmark dynamical systems and a fixed-step RK4 integrator.

#include "lisa/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lisa::dynsys {

enum class SystemKind { Lorenz63, Lorenz96, Rossler, DuffingNESS, DuffingNE, Chua, Halvorsen, Torus };

std::string_view to_string(SystemKind kind);
/// Accepts the enum spelling case-insensitively, plus a few aliases
/// ("lorenz", "roessler", "duffing").
SystemKind parse_system(std::string_view name);
const std::vector<SystemKind>& all_systems();

using ParamSet = std::map<std::string, double>;

struct OdeSystem {
    SystemKind kind = SystemKind::Lorenz63;
    ParamSet params;
    int dim = 3;

    double param(const std::string& name) const;
};

/// System with its reference parameters; `overrides` replace individual
/// entries and must name existing parameters.
OdeSystem make_system(SystemKind kind, const ParamSet& overrides = {});

/// Reference integration step for the system.
double reference_dt(SystemKind kind);
/// Reference delay-window length. Halvorsen and Torus have no tabulated
/// value and default to 100.
int reference_window(SystemKind kind);

/// dstate/dt at (state, t). For Torus this is the derivative of the
/// parametric curve at time t and does not depend on the state.
Vector vector_field(const OdeSystem& system, const Vector& state, double t);

struct TrajectoryConfig {
    double dt = 0.01;
    Index n_steps = 10000;
    Index burn_in = 0;
    /// Explicit initial state; when absent a seeded default is used.
    std::optional<Vector> initial_state;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Seeded default initial condition: (1, 1, ...) plus uniform jitter in
/// [-0.5, 0.5]. Torus and the forcing phase of DuffingNESS are placed on
/// their closed-form curves at time `t`.
Vector default_initial_state(const OdeSystem& system, std::uint64_t seed, double t);

/// Generic field signature for rk4 on arbitrary systems (used by tests).
using Field = std::function<Vector(const Vector& state, double t)>;

/// One classical RK4 step.
Vector rk4_step(const Field& field, const Vector& state, double t, double dt);

/// Fixed-step RK4 from `initial` at time `t_start`. Returns n_steps - burn_in
/// samples; sample k corresponds to k + burn_in steps after the start. The
/// retained samples have time stamps starting at t_start + burn_in * dt.
Matrix rk4_trajectory(const Field& field, const Vector& initial, double t_start, double dt,
                      Index n_steps, Index burn_in);

/// Integrate a benchmark system. Time is shifted so that t = 0 at the first
/// retained sample (so forcing phases restart cleanly after burn-in).
TimeSeries integrate(const OdeSystem& system, const TrajectoryConfig& cfg);

struct RegimeSwitchSpec {
    ParamSet regime_a;
    ParamSet regime_b;
    /// Retained-sample index where regime B begins.
    Index split_step = 0;
};

/// sigma=10, rho=28, beta=8/3 -> sigma=16, rho=50, beta=3.
RegimeSwitchSpec default_regime_switch(Index split_step);

struct RegimeSwitchSeries {
    TimeSeries train;
    TimeSeries test;
};

/// Integrate under regime A up to split_step, then continue the same state
/// under regime B. test[0] is one regime-B RK4 step after train.back().
RegimeSwitchSeries integrate_regime_switch(const OdeSystem& system, const RegimeSwitchSpec& spec,
                                           const TrajectoryConfig& cfg);

}  // namespace lisa::dynsys
