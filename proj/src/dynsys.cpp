#include "lisa/dynsys.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace lisa::dynsys {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.erase(std::remove_if(out.begin(), out.end(), [](char c) { return c == '-' || c == '_'; }),
              out.end());
    return out;
}

ParamSet reference_params(SystemKind kind) {
    switch (kind) {
    case SystemKind::Lorenz63: return {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
    case SystemKind::Lorenz96: return {{"F", 8.0}};
    case SystemKind::Rossler: return {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}};
    case SystemKind::DuffingNESS:
    case SystemKind::DuffingNE:
        // Tabulated values, including delta = 0.
        return {{"alpha", 0.2}, {"beta", 0.2}, {"gamma", 5.7}, {"delta", 0.0}, {"omega", 2.0}};
    case SystemKind::Chua: return {{"alpha", 15.6}, {"beta", 28.0}, {"m0", -1.15}, {"m1", -0.70}};
    case SystemKind::Halvorsen: return {{"a", 1.4}};
    case SystemKind::Torus:
        return {{"R", 2.0}, {"r", 0.7}, {"omega1", 1.0}, {"omega2", std::numbers::sqrt2}};
    }
    return {};
}

int reference_dim(SystemKind kind) {
    switch (kind) {
    case SystemKind::Lorenz63: return 3;
    case SystemKind::Lorenz96: return 5;
    case SystemKind::Rossler: return 3;
    case SystemKind::DuffingNESS: return 4;
    case SystemKind::DuffingNE: return 2;
    case SystemKind::Chua: return 3;
    case SystemKind::Halvorsen: return 3;
    case SystemKind::Torus: return 3;
    }
    return 0;
}

Vector torus_point(const OdeSystem& s, double t) {
    const double big_r = s.param("R"), small_r = s.param("r");
    const double th1 = s.param("omega1") * t, th2 = s.param("omega2") * t;
    Vector p(3);
    p << (big_r + small_r * std::cos(th2)) * std::cos(th1),
        (big_r + small_r * std::cos(th2)) * std::sin(th1), small_r * std::sin(th2);
    return p;
}

}  // namespace

std::string_view to_string(SystemKind kind) {
    switch (kind) {
    case SystemKind::Lorenz63: return "Lorenz63";
    case SystemKind::Lorenz96: return "Lorenz96";
    case SystemKind::Rossler: return "Rossler";
    case SystemKind::DuffingNESS: return "DuffingNESS";
    case SystemKind::DuffingNE: return "DuffingNE";
    case SystemKind::Chua: return "Chua";
    case SystemKind::Halvorsen: return "Halvorsen";
    case SystemKind::Torus: return "Torus";
    }
    return "?";
}

SystemKind parse_system(std::string_view name) {
    const std::string key = lower(name);
    for (SystemKind k : all_systems()) {
        if (lower(to_string(k)) == key) return k;
    }
    if (key == "lorenz") return SystemKind::Lorenz63;
    if (key == "roessler") return SystemKind::Rossler;
    if (key == "duffing") return SystemKind::DuffingNESS;
    throw ArgumentError("unknown system '" + std::string(name) + "'");
}

const std::vector<SystemKind>& all_systems() {
    static const std::vector<SystemKind> systems{
        SystemKind::Lorenz63,  SystemKind::Lorenz96, SystemKind::Rossler,   SystemKind::DuffingNESS,
        SystemKind::DuffingNE, SystemKind::Chua,     SystemKind::Halvorsen, SystemKind::Torus};
    return systems;
}

double OdeSystem::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) {
        throw ArgumentError(std::string(to_string(kind)) + " has no parameter '" + name + "'");
    }
    return it->second;
}

OdeSystem make_system(SystemKind kind, const ParamSet& overrides) {
    OdeSystem s{kind, reference_params(kind), reference_dim(kind)};
    for (const auto& [name, value] : overrides) {
        auto it = s.params.find(name);
        if (it == s.params.end()) {
            throw ArgumentError(std::string(to_string(kind)) + " has no parameter '" + name + "'");
        }
        it->second = value;
    }
    for (const auto& [name, value] : s.params) {
        if (!std::isfinite(value)) throw ArgumentError("parameter '" + name + "' is not finite");
    }
    return s;
}

double reference_dt(SystemKind kind) {
    switch (kind) {
    case SystemKind::Chua:
    case SystemKind::Halvorsen: return 0.005;
    default: return 0.01;
    }
}

int reference_window(SystemKind kind) {
    switch (kind) {
    case SystemKind::Lorenz63: return 75;
    case SystemKind::Lorenz96: return 40;
    case SystemKind::Rossler: return 1200;
    case SystemKind::DuffingNESS:
    case SystemKind::DuffingNE: return 628;
    case SystemKind::Chua: return 175;
    case SystemKind::Halvorsen:
    case SystemKind::Torus: return 100;
    }
    return 100;
}

Vector vector_field(const OdeSystem& s, const Vector& x, double t) {
    if (x.size() != s.dim) {
        std::ostringstream msg;
        msg << to_string(s.kind) << " expects a state of length " << s.dim << ", got " << x.size();
        throw ArgumentError(msg.str());
    }
    Vector dx(s.dim);
    switch (s.kind) {
    case SystemKind::Lorenz63: {
        const double sigma = s.param("sigma"), rho = s.param("rho"), beta = s.param("beta");
        dx << sigma * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - beta * x[2];
        break;
    }
    case SystemKind::Lorenz96: {
        const double forcing = s.param("F");
        const Index n = s.dim;
        for (Index i = 0; i < n; ++i) {
            const double xp1 = x[(i + 1) % n];
            const double xm1 = x[(i + n - 1) % n];
            const double xm2 = x[(i + n - 2) % n];
            dx[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
        }
        break;
    }
    case SystemKind::Rossler: {
        const double a = s.param("a"), b = s.param("b"), c = s.param("c");
        dx << -x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c);
        break;
    }
    case SystemKind::DuffingNESS: {
        // (x, v, cos wt, sin wt): the forcing phase is carried in the state.
        const double alpha = s.param("alpha"), beta = s.param("beta"), gamma = s.param("gamma");
        const double delta = s.param("delta"), omega = s.param("omega");
        dx << x[1], gamma * x[2] - delta * x[1] - alpha * x[0] - beta * x[0] * x[0] * x[0],
            -omega * x[3], omega * x[2];
        break;
    }
    case SystemKind::DuffingNE: {
        const double alpha = s.param("alpha"), beta = s.param("beta"), gamma = s.param("gamma");
        const double delta = s.param("delta"), omega = s.param("omega");
        dx << x[1],
            gamma * std::cos(omega * t) - delta * x[1] - alpha * x[0] - beta * x[0] * x[0] * x[0];
        break;
    }
    case SystemKind::Chua: {
        const double alpha = s.param("alpha"), beta = s.param("beta");
        const double m0 = s.param("m0"), m1 = s.param("m1");
        const double h = 0.5 * (m0 - m1) * (std::abs(x[0] + 1.0) - std::abs(x[0] - 1.0));
        dx << alpha * (x[1] - x[0] - h + m1 * x[0]), x[0] - x[1] + x[2], -beta * x[1];
        break;
    }
    case SystemKind::Halvorsen: {
        const double a = s.param("a");
        dx << -a * x[0] - 4.0 * x[1] - 4.0 * x[2] - x[1] * x[1],
            -a * x[1] - 4.0 * x[2] - 4.0 * x[0] - x[2] * x[2],
            -a * x[2] - 4.0 * x[0] - 4.0 * x[1] - x[0] * x[0];
        break;
    }
    case SystemKind::Torus: {
        const double big_r = s.param("R"), small_r = s.param("r");
        const double w1 = s.param("omega1"), w2 = s.param("omega2");
        const double th1 = w1 * t, th2 = w2 * t;
        const double rho = big_r + small_r * std::cos(th2);
        const double drho = -small_r * w2 * std::sin(th2);
        dx << drho * std::cos(th1) - rho * w1 * std::sin(th1),
            drho * std::sin(th1) + rho * w1 * std::cos(th1), small_r * w2 * std::cos(th2);
        break;
    }
    }
    return dx;
}

void TrajectoryConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("dt must be positive");
    if (burn_in < 0) throw ArgumentError("burn_in must be non-negative");
    if (n_steps <= burn_in) throw ArgumentError("n_steps must exceed burn_in");
}

Vector default_initial_state(const OdeSystem& system, std::uint64_t seed, double t) {
    if (system.kind == SystemKind::Torus) return torus_point(system, t);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    Vector x = Vector::Ones(system.dim);
    for (Index i = 0; i < x.size(); ++i) x[i] += jitter(rng);
    if (system.kind == SystemKind::DuffingNESS) {
        const double omega = system.param("omega");
        x[2] = std::cos(omega * t);
        x[3] = std::sin(omega * t);
    }
    return x;
}

Vector rk4_step(const Field& f, const Vector& x, double t, double dt) {
    const Vector k1 = f(x, t);
    const Vector k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt);
    const Vector k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt);
    const Vector k4 = f(x + dt * k3, t + dt);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Matrix rk4_trajectory(const Field& f, const Vector& initial, double t_start, double dt,
                      Index n_steps, Index burn_in) {
    if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
    if (burn_in < 0 || n_steps <= burn_in) throw ArgumentError("n_steps must exceed burn_in >= 0");
    const Index dim = initial.size();
    Matrix out(n_steps - burn_in, dim);
    Vector x = initial;
    if (!x.allFinite()) throw IntegrationError(0, "non-finite initial state");
    for (Index k = 0; k < n_steps; ++k) {
        if (k > 0) {
            x = rk4_step(f, x, t_start + static_cast<double>(k - 1) * dt, dt);
            if (!x.allFinite()) {
                throw IntegrationError(k, "state became non-finite at step " + std::to_string(k));
            }
        }
        if (k >= burn_in) out.row(k - burn_in) = x.transpose();
    }
    return out;
}

TimeSeries integrate(const OdeSystem& system, const TrajectoryConfig& cfg) {
    cfg.validate();
    const double t_start = -static_cast<double>(cfg.burn_in) * cfg.dt;
    Vector init = cfg.initial_state ? *cfg.initial_state
                                    : default_initial_state(system, cfg.seed, t_start);
    if (init.size() != system.dim) throw ArgumentError("initial state has wrong dimension");
    Field f = [&system](const Vector& x, double t) { return vector_field(system, x, t); };
    TimeSeries ts;
    ts.values = rk4_trajectory(f, init, t_start, cfg.dt, cfg.n_steps, cfg.burn_in);
    ts.dt = cfg.dt;
    ts.t0 = 0.0;
    return ts;
}

RegimeSwitchSpec default_regime_switch(Index split_step) {
    return {{{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
            {{"sigma", 16.0}, {"rho", 50.0}, {"beta", 3.0}},
            split_step};
}

RegimeSwitchSeries integrate_regime_switch(const OdeSystem& system, const RegimeSwitchSpec& spec,
                                           const TrajectoryConfig& cfg) {
    if (system.kind != SystemKind::Lorenz63) {
        throw ArgumentError("regime switching is only defined for Lorenz63");
    }
    cfg.validate();
    const Index n_out = cfg.n_steps - cfg.burn_in;
    if (spec.split_step <= 0 || spec.split_step >= n_out) {
        throw ArgumentError("split_step must leave non-empty train and test segments");
    }
    const OdeSystem a = make_system(system.kind, spec.regime_a);
    const OdeSystem b = make_system(system.kind, spec.regime_b);

    const double t_start = -static_cast<double>(cfg.burn_in) * cfg.dt;
    Vector init = cfg.initial_state ? *cfg.initial_state : default_initial_state(a, cfg.seed, t_start);
    if (init.size() != system.dim) throw ArgumentError("initial state has wrong dimension");

    Field fa = [&a](const Vector& x, double t) { return vector_field(a, x, t); };
    Field fb = [&b](const Vector& x, double t) { return vector_field(b, x, t); };

    RegimeSwitchSeries out;
    out.train.values = rk4_trajectory(fa, init, t_start, cfg.dt, cfg.burn_in + spec.split_step,
                                      cfg.burn_in);
    out.train.dt = cfg.dt;
    out.train.t0 = 0.0;

    const Vector last = out.train.values.row(spec.split_step - 1).transpose();
    const double t_last = static_cast<double>(spec.split_step - 1) * cfg.dt;
    try {
        out.test.values = rk4_trajectory(fb, last, t_last, cfg.dt, n_out - spec.split_step + 1, 1);
    } catch (const IntegrationError& e) {
        throw IntegrationError(e.step() + cfg.burn_in + spec.split_step - 1, e.what());
    }
    out.test.dt = cfg.dt;
    out.test.t0 = static_cast<double>(spec.split_step) * cfg.dt;
    return out;
}

}  // namespace lisa::dynsys
