#include "hamlearn/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hamlearn/errors.hpp"

namespace hamlearn::integrators {

StepperId parse_stepper(const std::string& id) {
    if (id == "ee") return StepperId::EE;
    if (id == "rk4") return StepperId::RK4;
    if (id == "sv") return StepperId::SV;
    if (id == "le") return StepperId::LE;
    if (id == "cf4") return StepperId::CF4;
    if (id == "dopri54") return StepperId::Dopri54;
    throw ConfigError("unknown integrator id '" + id + "' (expected ee|rk4|sv|le|cf4|dopri54)");
}

std::string to_string(StepperId id) {
    switch (id) {
    case StepperId::EE: return "ee";
    case StepperId::RK4: return "rk4";
    case StepperId::SV: return "sv";
    case StepperId::LE: return "le";
    case StepperId::CF4: return "cf4";
    case StepperId::Dopri54: return "dopri54";
    }
    return "?";
}

StepperInfo stepper_info(StepperId id) {
    switch (id) {
    case StepperId::EE: return {id, 1, false};
    case StepperId::RK4: return {id, 4, false};
    case StepperId::SV: return {id, 2, false};
    case StepperId::LE: return {id, 1, true};
    case StepperId::CF4: return {id, 4, true};
    case StepperId::Dopri54: return {id, 5, false};
    }
    return {id, 0, false};
}

int stages(StepperId id) {
    switch (id) {
    case StepperId::EE:
    case StepperId::LE: return 1;
    case StepperId::SV: return 2;
    case StepperId::RK4:
    case StepperId::CF4: return 4;
    case StepperId::Dopri54: return 7;
    }
    return 0;
}

Trajectory rollout(const Step& step, std::span<const double> x0, double h, int steps_m) {
    if (steps_m < 2) throw ConfigError("rollout: M must be >= 2");
    Trajectory tr;
    tr.times.reserve(static_cast<size_t>(steps_m));
    tr.states.reserve(static_cast<size_t>(steps_m));
    tr.times.push_back(0.0);
    tr.states.emplace_back(x0.begin(), x0.end());
    for (int j = 1; j < steps_m; ++j) {
        std::vector<double> next;
        try {
            next = step(tr.states.back(), h);
        } catch (const std::exception& e) {
            throw IntegrationError("rollout failed at step " + std::to_string(j) + ": " +
                                   e.what());
        }
        for (double v : next)
            if (!std::isfinite(v))
                throw IntegrationError("rollout produced a non-finite state at step " +
                                       std::to_string(j));
        tr.times.push_back(j * h);
        tr.states.push_back(std::move(next));
    }
    return tr;
}

namespace {

// Dormand-Prince 5(4) tableau (autonomous fields, so the c nodes are unused).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
// y1 - yhat1 error weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights for the 4th-order interpolant
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Dense {
    double t0, h;
    std::vector<double> c1, c2, c3, c4, c5;
    std::vector<double> eval(double t) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        std::vector<double> out(c1.size());
        for (size_t i = 0; i < c1.size(); ++i)
            out[i] = c1[i] + th * (c2[i] + th1 * (c3[i] + th * (c4[i] + th1 * c5[i])));
        return out;
    }
};

} // namespace

Trajectory integrate_reference(const Field& field, std::span<const double> x0,
                               std::span<const double> times, double rtol, double atol) {
    if (times.empty()) throw ConfigError("integrate_reference: empty time grid");
    if (times[0] != 0.0) throw ConfigError("integrate_reference: time grid must start at 0");
    const size_t n = x0.size();
    const double t_end = times[times.size() - 1];

    Trajectory tr;
    tr.times.assign(times.begin(), times.end());
    tr.states.resize(times.size());
    tr.states[0].assign(x0.begin(), x0.end());
    size_t next_out = 1;
    if (next_out >= times.size()) return tr;

    std::vector<double> y(x0.begin(), x0.end());
    std::vector<double> k1 = field(y), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), y1(n);

    auto scaled_norm = [&](const std::vector<double>& e, const std::vector<double>& y0,
                           const std::vector<double>& y1v) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1v[i]));
            const double r = e[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(n));
    };

    // initial step size (classic two-trial heuristic)
    double h;
    {
        double d0 = 0.0, d1n = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double sc = atol + rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1n += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1n = std::sqrt(d1n / n);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, t_end);
        for (size_t i = 0; i < n; ++i) yt[i] = y[i] + h0 * k1[i];
        const std::vector<double> f1 = field(yt);
        double d2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double sc = atol + rtol * std::abs(y[i]);
            d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / n) / h0;
        const double dm = std::max(d1n, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100 * h0, h1, t_end});
    }

    double t = 0.0;
    const double hmin = 1e-14 * std::max(1.0, std::abs(t_end));
    int rejected_in_a_row = 0;
    while (t < t_end) {
        if (h < hmin)
            throw IntegrationError("integrate_reference: step size underflow at t = " +
                                   std::to_string(t));
        if (t + h > t_end) h = t_end - t;

        for (size_t i = 0; i < n; ++i) yt[i] = y[i] + h * a21 * k1[i];
        k2 = field(yt);
        for (size_t i = 0; i < n; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = field(yt);
        for (size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = field(yt);
        for (size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = field(yt);
        for (size_t i = 0; i < n; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
        k6 = field(yt);
        for (size_t i = 0; i < n; ++i)
            y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                a76 * k6[i]);
        k7 = field(y1);

        std::vector<double> err(n);
        for (size_t i = 0; i < n; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                          e7 * k7[i]);
        const double errn = scaled_norm(err, y, y1);
        if (!std::isfinite(errn))
            throw IntegrationError("integrate_reference: non-finite error estimate at t = " +
                                   std::to_string(t));

        if (errn <= 1.0) {
            Dense dense;
            dense.t0 = t;
            dense.h = h;
            dense.c1.resize(n);
            dense.c2.resize(n);
            dense.c3.resize(n);
            dense.c4.resize(n);
            dense.c5.resize(n);
            for (size_t i = 0; i < n; ++i) {
                const double ydiff = y1[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                dense.c1[i] = y[i];
                dense.c2[i] = ydiff;
                dense.c3[i] = bspl;
                dense.c4[i] = ydiff - h * k7[i] - bspl;
                dense.c5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                   d6 * k6[i] + d7 * k7[i]);
            }
            const double t_new = t + h;
            while (next_out < times.size() && times[next_out] <= t_new + 1e-14 * t_end) {
                tr.states[next_out] =
                    times[next_out] >= t_new ? y1 : dense.eval(times[next_out]);
                ++next_out;
            }
            t = t_new;
            y = y1;
            k1 = k7; // FSAL
            const double fac =
                std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(errn, 1e-16), -0.2)));
            h *= fac;
            rejected_in_a_row = 0;
            if (next_out >= times.size()) break;
        } else {
            const double fac = std::max(0.2, 0.9 * std::pow(errn, -0.2));
            h *= fac;
            if (++rejected_in_a_row > 200)
                throw IntegrationError("integrate_reference: controller stalled at t = " +
                                       std::to_string(t));
        }
    }
    for (; next_out < times.size(); ++next_out) tr.states[next_out] = y;
    return tr;
}

} // namespace hamlearn::integrators
