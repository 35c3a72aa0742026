#pragma once

// Central finite-difference check of the emulator gradient.

#include "vvord/emulator.hpp"
#include "vvord/trainer.hpp"

#include <algorithm>
#include <optional>

namespace vvord::testing {

struct GradientComparison {
    double relative_error = 0.0;
    double margin = 0.0;
    Vector analytic;
    Vector numeric;
};

inline double unrolled_loss(const TransformedParams& zt, const FeederModel& f, const Scenario& s,
                            const UnrolledConfig& config) {
    const Vector v = forward(zt, f, s, config).v_terminal;
    return (v - Vector::Ones(v.size())).squaredNorm();
}

/// Compares backward() with central differences of step h. Returns nullopt
/// when some prox input sits within min_margin of a breakpoint, where the
/// unroll is not differentiable in a neighbourhood of the point.
inline std::optional<GradientComparison> compare_gradient(const TransformedParams& zt, const FeederModel& f,
                                                          const Scenario& s, const UnrolledConfig& config,
                                                          double h = 1e-6, double min_margin = 1e-4) {
    const ForwardResult fr = forward(zt, f, s, config);
    GradientComparison out;
    out.margin = breakpoint_margin(fr.tape);
    if (out.margin < min_margin) return std::nullopt;
    out.analytic = pack_trainable(backward(fr.tape, f), f);
    const Vector base = pack_trainable(zt, f);
    out.numeric.resize(base.size());
    for (Eigen::Index k = 0; k < base.size(); ++k) {
        Vector plus = base, minus = base;
        plus(k) += h;
        minus(k) -= h;
        out.numeric(k) = (unrolled_loss(unpack_trainable(plus, zt, f), f, s, config) -
                          unrolled_loss(unpack_trainable(minus, zt, f), f, s, config)) /
                         (2 * h);
    }
    const double scale = std::max({out.numeric.norm(), out.analytic.norm(), 1e-8});
    out.relative_error = (out.analytic - out.numeric).norm() / scale;
    return out;
}

}  // namespace vvord::testing
