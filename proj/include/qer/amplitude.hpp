#pragma once

// Single-qubit amplitude arithmetic for quantum-inspired experience replay.
//
// A transition's replay priority is held as one rotation angle theta: the
// qubit state is cos(theta)|0> + sin(theta)|1>, and sin^2(theta) is the
// probability of observing |1> ("accept"). All operators are real rotations
// about Y, so amplitudes stay real and the angle is a lossless encoding.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace qer {

inline constexpr double kPi = std::numbers::pi;

/// Lower clamp for every stored angle. sin^2(0.05) ~ 2.5e-3, so no live
/// transition ever becomes unsampleable.
inline constexpr double kThetaFloor = 0.05;
inline constexpr double kThetaCeil = kPi / 2.0;

/// Angle of the equal-superposition state |psi_0>.
constexpr double uniform_angle() noexcept { return kPi / 4.0; }

/// Explicit two-component form of a real qubit state.
struct Amplitude2 {
    double c0 = 1.0;  // |0>, reject
    double c1 = 0.0;  // |1>, accept

    double norm_squared() const noexcept { return c0 * c0 + c1 * c1; }

    static Amplitude2 from_angle(double theta) noexcept {
        return {std::cos(theta), std::sin(theta)};
    }
};

/// [[cos phi, -sin phi], [sin phi, cos phi]] * state.
inline Amplitude2 apply_rotation(const Amplitude2& state, double phi) noexcept {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {c * state.c0 - s * state.c1, s * state.c0 + c * state.c1};
}

inline double accept_probability(double theta) noexcept {
    if (theta == uniform_angle()) return 0.5;  // sin^2 rounds to 0.5 +- 1ulp otherwise
    const double s = std::sin(theta);
    return s * s;
}

/// sigma = zeta1 / (1 + e^{te/zeta2}); decays from zeta1/2 toward zero.
inline double preparation_factor(double te, double zeta1, double zeta2) {
    if (!(zeta2 > 0.0)) throw std::invalid_argument("preparation_factor: zeta2 must be positive");
    return zeta1 / (1.0 + std::exp(te / zeta2));
}

/// omega = tau1 / (rt_max * (1 + e^{tau2/te})); zero at te = 0 (right limit).
inline double depreciation_factor(double te, double rt_max, double tau1, double tau2) {
    if (!(rt_max >= 1.0)) throw std::invalid_argument("depreciation_factor: rt_max must be >= 1");
    if (te <= 0.0) return 0.0;
    // e^{tau2/te} overflows to inf for tiny te, which correctly yields 0.
    return tau1 / (rt_max * (1.0 + std::exp(tau2 / te)));
}

/// m_k = Floor(mu * p_k / p_max - iota / sigma). Negative counts rotate
/// clockwise, toward |0>.
inline std::int64_t rotation_count(double p_k, double p_max, double sigma, double mu, double iota) {
    if (!(sigma > 0.0)) throw std::invalid_argument("rotation_count: sigma must be positive");
    if (!(p_max > 0.0)) throw std::invalid_argument("rotation_count: p_max must be positive");
    return static_cast<std::int64_t>(std::floor(mu * p_k / p_max - iota / sigma));
}

/// Angle before clamping: preparation counter-clockwise by m*sigma from the
/// uniform state, then depreciation clockwise by cn*omega.
inline double unclamped_angle(std::int64_t m, double sigma, std::uint64_t cn, double omega) noexcept {
    return uniform_angle() + static_cast<double>(m) * sigma - static_cast<double>(cn) * omega;
}

inline double clamp_angle(double theta) noexcept {
    if (theta < kThetaFloor) return kThetaFloor;
    if (theta > kThetaCeil) return kThetaCeil;
    return theta;
}

/// (U_omega)^{-cn} (U_sigma)^{m} |psi_0>, as an angle in [kThetaFloor, pi/2].
inline double compose_angle(std::int64_t m, double sigma, std::uint64_t cn, double omega) noexcept {
    return clamp_angle(unclamped_angle(m, sigma, cn, omega));
}

/// Hyper-parameters of the preparation and depreciation schedules.
/// Defaults are the Atari-scale values; harness configs rescale zeta2/tau2
/// to their own frame budget.
struct ScheduleParams {
    double zeta1 = 0.03 * kPi;
    double zeta2 = 2.0e6;
    double tau1 = kPi;
    double tau2 = 1.0e6;
    double mu = 100.0;
    double iota = 0.25 * kPi;

    void validate() const {
        if (!(zeta1 > 0.0) || !(zeta2 > 0.0)) throw std::invalid_argument("schedule: zeta1, zeta2 must be positive");
        if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("schedule: tau1, tau2 must be positive");
        if (!(mu > 0.0)) throw std::invalid_argument("schedule: mu must be positive");
        if (!(iota >= 0.0)) throw std::invalid_argument("schedule: iota must be non-negative");
    }
};

/// Schedule parameters plus the live running maxima they are normalized by.
struct RotationSchedule {
    ScheduleParams params;
    double delta_max = 1.0;
    std::uint64_t rt_max = 1;
    std::uint64_t te = 0;

    double sigma(std::uint64_t frame) const {
        return preparation_factor(static_cast<double>(frame), params.zeta1, params.zeta2);
    }
    double omega(std::uint64_t frame) const {
        return depreciation_factor(static_cast<double>(frame), static_cast<double>(rt_max), params.tau1,
                                   params.tau2);
    }
    std::int64_t count(double priority, double sigma_now) const {
        return rotation_count(priority, delta_max, sigma_now, params.mu, params.iota);
    }
};

}  // namespace qer
