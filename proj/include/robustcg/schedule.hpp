#pragma once

#include <robustcg/types.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

namespace robustcg {

/// rho(k) = sqrt(2)/sqrt(2-k) - 2k/(2-k), the per-iteration contraction
/// factor of the stable pairwise schemes. rho <= 1 on [0, 1].
inline double rate_factor_pcg(double kappa)
{
    if (!(kappa >= 0.0 && kappa <= 1.0)) {
        throw ParameterError("rate_factor_pcg: kappa must lie in [0, 1]");
    }
    return std::sqrt(2.0) / std::sqrt(2.0 - kappa) - 2.0 * kappa / (2.0 - kappa);
}

/// R = (alpha_l / alpha_u) / (32 card D^2).
inline double dicg_rate_parameter(double alpha_l, double alpha_u, double diameter, double card)
{
    if (!(alpha_l > 0.0 && alpha_l <= alpha_u)) {
        throw ParameterError("DICG schedule: need 0 < alpha_l <= alpha_u");
    }
    if (!(card >= 1.0)) {
        throw ParameterError("DICG schedule: card must be >= 1");
    }
    if (!(diameter > 0.0)) {
        throw ParameterError("DICG schedule: diameter must be > 0");
    }
    const double R = (alpha_l / alpha_u) / (32.0 * card * diameter * diameter);
    if (!(R > 0.0 && R < 1.0)) {
        throw ParameterError("DICG schedule: R must lie in (0, 1)");
    }
    return R;
}

inline double rate_factor_dicg(double alpha_l, double alpha_u, double diameter, double card)
{
    return rate_factor_pcg(dicg_rate_parameter(alpha_l, alpha_u, diameter, card));
}

/// Which leading coefficient the theoretical DICG schedule uses. The stated
/// step rule multiplies rho^t sqrt(h0) by R / sqrt(alpha_l); the derivation
/// behind it uses Z = sqrt(alpha_l) / (sqrt(32 card) alpha_u D^2).
enum class DicgCoefficient { Derivation, Stated };

struct TheoreticalDicg {
    double alpha_l = 1.0;
    double alpha_u = 1.0;
    double diameter = 1.0;
    double card = 1.0;
    double h0 = 1.0;
    double psi = 0.0;
    DicgCoefficient coefficient = DicgCoefficient::Derivation;
};

struct TheoreticalPcg {
    double curvature = 1.0;        // C_f^A
    double strong_convexity = 1.0; // mu_f^A
    double h0 = 1.0;
    double psi = 0.0;
};

/// Which gap estimate drives the adaptive rule.
enum class GapSource {
    Pairwise, // robust <G, v^- - v^+>, from the oracle scores
    Duality,  // robust <G, beta - v^+>
};

struct AdaptiveGap {
    double multiplier = 0.1;
    GapSource source = GapSource::Pairwise;
};

struct FixedGeometric {
    double eta0 = 0.5;
    double rho = 0.5;
};

using StepSchedule = std::variant<TheoreticalDicg, TheoreticalPcg, AdaptiveGap, FixedGeometric>;

/// Gap estimates available to the schedule at iteration t (already clamped at 0).
struct GapEstimates {
    double duality = 0.0;
    double pairwise = 0.0;
};

inline void validate(const StepSchedule& schedule)
{
    std::visit(
        [](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, TheoreticalDicg>) {
                (void)dicg_rate_parameter(s.alpha_l, s.alpha_u, s.diameter, s.card);
                if (!(s.h0 >= 0.0 && s.psi >= 0.0)) {
                    throw ParameterError("DICG schedule: h0 and psi must be >= 0");
                }
            } else if constexpr (std::is_same_v<S, TheoreticalPcg>) {
                if (!(s.strong_convexity > 0.0 && s.strong_convexity <= s.curvature)) {
                    throw ParameterError("PCG schedule: need 0 < mu_f <= C_f");
                }
                if (!(s.h0 >= 0.0 && s.psi >= 0.0)) {
                    throw ParameterError("PCG schedule: h0 and psi must be >= 0");
                }
            } else if constexpr (std::is_same_v<S, AdaptiveGap>) {
                if (!(s.multiplier > 0.0)) {
                    throw ParameterError("adaptive schedule: multiplier must be > 0");
                }
            } else {
                if (!(s.eta0 >= 0.0 && s.rho > 0.0)) {
                    throw ParameterError("geometric schedule: need eta0 >= 0 and rho > 0");
                }
            }
        },
        schedule);
}

/// Raw step size eta_t (before the solver's clamp to [0, 1] and trimming).
inline double step_size(const StepSchedule& schedule, Index t, const GapEstimates& gaps)
{
    const auto tt = static_cast<double>(t);
    return std::visit(
        [&](const auto& s) -> double {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, TheoreticalDicg>) {
                const double R = dicg_rate_parameter(s.alpha_l, s.alpha_u, s.diameter, s.card);
                const double rho = rate_factor_pcg(R);
                const double D2 = s.diameter * s.diameter;
                const double lead = s.coefficient == DicgCoefficient::Derivation
                                        ? std::sqrt(s.alpha_l) / (std::sqrt(32.0 * s.card) * s.alpha_u * D2)
                                        : R / std::sqrt(s.alpha_l);
                const double floor = s.alpha_l * s.psi / (16.0 * s.alpha_u * s.alpha_u * D2 * D2 * s.card);
                return std::pow(rho, tt) * lead * std::sqrt(s.h0) + floor;
            } else if constexpr (std::is_same_v<S, TheoreticalPcg>) {
                const double kappa = s.strong_convexity / s.curvature;
                const double rho = rate_factor_pcg(kappa);
                return std::pow(rho, tt) * std::sqrt(kappa / s.curvature) * std::sqrt(s.h0) +
                       4.0 * (kappa / s.curvature) * s.psi;
            } else if constexpr (std::is_same_v<S, AdaptiveGap>) {
                const double gap = s.source == GapSource::Pairwise ? gaps.pairwise : gaps.duality;
                return s.multiplier * std::max(0.0, gap);
            } else {
                return s.eta0 * std::pow(s.rho, tt);
            }
        },
        schedule);
}

inline std::string describe(const StepSchedule& schedule)
{
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, TheoreticalDicg>) {
                return "theoretical-dicg";
            } else if constexpr (std::is_same_v<S, TheoreticalPcg>) {
                return "theoretical-pcg";
            } else if constexpr (std::is_same_v<S, AdaptiveGap>) {
                return "adaptive-gap";
            } else {
                return "fixed-geometric";
            }
        },
        schedule);
}

} // namespace robustcg
