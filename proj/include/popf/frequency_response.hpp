#pragma once

// Within-interval controllable-power adjustment driven by the load ramp:
// the fleet tracks the summed equivalent-load slope through per-source
// gains, so P^c is affine in time inside each interval.

#include <vector>

#include "popf/forecast.hpp"

namespace popf {

struct FrequencyResponseModel {
  Vector gains;          // per generator K_i
  double k_f = 1.0;      // system sensitivity folded into the gain product
  bool sign_flip = false;  // negate the adjustment direction

  /// Gains from the case: explicit freqgain entries when present, otherwise
  /// p_max-proportional shares normalized to sum to one.
  static FrequencyResponseModel from_case(const NetworkCase& net, double k_f = 1.0,
                                          bool sign_flip = false) {
    FrequencyResponseModel m;
    m.k_f = k_f;
    m.sign_flip = sign_flip;
    const int ng = static_cast<int>(net.generators.size());
    m.gains = Vector::Zero(ng);
    bool any_explicit = false;
    for (const auto& g : net.generators) any_explicit |= g.freq_gain != 0.0;
    if (any_explicit) {
      for (int g = 0; g < ng; ++g)
        m.gains[g] = net.generators[g].in_service() ? net.generators[g].freq_gain : 0.0;
    } else {
      double total = 0.0;
      for (const auto& g : net.generators)
        if (g.in_service()) total += g.p_max_mw;
      if (total > 0.0)
        for (int g = 0; g < ng; ++g)
          if (net.generators[g].in_service())
            m.gains[g] = net.generators[g].p_max_mw / total;
    }
    return m;
  }
};

/// Effective per-source ramp gains for one interval: K_iK = k_f K_i sum_i w^p_ik.
struct IntervalGains {
  Vector k_ik;        // per generator, MW/h
  double slope_sum;   // MW/h

  double total() const { return k_ik.sum(); }
};

inline IntervalGains interval_gains(const FrequencyResponseModel& model,
                                    const ForecastSeries& forecast, int k) {
  IntervalGains out;
  out.slope_sum = forecast.slope_sum(k);
  double sign = model.sign_flip ? -1.0 : 1.0;
  out.k_ik = sign * model.k_f * out.slope_sum * model.gains;
  return out;
}

/// Frequency deviation at t inside interval k (scaled units).
inline double frequency_deviation(const FrequencyResponseModel& model,
                                  const ForecastSeries& forecast, int k, double t) {
  return model.k_f * (t - forecast.times_h.at(k)) * forecast.slope_sum(k);
}

/// P^c_i(t) = P^c_i(t_anchor) - K_iK (t - t_anchor), elementwise over sources.
inline Vector adjusted_power(const Vector& base_mw, const IntervalGains& gains,
                             double t, double t_anchor) {
  return base_mw - (t - t_anchor) * gains.k_ik;
}

}  // namespace popf
