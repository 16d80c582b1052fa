#pragma once

// Complex nodal admittance matrix, standard pi-model assembly.

#include <vector>

#include "popf/network_case.hpp"

namespace popf {

struct AdmittanceMatrix {
  SparseComplexMatrix y;          // n x n, bus-index ordered
  std::vector<int> bus_ids;       // dense index -> bus id

  int size() const { return static_cast<int>(y.rows()); }
};

/// Assemble the bus admittance matrix. Out-of-service branches are skipped.
/// Off-nominal taps sit on the from side; shunts and half line charging on
/// the diagonals.
inline AdmittanceMatrix build_admittance(const NetworkCase& net) {
  const int n = net.bus_count();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(net.branches.size() * 4 + n);

  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    if (br.status <= 0) continue;
    if (br.r == 0.0 && br.x == 0.0)
      throw AssemblyError("branch " + std::to_string(k + 1) + " (" +
                          std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                          ") has zero series impedance");
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b / 2.0);
    const double tau = br.effective_tap();
    const Complex shift = std::polar(1.0, br.shift_rad());
    const Complex tap = tau * shift;

    trip.emplace_back(f, f, (ys + ysh) / (tau * tau));
    trip.emplace_back(t, t, ys + ysh);
    trip.emplace_back(f, t, -ys / std::conj(tap));
    trip.emplace_back(t, f, -ys / tap);
  }
  for (int i = 0; i < n; ++i) {
    const auto& b = net.buses[i];
    if (b.gs_mw != 0.0 || b.bs_mvar != 0.0)
      trip.emplace_back(i, i, Complex(b.gs_mw, b.bs_mvar) / net.base_mva);
  }

  AdmittanceMatrix out;
  out.y.resize(n, n);
  out.y.setFromTriplets(trip.begin(), trip.end());
  out.y.makeCompressed();
  out.bus_ids.resize(n);
  for (int i = 0; i < n; ++i) out.bus_ids[i] = net.buses[i].id;
  return out;
}

}  // namespace popf
