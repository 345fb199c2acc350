#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "dse/params.hpp"

namespace testsupport {

/// Result of checking one parameter vector against finite differences.
struct FdReport {
  int checked = 0;
  int failed = 0;
  double max_err = 0.0;      // worst |analytic - numeric| / max(|a|, |n|, floor)
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool ok() const { return failed == 0; }
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
inline constexpr double kFdAbsFloor = 1e-7;

/// Central finite differences of `loss` w.r.t. every entry of `pv.values`,
/// compared against the analytic gradients already stored in `pv.grads`.
/// A coordinate passes when |a - n| <= tol * max(|a|, |n|) + floor.
inline FdReport check_grads(dse::ParamVector& pv,
                            const std::function<double()>& loss,
                            double h = kFdStep, double tol = kFdRelTol,
                            double floor = kFdAbsFloor) {
  FdReport rep;
  for (std::size_t k = 0; k < pv.values.size(); ++k) {
    const double saved = pv.values[k];
    pv.values[k] = saved + h;
    const double up = loss();
    pv.values[k] = saved - h;
    const double dn = loss();
    pv.values[k] = saved;
    const double numeric = (up - dn) / (2.0 * h);
    const double analytic = pv.grads[k];
    const double err = std::fabs(analytic - numeric);
    const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
    const double rel = err / std::max(scale, 1e-12);
    ++rep.checked;
    if (err > tol * scale + floor) {
      ++rep.failed;
      if (rel > rep.max_err) {
        rep.max_err = rel;
        rep.worst_index = k;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    } else if (rep.failed == 0 && rel > rep.max_err && scale > 10 * floor) {
      rep.max_err = rel;
      rep.worst_index = k;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

inline std::string describe(const FdReport& r, const std::string& name) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s: %d/%d coords ok, worst rel err %.3g (idx %zu: analytic "
                "%.6g vs numeric %.6g)",
                name.c_str(), r.checked - r.failed, r.checked, r.max_err,
                r.worst_index, r.worst_analytic, r.worst_numeric);
  return buf;
}

}  // namespace testsupport
