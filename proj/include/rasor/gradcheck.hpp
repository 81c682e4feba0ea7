#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "rasor/params.hpp"
#include "rasor/tensor.hpp"

namespace rasor {

struct GradCheckReport {
  double max_rel_err = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  bool pass(double tol) const { return max_rel_err < tol; }
};

/// Central-difference check of the gradients currently stored in `params`
/// against the loss functional `f` (which must rebuild its graph on every
/// call and read parameter values afresh). Relative error is
/// |g - g_fd| / max(1, |g|, |g_fd|).
inline GradCheckReport check_gradients(ParamStore<double>& params,
                                       const std::function<double()>& f,
                                       double h = 1e-5) {
  GradCheckReport rep;
  for (std::size_t e = 0; e < params.count(); ++e) {
    auto& entry = params.entry(e);
    auto& t = entry.tensor;
    t.ensure_grad();
    for (std::size_t i = 0; i < t.v.size(); ++i) {
      double saved = t.v[i];
      t.v[i] = saved + h;
      double up = f();
      t.v[i] = saved - h;
      double down = f();
      t.v[i] = saved;
      double fd = (up - down) / (2 * h);
      double an = t.g[i];
      double rel =
          std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = entry.name;
        rep.worst_index = i;
        rep.analytic = an;
        rep.numeric = fd;
      }
    }
  }
  return rep;
}

}  // namespace rasor
