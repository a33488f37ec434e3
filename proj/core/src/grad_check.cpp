// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gdino/grad_check.hpp"

#include <cmath>

namespace gdino {

GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& point, double eps, const Mask& coords) {
  if (!(eps > 0)) throw Error("grad_check: epsilon must be positive");
  if (!coords.empty() && static_cast<std::int64_t>(coords.size()) != point.size()) {
    throw ShapeError("grad_check: coordinate mask size mismatch");
  }
  Tensor<double> analytic;
  {
    Graph<double> g;
    Var<double> x = g.variable(point);
    Var<double> y = f(g, x);
    g.backward(y);
    analytic = g.grad(x);
  }
  auto eval = [&](const Tensor<double>& at) {
    Graph<double> g;
    g.set_grad_enabled(false);
    return f(g, g.constant(at)).item();
  };

  GradCheckResult result;
  Tensor<double> probe = point;
  for (std::int64_t i = 0; i < point.size(); ++i) {
    if (!coords.empty() && !coords[static_cast<std::size_t>(i)]) continue;
    const double x0 = point[i];
    const double hi = x0 + eps, lo = x0 - eps;
    if (hi - lo == 0.0) {
      throw Error("grad_check: epsilon " + std::to_string(eps) + " underflows at coordinate " + std::to_string(i));
    }
    probe[i] = hi;
    const double fh = eval(probe);
    probe[i] = lo;
    const double fl = eval(probe);
    probe[i] = x0;
    const double numeric = (fh - fl) / (hi - lo);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace gdino
