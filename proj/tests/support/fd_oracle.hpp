// Copyright 2026 The mcforge Authors.
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


#pragma once

// Central finite differences over plain vectors. Used as the independent
// reference for every analytic gradient in the suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fd {

/// d f / d x_k for every k, by (f(x + h e_k) - f(x - h e_k)) / 2h.
inline std::vector<double> gradient(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = f(x);
    x[k] = keep - h;
    const double down = f(x);
    x[k] = keep;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// max_k |a_k - b_k| / max(scale, |b_k|) with scale the largest |b|.
inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 1e-8;
  for (double v : b) scale = std::max(scale, std::abs(v));
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / scale);
  return m;
}

}  // namespace fd
