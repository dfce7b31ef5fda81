#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tga/error.hpp"
#include "tga/model.hpp"
#include "tga/rng.hpp"

namespace tga {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double tolerance = 0.0;
  bool pass = false;

  const GradCheckEntry& worst() const {
    return *std::max_element(tensors.begin(), tensors.end(),
                             [](const GradCheckEntry& a, const GradCheckEntry& b) {
                               return a.max_rel_err < b.max_rel_err;
                             });
  }
};

// Central finite differences against a caller-supplied analytic gradient.
// Checks every coordinate of tensors with at most max_coords elements and a
// seeded random subset of max_coords distinct coordinates otherwise. The
// probe must be a pure function of the parameters; it is evaluated twice at
// the base point and any discrepancy is rejected.
inline GradCheckReport grad_check(const std::function<double(const Model<double>&)>& probe,
                                  Model<double>& params,
                                  const Model<double>& analytic,
                                  double step = 1e-5, double tolerance = 1e-4,
                                  size_t max_coords = 200, uint64_t sample_seed = 1) {
  const double base1 = probe(params);
  const double base2 = probe(params);
  if (base1 != base2)
    throw NumericError("grad_check: probe is not deterministic");

  Rng rng(sample_seed);
  GradCheckReport report;
  report.tolerance = tolerance;
  report.pass = true;

  params.for_each([&](const char* name, Tensor<double>& t) {
    std::vector<size_t> coords;
    if (t.size() <= max_coords) {
      coords.resize(t.size());
      for (size_t i = 0; i < t.size(); ++i) coords[i] = i;
    } else {
      std::unordered_set<size_t> seen;
      while (coords.size() < max_coords) {
        const size_t i = rng.index(t.size());
        if (seen.insert(i).second) coords.push_back(i);
      }
    }

    const Tensor<double>* an = const_cast<Model<double>&>(analytic).find(name);
    GradCheckEntry entry;
    entry.name = name;
    entry.coords_checked = coords.size();
    for (size_t i : coords) {
      const double saved = t.data[i];
      t.data[i] = saved + step;
      const double up = probe(params);
      t.data[i] = saved - step;
      const double down = probe(params);
      t.data[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = an->data[i];
      // the 1e-5 floor keeps truncation and roundoff noise (about 1e-10 at
      // this step size) from registering on near-zero gradient coordinates
      const double rel = std::abs(fd - a) / std::max(1e-5, std::abs(fd) + std::abs(a));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    if (entry.max_rel_err >= tolerance) report.pass = false;
    report.tensors.push_back(entry);
  });
  return report;
}

}  // namespace tga
