#pragma once

// Records what a library run reports through its observer, so it can be
// compared against a dense reference trace.

#include <algorithm>
#include <string>

#include "dense_reference.hpp"
#include "tucker/decomp.hpp"

namespace oracle {

struct Capture {
  Trace trace;
  tucker::IterationObserver observer;

  Capture() {
    observer.on_gram = [this](const tucker::GramEvent& e) { trace.grams.push_back({e.iteration, e.mode, e.gram}); };
    observer.on_sweep = [this](const tucker::SweepEvent& e) {
      trace.sweeps.push_back({e.model.core, e.measure, e.fit.value_or(std::nan(""))});
      trace.factors = e.model.factors;
    };
  }
  Capture(const Capture&) = delete;
  Capture& operator=(const Capture&) = delete;
};

struct TraceDiff {
  double gram = 0.0;  // worst relative error over every Gram matrix
  double core = 0.0;
  double fit = 0.0;      // absolute
  double measure = 0.0;  // absolute
  std::string structure;  // non-empty when the traces do not line up
  double worst() const { return std::max({gram, core, fit, measure}); }
};

inline TraceDiff compare(const Trace& got, const Trace& want) {
  TraceDiff d;
  if (got.grams.size() != want.grams.size() || got.sweeps.size() != want.sweeps.size()) {
    d.structure = "library: " + std::to_string(got.grams.size()) + " grams / " + std::to_string(got.sweeps.size()) +
                  " sweeps, reference: " + std::to_string(want.grams.size()) + " / " +
                  std::to_string(want.sweeps.size());
    return d;
  }
  for (std::size_t k = 0; k < got.grams.size(); ++k) {
    if (got.grams[k].iteration != want.grams[k].iteration || got.grams[k].mode != want.grams[k].mode)
      d.structure = "gram " + std::to_string(k) + " is for a different (iteration, mode)";
    d.gram = std::max(d.gram, max_rel_diff(got.grams[k].gram, want.grams[k].gram));
  }
  for (std::size_t k = 0; k < got.sweeps.size(); ++k) {
    d.core = std::max(d.core, max_rel_diff(got.sweeps[k].core, want.sweeps[k].core));
    d.measure = std::max(d.measure, std::abs(got.sweeps[k].measure - want.sweeps[k].measure));
    if (std::isnan(got.sweeps[k].fit)) d.structure = "sweep " + std::to_string(k) + " reported no fit";
    d.fit = std::max(d.fit, std::abs(got.sweeps[k].fit - want.sweeps[k].fit));
  }
  return d;
}

}  // namespace oracle
