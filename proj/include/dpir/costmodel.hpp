#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dpir {

// Affine sampling-cost model: total = per_nfe_tflop * NFE + fixed_tflop,
// where the fixed part covers sub-modules run once per image.
struct CostModel {
  double per_nfe_tflop = 0.0;
  double fixed_tflop = 0.0;
};

inline double total_cost(const CostModel& m, long nfe) {
  if (nfe < 0) throw std::invalid_argument("total_cost: negative NFE");
  if (m.per_nfe_tflop < 0.0 || m.fixed_tflop < 0.0)
    throw std::invalid_argument("total_cost: negative cost coefficients");
  return m.per_nfe_tflop * static_cast<double>(nfe) + m.fixed_tflop;
}

struct CostTableRow {
  std::string method;
  CostModel model;
  long nfe = 0;
};

// Reference configurations for 720p dynamic scene deblurring.
inline std::vector<CostTableRow> reference_cost_table() {
  return {
      {"DvSR", {1.2, 4.8}, 500},
      {"icDPM", {4.8, 5.2}, 500},
      {"InDI", {4.8, 0.0}, 10},
      {"Ours", {4.3, 1.9}, 5},
  };
}

}  // namespace dpir
