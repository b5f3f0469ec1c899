#pragma once

#include <string>

#include "paic/trial_data.hpp"

namespace paic {

// Builds a ModelSpec from a formula string like
//   "y ~ PF1 + PF2 + trt + trt:EM1 + trt:EM2"
// Grouped interactions "trt:(X1 + X2)" and "(X1 + X2):trt" are expanded.
// When trt_hint is empty the treatment variable is guessed: the main-effect
// variable common to every interaction term, falling back to a main effect
// literally named "trt".
ModelSpec spec_from_formula(const std::string& formula, Family family, Link link,
                            const std::string& trt_hint = "");

// Canonical rendering of the spec as a formula string.
std::string formula_string(const ModelSpec& spec);

}  // namespace paic
