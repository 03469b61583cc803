#pragma once

#include <functional>
#include <vector>

#include "cloven/tensor.hpp"

namespace cloven {

// Central-difference gradient verification for a scalar-valued tensor
// function. Returns the max over coordinates of
//   |analytic - numeric| / max(1, |analytic|).
// f must be deterministic across calls (re-seed any randomness inside).
double gradcheck(const std::function<Tensor(const Tensor&)>& f,
                 const Tensor& x, double h = 1e-5);

// Same check for a function of several tensors; every coordinate of every
// input is perturbed.
double gradcheck_multi(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& xs, double h = 1e-5);

}  // namespace cloven
