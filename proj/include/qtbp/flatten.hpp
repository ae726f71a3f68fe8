// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "qtbp/grad.hpp"

namespace qtbp {

// Canonical flat layouts shared by the optimizer, the finite-difference
// harness and the checkpoints:
//   RBM  [W row-major, c_V, c_H, tau]
//   DBM  [W_H1V, W_H2H1, c_V, c_H1, c_H2, tau]
//   GRBM [W, b, c]
//   GMRF [pot_ud, pot_lr, pot_d1, pot_d2]   (noise is frozen)

std::vector<double> flatten(const RbmParams &p);
void unflatten(const std::vector<double> &flat, RbmParams &p);
std::vector<double> flatten(const RbmGrad &g);

std::vector<double> flatten(const DbmParams &p);
void unflatten(const std::vector<double> &flat, DbmParams &p);
std::vector<double> flatten(const DbmGrad &g);

std::vector<double> flatten(const GrbmParams &p);
void unflatten(const std::vector<double> &flat, GrbmParams &p);
std::vector<double> flatten(const GrbmGrad &g);

std::vector<double> flatten(const GmrfParams &p);
void unflatten(const std::vector<double> &flat, GmrfParams &p);
std::vector<double> flatten(const GmrfGrad &g);

}  // namespace qtbp
