/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <utility>
#include <vector>

#include "pointmode/geom.hpp"

namespace pointmode::pretrain {

enum class MatchMode { kAssigned, kHungarian };

// (query index, ground-truth index) pairs.
using Pairing = std::vector<std::pair<int, int>>;

// The tiling rule used by query enhancement: query j pairs with box j mod k.
Pairing match_assigned(int query_count, int gt_count);

// Minimum-cost bijection on min(q, k) pairs with cost 1 - GIoU, solved
// exactly.
Pairing match_hungarian(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts);

Pairing match_predictions(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts, MatchMode mode);

// Exact assignment solver (potentials + augmenting paths). cost must have
// rows <= cols; returns the matched column per row.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

}  // namespace pointmode::pretrain
