/* Copyright 2026 The Dredge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "dredge/memory_plan.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "dredge/error.hpp"

namespace dredge {

namespace {

struct Placement {
  std::vector<std::size_t> offsets;
  std::vector<bool> placed;
  std::size_t top = 0;
};

// Conflicting placed buffers, sorted by offset.
std::vector<std::size_t> conflicts_of(std::span<const BufferLifetime> buffers,
                                      const Placement& p, std::size_t idx) {
  std::vector<std::size_t> out;
  for (std::size_t other = 0; other < buffers.size(); ++other) {
    if (p.placed[other] && buffers[other].size > 0 &&
        buffers[other].overlaps(buffers[idx])) {
      out.push_back(other);
    }
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return p.offsets[a] < p.offsets[b];
  });
  return out;
}

// Smallest gap between conflicting buffers that holds the buffer, else the
// first free byte above all of them.
std::size_t best_fit(std::span<const BufferLifetime> buffers,
                     const Placement& p, std::size_t idx,
                     const std::vector<std::size_t>& conflicts) {
  std::size_t best_offset = 0;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  bool found = false;
  std::size_t cursor = 0;
  for (const std::size_t other : conflicts) {
    const std::size_t start = p.offsets[other];
    if (start > cursor) {
      const std::size_t gap = start - cursor;
      if (gap >= buffers[idx].size && gap < best_gap) {
        best_gap = gap;
        best_offset = cursor;
        found = true;
      }
    }
    cursor = std::max(cursor, start + buffers[other].size);
  }
  return found ? best_offset : cursor;
}

bool fits_at(std::span<const BufferLifetime> buffers, const Placement& p,
             std::size_t idx, std::size_t offset,
             const std::vector<std::size_t>& conflicts) {
  const std::size_t end = offset + buffers[idx].size;
  for (const std::size_t other : conflicts) {
    const std::size_t o = p.offsets[other];
    if (offset < o + buffers[other].size && o < end) return false;
  }
  return true;
}

void commit(std::span<const BufferLifetime> buffers, Placement& p,
            std::size_t idx, std::size_t offset) {
  p.offsets[idx] = offset;
  p.placed[idx] = true;
  p.top = std::max(p.top, offset + buffers[idx].size);
}

Placement empty_placement(std::size_t n) {
  return {std::vector<std::size_t>(n, 0), std::vector<bool>(n, false), 0};
}

// Decreasing size, best-fit gap.
Placement greedy_by_size(std::span<const BufferLifetime> buffers) {
  Placement p = empty_placement(buffers.size());
  std::vector<std::size_t> order(buffers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (buffers[a].size != buffers[b].size) {
                       return buffers[a].size > buffers[b].size;
                     }
                     return buffers[a].first_use < buffers[b].first_use;
                   });
  for (const std::size_t idx : order) {
    const auto conflicts = conflicts_of(buffers, p, idx);
    commit(buffers, p, idx, best_fit(buffers, p, idx, conflicts));
  }
  return p;
}

// Birth order, each buffer pinned to the floor or the ceiling of an arena of
// the given height when either is free. Chains come out at exactly that
// height when it is the peak.
Placement two_sided(std::span<const BufferLifetime> buffers,
                    std::size_t height) {
  Placement p = empty_placement(buffers.size());
  std::vector<std::size_t> order(buffers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return buffers[a].first_use < buffers[b].first_use;
                   });
  for (const std::size_t idx : order) {
    const auto conflicts = conflicts_of(buffers, p, idx);
    const std::size_t size = buffers[idx].size;
    if (fits_at(buffers, p, idx, 0, conflicts)) {
      commit(buffers, p, idx, 0);
    } else if (size <= height &&
               fits_at(buffers, p, idx, height - size, conflicts)) {
      commit(buffers, p, idx, height - size);
    } else {
      commit(buffers, p, idx, best_fit(buffers, p, idx, conflicts));
    }
  }
  return p;
}

}  // namespace

ArenaAssignment plan_arena(std::span<const BufferLifetime> buffers) {
  Placement best = greedy_by_size(buffers);
  const std::size_t peak = peak_live_bytes(buffers);
  if (best.top > peak) {
    Placement alt = two_sided(buffers, peak);
    if (alt.top < best.top) best = std::move(alt);
  }
  return {std::move(best.offsets), best.top};
}

std::size_t peak_live_bytes(std::span<const BufferLifetime> buffers) {
  if (buffers.empty()) return 0;
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  for (const auto& b : buffers) {
    lo = std::min(lo, b.first_use);
    hi = std::max(hi, b.last_use);
  }
  std::size_t peak = 0;
  for (int t = lo; t <= hi; ++t) {
    std::size_t live = 0;
    for (const auto& b : buffers) {
      if (b.first_use <= t && t <= b.last_use) live += b.size;
    }
    peak = std::max(peak, live);
  }
  return peak;
}

const PlannedBuffer& MemoryPlan::find(BufferKey key) const {
  for (const auto& b : buffers) {
    if (b.key == key) return b;
  }
  throw ValidationError("memory plan has no buffer for " +
                        std::string(key.kind == BufferKey::Kind::kTensor
                                        ? "tensor "
                                        : "scratch of node ") +
                        std::to_string(key.id));
}

std::vector<BufferLifetime> MemoryPlan::lifetimes() const {
  std::vector<BufferLifetime> out;
  out.reserve(buffers.size());
  for (const auto& b : buffers) out.push_back({b.size, b.first_use, b.last_use});
  return out;
}

}  // namespace dredge
