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

// Static activation arena planning.
//
// Each buffer is live over the closed node interval [first_use, last_use].
// Buffers are placed in order of decreasing size; each one takes the
// smallest gap between already-placed, concurrently-live buffers that can
// hold it, or goes above all of them when no gap fits. When that leaves the
// arena above the peak live size, a second pass in birth order alternates
// buffers between the floor and the ceiling of a peak-sized arena, and the
// smaller of the two layouts wins.

#ifndef DREDGE_MEMORY_PLAN_HPP_
#define DREDGE_MEMORY_PLAN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dredge {

struct BufferLifetime {
  std::size_t size = 0;
  int first_use = 0;
  int last_use = 0;

  bool overlaps(const BufferLifetime& other) const {
    return first_use <= other.last_use && other.first_use <= last_use;
  }
};

struct ArenaAssignment {
  std::vector<std::size_t> offsets;  // parallel to the input lifetimes
  std::size_t arena_bytes = 0;
};

ArenaAssignment plan_arena(std::span<const BufferLifetime> buffers);

// max over nodes of the summed size of buffers live at that node
std::size_t peak_live_bytes(std::span<const BufferLifetime> buffers);

// Graph tensors are addressed by tensor id, composite-node scratch by node
// index.
struct BufferKey {
  enum class Kind : std::uint8_t { kTensor, kScratch };
  Kind kind = Kind::kTensor;
  std::uint32_t id = 0;

  bool operator==(const BufferKey&) const = default;
};

struct PlannedBuffer {
  BufferKey key;
  std::size_t offset = 0;
  std::size_t size = 0;
  int first_use = 0;
  int last_use = 0;
};

struct MemoryPlan {
  std::size_t arena_bytes = 0;
  std::vector<PlannedBuffer> buffers;
  std::size_t rom_bytes = 0;

  const PlannedBuffer& find(BufferKey key) const;
  std::vector<BufferLifetime> lifetimes() const;
};

// Buffer sizes are rounded up to this many bytes.
inline constexpr std::size_t kArenaAlignment = 64;

}  // namespace dredge

#endif  // DREDGE_MEMORY_PLAN_HPP_
