// Copyright 2026 The embserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>

namespace embserve {

// Integer identifier that does not convert implicitly to another id kind.
template <typename Tag>
struct StrongId {
  uint32_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(uint32_t v) : value(v) {}

  constexpr auto operator<=>(const StrongId&) const = default;
};

template <typename Tag>
std::ostream& operator<<(std::ostream& os, StrongId<Tag> id) {
  return os << id.value;
}

using TableId = StrongId<struct TableTag>;
using ServerId = StrongId<struct ServerTag>;
using ConnId = StrongId<struct ConnTag>;
using EngineId = StrongId<struct EngineTag>;
using UnitId = StrongId<struct UnitTag>;
using DomainId = StrongId<struct DomainTag>;

using RowIndex = uint64_t;

// Virtual time in nanoseconds.
using Tick = int64_t;

inline constexpr uint32_t kElementWidth = 4;
inline constexpr uint32_t kNoPushdown = std::numeric_limits<uint32_t>::max();

}  // namespace embserve

template <typename Tag>
struct std::hash<embserve::StrongId<Tag>> {
  size_t operator()(embserve::StrongId<Tag> id) const noexcept {
    return std::hash<uint32_t>{}(id.value);
  }
};
