// Copyright 2026  The corrpool authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CORRPOOL_STACK_IO_HPP_
#define CORRPOOL_STACK_IO_HPP_

#include <filesystem>

#include "corrpool/layerwise.hpp"

namespace corrpool {

/// Binary stack container:
///   offset 0:  magic, 8 ASCII bytes "CPSTACK1"
///   offset 8:  L+1 as u32 little-endian
///   offset 12: T   as u32 little-endian
///   offset 16: D   as u32 little-endian
///   offset 20: (L+1)*T*D payload floats, f32 little-endian,
///              layer-major then frame-major
/// The layout is byte-order stable across platforms.  Values are quantized
/// to 32-bit floats on disk and widened to 64-bit in memory.

void write_stack(const std::filesystem::path& path, const LayerStack& stack);

LayerStack read_stack(const std::filesystem::path& path);

}  // namespace corrpool

#endif  // CORRPOOL_STACK_IO_HPP_
