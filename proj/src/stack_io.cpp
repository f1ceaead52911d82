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

#include "corrpool/stack_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "corrpool/error.hpp"

namespace corrpool {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'S', 'T', 'A', 'C', 'K', '1'};
constexpr std::size_t kHeaderSize = 20;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + i]));
  };
  return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

}  // namespace

void write_stack(const std::filesystem::path& path, const LayerStack& stack) {
  const Tensor& t = stack.layers;
  if (t.rank() != 3) {
    throw ShapeError("write_stack: expected (L+1) x T x D stack, got shape " +
                     t.shape_string());
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (t.dim(i) > std::numeric_limits<std::uint32_t>::max()) {
      throw ValueError("write_stack: dimension " + std::to_string(t.dim(i)) +
                       " exceeds the u32 header field");
    }
  }
  std::string buf;
  buf.reserve(kHeaderSize + 4 * t.size());
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, static_cast<std::uint32_t>(t.dim(0)));
  put_u32(buf, static_cast<std::uint32_t>(t.dim(1)));
  put_u32(buf, static_cast<std::uint32_t>(t.dim(2)));
  for (std::size_t i = 0; i < t.size(); ++i) {
    put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw FormatError("write_stack: cannot open '" + path.string() + "' for writing");
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) {
    throw FormatError("write_stack: short write to '" + path.string() + "'");
  }
}

LayerStack read_stack(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw FormatError("read_stack: cannot open '" + path.string() + "'");
  }
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderSize) {
    throw FormatError("read_stack: '" + path.string() + "' is " +
                      std::to_string(buf.size()) + " bytes, header needs " +
                      std::to_string(kHeaderSize));
  }
  if (buf.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("read_stack: '" + path.string() + "' has bad magic at offset 0");
  }
  std::uint64_t layers = get_u32(buf, 8);
  std::uint64_t frames = get_u32(buf, 12);
  std::uint64_t dims = get_u32(buf, 16);
  if (layers == 0 || frames == 0 || dims == 0) {
    throw FormatError("read_stack: '" + path.string() +
                      "' declares a zero dimension in the header at offset 8");
  }
  std::uint64_t count = layers * frames;
  if (frames != 0 && count / frames != layers) {
    throw FormatError("read_stack: '" + path.string() + "' header dimensions overflow");
  }
  std::uint64_t total = count * dims;
  if (dims != 0 && total / dims != count) {
    throw FormatError("read_stack: '" + path.string() + "' header dimensions overflow");
  }
  std::uint64_t expected = kHeaderSize + 4 * total;
  if (4 * total / 4 != total || buf.size() < expected) {
    throw FormatError("read_stack: '" + path.string() + "' truncated: payload ends at offset " +
                      std::to_string(buf.size()) + ", header requires " +
                      std::to_string(expected));
  }
  if (buf.size() > expected) {
    throw FormatError("read_stack: '" + path.string() + "' has trailing bytes at offset " +
                      std::to_string(expected));
  }
  Tensor t({static_cast<std::size_t>(layers), static_cast<std::size_t>(frames),
            static_cast<std::size_t>(dims)});
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(std::bit_cast<float>(get_u32(buf, kHeaderSize + 4 * i)));
  }
  return LayerStack(std::move(t));
}

}  // namespace corrpool
