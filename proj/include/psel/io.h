// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psel/approx.h"
#include "psel/nn.h"

// Binary containers. Every field after the 6-byte preamble is a
// little-endian 8-byte word: integers as two's complement, reals as IEEE-754
// bit patterns. docs/formats.md gives the full layouts.
//
//   model / MLP file:  "SFMT" version kind  words...
//   dataset file:      "SFDS" version mode  words...

namespace psel {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kFormatVersion = 1;

enum class ContainerKind : std::uint8_t { kTransformer = 0, kMlp = 1 };

Bytes encode_model(const TransformerWeights& w);
// Throws kIo on a malformed container and kShape on inconsistent weights.
TransformerWeights decode_model(std::span<const std::uint8_t> bytes);

Bytes encode_mlp(const MlpApprox& mlp);
MlpApprox decode_mlp(std::span<const std::uint8_t> bytes);

Bytes encode_dataset(const Dataset& d);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::string& path);
// Creates missing parent directories.
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text(const std::string& path, const std::string& text);

void save_model(const std::string& path, const TransformerWeights& w);
TransformerWeights load_model(const std::string& path);
void save_mlp(const std::string& path, const MlpApprox& mlp);
MlpApprox load_mlp(const std::string& path);
void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

// One index per line.
std::string format_indices(std::span<const std::size_t> indices);
std::vector<std::size_t> parse_indices(const std::string& text);

}  // namespace psel
