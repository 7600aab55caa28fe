// SPDX-License-Identifier: Apache-2.0
//
// Core-chain files.
//
//   TRF1 (binary, little-endian):
//     "TRF1" | u64 d | d x ( u64 r_left, u64 mode, u64 r_right | f64 payload, row-major )
//   TRL1 (binary, little-endian): a layer header followed by a TRF1 block
//     "TRL1" | u64 n | u64 m | n x u64 input dim | m x u64 output dim | TRF1 block
//
// The JSON variants carry the same fields:
//   {"magic":"TRF1","cores":[{"shape":[a,b,c],"data":[...]}, ...]}
//   {"magic":"TRL1","n":..,"m":..,"input_dims":[..],"output_dims":[..],"ring":{TRF1 object}}
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "trnn/formats.hpp"
#include "trnn/trl.hpp"

namespace trnn {

class FileFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_ring(std::ostream& os, const TR& ring);
TR read_ring(std::istream& is);

void write_layer(std::ostream& os, const TRL& layer);
TRL read_layer(std::istream& is);

std::string ring_to_json(const TR& ring);
TR ring_from_json(const std::string& text);

std::string layer_to_json(const TRL& layer);
TRL layer_from_json(const std::string& text);

/// Writes binary, or JSON when the extension is ".json". Atomic.
void save_ring(const std::filesystem::path& path, const TR& ring);
void save_layer(const std::filesystem::path& path, const TRL& layer);

/// Loads either variant; the content decides (JSON starts with '{').
TR load_ring(const std::filesystem::path& path);
TRL load_layer(const std::filesystem::path& path);

}  // namespace trnn
