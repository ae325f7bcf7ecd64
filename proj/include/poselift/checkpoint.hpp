#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "poselift/tensor.hpp"

namespace poselift::nn {

// On-disk layout (all integers little-endian):
//
//   magic "PLCK" | u32 version = 1
//   u64 metadata byte length | metadata: "key=value\n" lines, keys sorted
//   u32 tensor count
//   per tensor: u32 name length | name bytes | u8 dtype (1 = float64)
//               u32 rank | u64 extents[rank] | float64 values, row-major
//   u64 FNV-1a checksum of every preceding byte
struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::map<std::string, std::string> metadata;
    std::vector<StoredTensor> tensors;

    const StoredTensor* find(const std::string& name) const;
    const std::string& meta(const std::string& key) const; // throws DataError when absent
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Throws DataError on a malformed, truncated or corrupted file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace poselift::nn
