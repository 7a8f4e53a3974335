#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace vcs {

// Dense store of float32 row vectors. On disk: 8-byte magic "CNVEC1\0\0",
// count (u32 LE), dim (u32 LE), then count*dim float32 LE, row-major.
struct VectorStore {
    uint32_t dim = 0;
    std::vector<float> data;  // count*dim, row-major

    VectorStore() = default;
    VectorStore(uint32_t dim_, size_t count) : dim(dim_), data(size_t(dim_) * count, 0.0f) {}

    size_t count() const { return dim == 0 ? 0 : data.size() / dim; }

    std::span<const float> row(size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<float> row(size_t i) { return {data.data() + i * dim, dim}; }
};

inline constexpr char kVectorStoreMagic[8] = {'C', 'N', 'V', 'E', 'C', '1', '\0', '\0'};

// Checks dim >= 1, data length divisible by dim, and all entries finite.
// Throws Error(validation) otherwise; `what` names the store in messages.
void validate_store(const VectorStore& store, const std::string& what);

VectorStore read_vectors(const std::filesystem::path& path);
void write_vectors(const VectorStore& store, const std::filesystem::path& path);

}  // namespace vcs
