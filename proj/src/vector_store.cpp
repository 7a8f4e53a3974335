#include "vcs/vector_store.hpp"

#include <cmath>
#include <cstring>

#include "vcs/error.hpp"
#include "vcs/io_util.hpp"

namespace vcs {

void validate_store(const VectorStore& store, const std::string& what) {
    if (store.dim == 0) throw Error::validation(what + ": dim must be >= 1");
    if (store.data.size() % store.dim != 0)
        throw Error::validation(what + ": data length is not a multiple of dim");
    for (size_t i = 0; i < store.data.size(); ++i) {
        if (!std::isfinite(store.data[i]))
            throw Error::validation(what + ": non-finite value at flat index " + std::to_string(i));
    }
}

VectorStore read_vectors(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kVectorStoreMagic, 8) != 0)
        throw Error::validation("bad magic in vector store: " + path.string());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const uint32_t count = get_u32le(p + 8);
    const uint32_t dim = get_u32le(p + 12);
    if (dim == 0) throw Error::validation("vector store has dim=0: " + path.string());
    const size_t expected = 16 + size_t(count) * dim * 4;
    if (bytes.size() < expected)
        throw Error::validation("truncated vector store: " + path.string() + " (want " +
                                std::to_string(expected) + " bytes, have " +
                                std::to_string(bytes.size()) + ")");
    if (bytes.size() > expected)
        throw Error::validation("trailing bytes in vector store: " + path.string());
    VectorStore store;
    store.dim = dim;
    store.data.resize(size_t(count) * dim);
    for (size_t i = 0; i < store.data.size(); ++i) {
        store.data[i] = get_f32le(p + 16 + i * 4);
        if (!std::isfinite(store.data[i]))
            throw Error::validation("non-finite value in vector store: " + path.string() +
                                    " at flat index " + std::to_string(i));
    }
    return store;
}

void write_vectors(const VectorStore& store, const std::filesystem::path& path) {
    validate_store(store, "vector store");
    std::string bytes;
    bytes.reserve(16 + store.data.size() * 4);
    bytes.append(kVectorStoreMagic, 8);
    put_u32le(bytes, static_cast<uint32_t>(store.count()));
    put_u32le(bytes, store.dim);
    for (const float f : store.data) put_f32le(bytes, f);
    atomic_write_file(path, bytes);
}

}  // namespace vcs
