#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace magnum {

// Binary tensor file: magic "MGNT", u16 version (=1), u8 dtype, u8 rank,
// rank x u32 dims, then the payload in row-major order. All integers and
// payload values are little-endian.
enum class NtfDtype : uint8_t { F64 = 0, F32 = 1 };

struct NtfTensor {
    std::vector<size_t> dims;
    std::vector<double> values;  // row-major
    NtfDtype dtype = NtfDtype::F64;

    size_t numel() const;
};

void write_ntf(const NtfTensor& tensor, const std::filesystem::path& path);
NtfTensor read_ntf(const std::filesystem::path& path);

// In-memory codec used by the file functions; exposed for tests.
std::string encode_ntf(const NtfTensor& tensor);
NtfTensor decode_ntf(const std::string& bytes);

}  // namespace magnum
