#include "magnum/ntf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "magnum/errors.hpp"

namespace magnum {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'N', 'T'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint8_t get_u8(const std::string& bytes, size_t offset) {
    return static_cast<uint8_t>(bytes[offset]);
}

uint16_t get_u16(const std::string& bytes, size_t offset) {
    return static_cast<uint16_t>(get_u8(bytes, offset) | (get_u8(bytes, offset + 1) << 8));
}

uint32_t get_u32(const std::string& bytes, size_t offset) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(get_u8(bytes, offset + i)) << (8 * i);
    return v;
}

uint64_t get_u64(const std::string& bytes, size_t offset) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(get_u8(bytes, offset + i)) << (8 * i);
    return v;
}

void need(const std::string& bytes, size_t offset, size_t count, const char* what) {
    if (bytes.size() < offset + count) {
        throw FormatError(std::string("truncated file: expected ") + what, offset);
    }
}

}  // namespace

size_t NtfTensor::numel() const {
    size_t n = 1;
    for (size_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

std::string encode_ntf(const NtfTensor& tensor) {
    if (tensor.dims.empty()) {
        throw ContractError("ntf tensors have rank >= 1");
    }
    if (tensor.dims.size() > 255) {
        throw FormatError("rank exceeds 255", 7);
    }
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    out.push_back(static_cast<char>(tensor.dtype));
    out.push_back(static_cast<char>(tensor.dims.size()));
    for (size_t i = 0; i < tensor.dims.size(); ++i) {
        if (tensor.dims[i] > std::numeric_limits<uint32_t>::max()) {
            throw FormatError("dim overflows u32", 8 + 4 * i);
        }
        put_u32(out, static_cast<uint32_t>(tensor.dims[i]));
    }
    const size_t n = tensor.numel();
    if (tensor.values.size() != n) {
        throw ContractError("ntf payload size does not match dims");
    }
    for (double v : tensor.values) {
        if (tensor.dtype == NtfDtype::F64) {
            put_u64(out, std::bit_cast<uint64_t>(v));
        } else {
            put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

NtfTensor decode_ntf(const std::string& bytes) {
    need(bytes, 0, 4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad magic", 0);
    }
    need(bytes, 4, 2, "version");
    const uint16_t version = get_u16(bytes, 4);
    if (version != kVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    need(bytes, 6, 1, "dtype");
    const uint8_t dtype_raw = get_u8(bytes, 6);
    if (dtype_raw > 1) {
        throw FormatError("unknown dtype " + std::to_string(dtype_raw), 6);
    }
    need(bytes, 7, 1, "rank");
    const size_t rank = get_u8(bytes, 7);
    if (rank == 0) {
        throw FormatError("rank must be >= 1", 7);
    }

    NtfTensor t;
    t.dtype = static_cast<NtfDtype>(dtype_raw);
    t.dims.resize(rank);
    size_t offset = 8;
    uint64_t numel = 1;
    for (size_t i = 0; i < rank; ++i) {
        need(bytes, offset, 4, "dim");
        t.dims[i] = get_u32(bytes, offset);
        if (t.dims[i] != 0 && numel > std::numeric_limits<uint64_t>::max() / t.dims[i]) {
            throw FormatError("dim product overflows", offset);
        }
        numel *= t.dims[i];
        offset += 4;
    }

    const size_t elem_size = t.dtype == NtfDtype::F64 ? 8 : 4;
    if (numel > (std::numeric_limits<size_t>::max() - offset) / elem_size) {
        throw FormatError("payload size overflows", offset);
    }
    need(bytes, offset, numel * elem_size, "payload");
    if (bytes.size() != offset + numel * elem_size) {
        throw FormatError("trailing bytes after payload", offset + numel * elem_size);
    }
    t.values.resize(numel);
    for (uint64_t i = 0; i < numel; ++i) {
        if (t.dtype == NtfDtype::F64) {
            t.values[i] = std::bit_cast<double>(get_u64(bytes, offset));
            offset += 8;
        } else {
            t.values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
            offset += 4;
        }
    }
    return t;
}

void write_ntf(const NtfTensor& tensor, const std::filesystem::path& path) {
    const std::string bytes = encode_ntf(tensor);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open for writing: " + path.string(), 0);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FormatError("short write: " + path.string(), 0);
    }
}

NtfTensor read_ntf(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open: " + path.string(), 0);
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_ntf(bytes);
}

}  // namespace magnum
