#include "momenta/container.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "momenta/error.hpp"

// The format is defined little-endian; this implementation assumes a
// little-endian host, which covers every platform we build on.
static_assert(std::endian::native == std::endian::little,
              "container IO requires a little-endian host");

namespace momenta {

uint32_t crc32_ieee(const void* data, size_t length) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xffffffffu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < length; ++i)
        crc = table[(crc ^ p[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

namespace {

constexpr char kMagic[4] = {'M', 'C', 'F', '1'};
constexpr size_t kMaxRank = 4;

template <typename T>
T read_pod(std::ifstream& in, const std::string& context) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (static_cast<size_t>(in.gcount()) != sizeof(T))
        throw Error("cache-corrupt", "truncated entry: " + context);
    return value;
}

}  // namespace

TensorFile TensorFile::open_rw(const std::string& path) {
    TensorFile f;
    f.path_ = path;
    f.writable_ = true;
    if (!std::filesystem::exists(path)) {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("io-error", "cannot create container: " + path);
        out.write(kMagic, 4);
    }
    f.scan();
    return f;
}

TensorFile TensorFile::open_ro(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw Error("cache-not-found", "container missing: " + path);
    TensorFile f;
    f.path_ = path;
    f.writable_ = false;
    f.scan();
    return f;
}

void TensorFile::scan() {
    const uint64_t file_size = std::filesystem::file_size(path_);
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        throw Error("io-error", "cannot open container: " + path_);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw Error("cache-corrupt", "bad magic in " + path_);
    index_.clear();
    uint64_t pos = 4;
    while (pos < file_size) {
        uint64_t offset = pos;
        uint32_t id_len;
        in.read(reinterpret_cast<char*>(&id_len), sizeof(id_len));
        if (static_cast<size_t>(in.gcount()) != sizeof(id_len))
            throw Error("cache-corrupt", "truncated header in " + path_);
        if (id_len > (1u << 20))
            throw Error("cache-corrupt", "implausible id length in " + path_);
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        if (static_cast<size_t>(in.gcount()) != id_len)
            throw Error("cache-corrupt", "truncated id in " + path_);
        auto dtype = read_pod<uint8_t>(in, id);
        auto rank = read_pod<uint8_t>(in, id);
        if (dtype > kBytes || rank > kMaxRank)
            throw Error("cache-corrupt", "bad entry header: " + id);
        for (int i = 0; i < rank; ++i) read_pod<uint32_t>(in, id);
        auto nbytes = read_pod<uint64_t>(in, id);
        pos += sizeof(id_len) + id_len + 2 + rank * sizeof(uint32_t) + sizeof(nbytes);
        if (pos + nbytes + sizeof(uint32_t) > file_size)
            throw Error("cache-corrupt", "truncated payload: " + id);
        pos += nbytes + sizeof(uint32_t);
        in.seekg(static_cast<std::streamoff>(pos));
        index_[id] = offset;
    }
}

std::vector<std::string> TensorFile::ids() const {
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const auto& [id, _] : index_) out.push_back(id);
    return out;
}

std::optional<TensorFile::Entry> TensorFile::get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        throw Error("io-error", "cannot open container: " + path_);
    in.seekg(static_cast<std::streamoff>(it->second));
    auto id_len = read_pod<uint32_t>(in, id);
    std::string stored(id_len, '\0');
    in.read(stored.data(), id_len);
    if (static_cast<size_t>(in.gcount()) != id_len || stored != id)
        throw Error("cache-corrupt", "index mismatch for entry: " + id);
    Entry e;
    e.dtype = read_pod<uint8_t>(in, id);
    auto rank = read_pod<uint8_t>(in, id);
    e.dims.resize(rank);
    for (auto& d : e.dims) d = read_pod<uint32_t>(in, id);
    auto nbytes = read_pod<uint64_t>(in, id);
    std::string payload(nbytes, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(nbytes));
    if (static_cast<uint64_t>(in.gcount()) != nbytes)
        throw Error("cache-corrupt", "truncated payload: " + id);
    auto stored_crc = read_pod<uint32_t>(in, id);
    if (crc32_ieee(payload.data(), payload.size()) != stored_crc)
        throw Error("cache-corrupt", "checksum mismatch for entry: " + id);
    if (e.dtype == kF32) {
        if (nbytes % sizeof(float) != 0)
            throw Error("cache-corrupt", "f32 payload not float-aligned: " + id);
        e.f32.resize(nbytes / sizeof(float));
        std::memcpy(e.f32.data(), payload.data(), nbytes);
    } else {
        e.bytes = std::move(payload);
    }
    return e;
}

bool TensorFile::append(const std::string& id, uint8_t dtype,
                        std::span<const uint32_t> dims, const char* payload,
                        uint64_t nbytes) {
    if (!writable_)
        throw Error("cache-read-only", "container opened read-only: " + path_);
    if (dims.size() > kMaxRank)
        throw Error("cache-invalid", "rank too large for entry: " + id);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out)
        throw Error("io-error", "cannot append to container: " + path_);
    uint64_t offset = static_cast<uint64_t>(out.tellp());
    uint32_t id_len = static_cast<uint32_t>(id.size());
    uint8_t rank = static_cast<uint8_t>(dims.size());
    uint32_t crc = crc32_ieee(payload, nbytes);
    out.write(reinterpret_cast<const char*>(&id_len), sizeof(id_len));
    out.write(id.data(), id_len);
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (uint32_t d : dims) out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    out.write(reinterpret_cast<const char*>(&nbytes), sizeof(nbytes));
    out.write(payload, static_cast<std::streamsize>(nbytes));
    out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    out.flush();
    if (!out)
        throw Error("io-error", "append failed: " + path_);
    bool overwrote = index_.count(id) > 0;
    index_[id] = offset;
    return overwrote;
}

bool TensorFile::put_f32(const std::string& id, std::span<const uint32_t> dims,
                         std::span<const float> values) {
    uint64_t expected = 1;
    for (uint32_t d : dims) expected *= d;
    if (expected != values.size())
        throw Error("cache-invalid",
                    "value count does not match dims for entry: " + id);
    return append(id, kF32, dims, reinterpret_cast<const char*>(values.data()),
                  values.size() * sizeof(float));
}

bool TensorFile::put_bytes(const std::string& id, std::span<const uint32_t> dims,
                           std::string_view payload) {
    return append(id, kBytes, dims, payload.data(), payload.size());
}

}  // namespace momenta
