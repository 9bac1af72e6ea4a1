#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace momenta {

// Record-oriented binary container shared by the embedding cache and model
// checkpoints. Layout (all integers little-endian):
//
//   magic "MCF1"
//   entry*:
//     u32  id_len, id bytes (UTF-8)
//     u8   dtype            0 = f32 tensor, 1 = raw bytes
//     u8   rank             (<= 4; bytes entries use rank 1)
//     u32  dims[rank]
//     u64  payload length in bytes
//     payload               f32 values little-endian, or raw bytes
//     u32  crc32 of the payload
//
// Re-putting an id appends a new entry; the latest one wins on read.
class TensorFile {
public:
    struct Entry {
        uint8_t dtype = 0;
        std::vector<uint32_t> dims;
        std::vector<float> f32;
        std::string bytes;
    };

    static constexpr uint8_t kF32 = 0;
    static constexpr uint8_t kBytes = 1;

    TensorFile() = default;

    // Creates the file when absent; existing entries are indexed.
    static TensorFile open_rw(const std::string& path);
    // Fails when the file does not exist.
    static TensorFile open_ro(const std::string& path);

    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    std::vector<std::string> ids() const;

    // Missing id yields nullopt; a checksum or framing failure throws
    // "cache-corrupt" naming the entry.
    std::optional<Entry> get(const std::string& id) const;

    // Returns true when an existing id was overwritten.
    bool put_f32(const std::string& id, std::span<const uint32_t> dims,
                 std::span<const float> values);
    bool put_bytes(const std::string& id, std::span<const uint32_t> dims,
                   std::string_view payload);

    const std::string& path() const { return path_; }

private:
    bool append(const std::string& id, uint8_t dtype, std::span<const uint32_t> dims,
                const char* payload, uint64_t nbytes);
    void scan();

    std::string path_;
    bool writable_ = false;
    std::map<std::string, uint64_t> index_;  // id -> offset of latest entry
};

uint32_t crc32_ieee(const void* data, size_t length);

}  // namespace momenta
