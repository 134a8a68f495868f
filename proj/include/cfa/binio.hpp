#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cfa/common.hpp"

namespace cfa {

// Little-endian binary IO for the .bin artifacts (feature files, bank,
// checkpoints). Byte order is explicit so files are portable.

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& buf, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(buf, v);
}

inline void put_f64(std::string& buf, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(buf, v);
}

class BinReader {
  public:
    BinReader(std::string data, std::string name)
        : data_(std::move(data)), name_(std::move(name)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }

    double f64() {
        uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }

    size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

  private:
    void need(size_t n) {
        if (pos_ + n > data_.size())
            throw DataFormatError(name_ + ": truncated (need " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos_) + ")");
    }

    std::string data_;
    std::string name_;
    size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to " + path.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, text);
}

}  // namespace cfa
