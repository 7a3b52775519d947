#pragma once

#include <cstdint>

#include "shardsim/bytes.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/error.hpp"

namespace shardsim {

// Canonical serialization used for every hashed record: fixed field order,
// big-endian fixed-width integers, u32-length-prefixed byte fields.

class Writer {
  public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 3; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 7; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    }
    void raw(ByteSpan data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
    void var_bytes(ByteSpan data) {
        u32(static_cast<uint32_t>(data.size()));
        raw(data);
    }
    void digest(const Digest& d) { raw(d.span()); }

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

  private:
    Bytes buf_;
};

class Reader {
  public:
    explicit Reader(ByteSpan data) : data_(data) {}

    uint8_t u8() { return take(1)[0]; }
    uint32_t u32() {
        auto b = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | b[i];
        return v;
    }
    uint64_t u64() {
        auto b = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
        return v;
    }
    Bytes var_bytes() {
        uint32_t n = u32();
        auto b = take(n);
        return Bytes(b.begin(), b.end());
    }
    Digest digest() { return Digest::from_span(take(32)); }

    bool done() const { return pos_ == data_.size(); }
    size_t remaining() const { return data_.size() - pos_; }

  private:
    ByteSpan take(size_t n) {
        if (pos_ + n > data_.size()) throw Error("serial: truncated input");
        ByteSpan s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    ByteSpan data_;
    size_t pos_ = 0;
};

}  // namespace shardsim
