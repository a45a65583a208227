#ifndef IPKP_WIRE_HPP
#define IPKP_WIRE_HPP

// Little-endian binary I/O helpers shared by the container formats.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ipkp/common.hpp"

namespace ipkp::wire {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_f32_blob(std::ostream& os, const std::vector<float>& v) {
    std::vector<unsigned char> buf(v.size() * 4);
    for (size_t i = 0; i < v.size(); ++i) {
        uint32_t u = std::bit_cast<uint32_t>(v[i]);
        buf[i * 4 + 0] = static_cast<unsigned char>(u);
        buf[i * 4 + 1] = static_cast<unsigned char>(u >> 8);
        buf[i * 4 + 2] = static_cast<unsigned char>(u >> 16);
        buf[i * 4 + 3] = static_cast<unsigned char>(u >> 24);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

// Sequential reader that reports truncation with the path and what was being
// read at the time.
struct Reader {
    std::ifstream in;
    std::string path;

    Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("cannot open " + p);
    }

    void need(void* dst, size_t n, const char* what) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) {
            throw DataError(path + ": truncated while reading " + std::string(what));
        }
    }

    uint32_t u32(const char* what) {
        unsigned char b[4];
        need(b, 4, what);
        return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
               static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    }

    uint32_t u32_be(const char* what) {
        unsigned char b[4];
        need(b, 4, what);
        return static_cast<uint32_t>(b[3]) | static_cast<uint32_t>(b[2]) << 8 |
               static_cast<uint32_t>(b[1]) << 16 | static_cast<uint32_t>(b[0]) << 24;
    }

    uint64_t u64(const char* what) {
        uint64_t lo = u32(what);
        uint64_t hi = u32(what);
        return lo | hi << 32;
    }

    std::string str(const char* what) {
        uint32_t n = u32(what);
        if (n > (1u << 20)) throw DataError(path + ": implausible string length in " + what);
        std::string s(n, '\0');
        need(s.data(), n, what);
        return s;
    }

    void f32_blob(std::vector<float>& out, const char* what) {
        std::vector<unsigned char> buf(out.size() * 4);
        need(buf.data(), buf.size(), what);
        for (size_t i = 0; i < out.size(); ++i) {
            uint32_t u = static_cast<uint32_t>(buf[i * 4 + 0]) |
                         static_cast<uint32_t>(buf[i * 4 + 1]) << 8 |
                         static_cast<uint32_t>(buf[i * 4 + 2]) << 16 |
                         static_cast<uint32_t>(buf[i * 4 + 3]) << 24;
            out[i] = std::bit_cast<float>(u);
        }
    }
};

}  // namespace ipkp::wire

#endif
