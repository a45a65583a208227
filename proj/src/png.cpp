#include "png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace ipkp {

namespace {

void put_u32_be(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

}  // namespace

void write_png_gray(const std::string& path, const Tensor& img, int upscale) {
    const Tensor* src = &img;
    if (!(img.ndim() == 2 || (img.ndim() == 3 && img.dim(0) == 1))) {
        throw ShapeError("write_png_gray: expects [H, W] or [1, H, W], got " + img.shape_str());
    }
    if (upscale < 1) throw ConfigError("write_png_gray: upscale must be >= 1");
    int h = img.dim(img.ndim() - 2), w = img.dim(img.ndim() - 1);
    int H = h * upscale, W = w * upscale;

    // Filter byte 0 at the start of every scanline.
    std::vector<unsigned char> raw(static_cast<size_t>(H) * (static_cast<size_t>(W) + 1));
    for (int r = 0; r < H; ++r) {
        unsigned char* line = raw.data() + static_cast<size_t>(r) * (W + 1);
        line[0] = 0;
        const float* srow = src->ptr() + static_cast<size_t>(r / upscale) * w;
        for (int c = 0; c < W; ++c) {
            float v = std::clamp(srow[c / upscale], 0.0f, 1.0f);
            line[c + 1] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> zdata(zlen);
    if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw Error("write_png_gray: deflate failed");
    }
    zdata.resize(zlen);

    std::vector<unsigned char> out;
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);
    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(W));
    put_u32_be(ihdr, static_cast<uint32_t>(H));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw DataError("write failed for " + path);
}

}  // namespace ipkp
