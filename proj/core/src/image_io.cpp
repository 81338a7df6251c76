#include "faac/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "faac/common.hpp"

namespace faac {

ImageU8 to_image_u8(const double* values, int channels, int height, int width) {
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(channels) * height * width);
    const int64_t plane = int64_t(height) * width;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                double v = values[c * plane + int64_t(y) * width + x];
                v = std::clamp(v, 0.0, 1.0);
                img.at(y, x, c) = static_cast<uint8_t>(std::lround(v * 255.0));
            }
    return img;
}

std::vector<double> from_image_u8(const ImageU8& img) {
    const int64_t plane = int64_t(img.height) * img.width;
    std::vector<double> out(static_cast<size_t>(img.channels) * plane);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out[c * plane + int64_t(y) * img.width + x] = img.at(y, x, c) / 255.0;
    return out;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, crc);
}

std::vector<uint8_t> zlib_pack(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> packed(bound);
    FAAC_CHECK_INVARIANT(
        compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK,
        "png: zlib compress failed");
    packed.resize(bound);
    return packed;
}

uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
    int p = int(a) + int(b) - int(c);
    int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

std::vector<uint8_t> encode_png(const ImageU8& img) {
    FAAC_REQUIRE(img.channels == 1 || img.channels == 3, "png: only gray or RGB supported");
    FAAC_REQUIRE(img.width > 0 && img.height > 0, "png: empty image");
    FAAC_REQUIRE(img.pixels.size() == size_t(img.width) * img.height * img.channels,
                 "png: pixel buffer size mismatch");

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(img.width));
    put_u32(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                                 // bit depth
    ihdr.push_back(img.channels == 3 ? 2 : 0);         // color type
    ihdr.push_back(0);                                 // compression
    ihdr.push_back(0);                                 // filter method
    ihdr.push_back(0);                                 // no interlace
    put_chunk(out, "IHDR", ihdr);

    const size_t stride = size_t(img.width) * img.channels;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter type none
        raw.insert(raw.end(), img.pixels.begin() + y * stride, img.pixels.begin() + (y + 1) * stride);
    }
    put_chunk(out, "IDAT", zlib_pack(raw));
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
    auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("png: cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("png: write failed: " + path.string());
}

ImageU8 read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("png: cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw Error("png: bad signature: " + path.string());

    ImageU8 img;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= bytes.size()) {
        uint32_t len = get_u32(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* data = &bytes[pos + 8];
        if (pos + 12 + len > bytes.size()) throw Error("png: truncated chunk: " + path.string());
        if (std::memcmp(type, "IHDR", 4) == 0) {
            img.width = static_cast<int>(get_u32(data));
            img.height = static_cast<int>(get_u32(data + 4));
            int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
                throw Error("png: unsupported format (need 8-bit gray/RGB): " + path.string());
            img.channels = color == 2 ? 3 : 1;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0) throw Error("png: missing IHDR: " + path.string());

    const size_t stride = size_t(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw Error("png: zlib inflate failed: " + path.string());

    img.pixels.resize(stride * img.height);
    const int bpp = img.channels;
    for (int y = 0; y < img.height; ++y) {
        uint8_t filter = raw[y * (stride + 1)];
        const uint8_t* src = &raw[y * (stride + 1) + 1];
        uint8_t* dst = &img.pixels[y * stride];
        const uint8_t* prev = y > 0 ? &img.pixels[(y - 1) * stride] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            uint8_t a = i >= size_t(bpp) ? dst[i - bpp] : 0;
            uint8_t b = prev ? prev[i] : 0;
            uint8_t c = (prev && i >= size_t(bpp)) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (int(a) + int(b)) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw Error("png: bad filter byte: " + path.string());
            }
            dst[i] = uint8_t(v);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// GIF
// ---------------------------------------------------------------------------

namespace {

// 6x7x6 levels RGB cube (252 entries), index 252 padded to 256.
uint8_t gif_quantize(uint8_t r, uint8_t g, uint8_t b) {
    int ri = (r * 5 + 127) / 255;
    int gi = (g * 6 + 127) / 255;
    int bi = (b * 5 + 127) / 255;
    return static_cast<uint8_t>((ri * 7 + gi) * 6 + bi);
}

struct BitPacker {
    std::vector<uint8_t> bytes;
    uint32_t acc = 0;
    int nbits = 0;
    void put(uint32_t code, int width) {
        acc |= code << nbits;
        nbits += width;
        while (nbits >= 8) {
            bytes.push_back(uint8_t(acc & 0xff));
            acc >>= 8;
            nbits -= 8;
        }
    }
    void flush() {
        if (nbits > 0) bytes.push_back(uint8_t(acc & 0xff));
        acc = 0;
        nbits = 0;
    }
};

// plain LZW with dictionary reset at 4096 entries
std::vector<uint8_t> gif_lzw(const std::vector<uint8_t>& indices, int min_code_size) {
    const int clear_code = 1 << min_code_size;
    const int end_code = clear_code + 1;
    BitPacker bp;

    std::vector<int32_t> table;  // table[prefix * 256 + next] -> code
    auto reset = [&]() { table.assign(4096 * 256, -1); };
    reset();

    int code_size = min_code_size + 1;
    int next_code = end_code + 1;
    bp.put(uint32_t(clear_code), code_size);

    int32_t prefix = -1;
    for (uint8_t sym : indices) {
        if (prefix < 0) {
            prefix = sym;
            continue;
        }
        int32_t& slot = table[size_t(prefix) * 256 + sym];
        if (slot >= 0) {
            prefix = slot;
            continue;
        }
        bp.put(uint32_t(prefix), code_size);
        slot = next_code++;
        if (next_code > (1 << code_size) && code_size < 12) ++code_size;
        if (next_code >= 4096) {
            bp.put(uint32_t(clear_code), code_size);
            reset();
            code_size = min_code_size + 1;
            next_code = end_code + 1;
        }
        prefix = sym;
    }
    if (prefix >= 0) bp.put(uint32_t(prefix), code_size);
    bp.put(uint32_t(end_code), code_size);
    bp.flush();
    return bp.bytes;
}

}  // namespace

void write_gif(const std::filesystem::path& path, const std::vector<ImageU8>& frames, int delay_cs) {
    FAAC_REQUIRE(!frames.empty(), "gif: no frames");
    const int w = frames[0].width, h = frames[0].height;
    for (auto& fr : frames)
        FAAC_REQUIRE(fr.width == w && fr.height == h, "gif: frame size mismatch");

    std::vector<uint8_t> out;
    auto put16 = [&](int v) {
        out.push_back(uint8_t(v & 0xff));
        out.push_back(uint8_t((v >> 8) & 0xff));
    };

    const char* hdr = "GIF89a";
    out.insert(out.end(), hdr, hdr + 6);
    put16(w);
    put16(h);
    out.push_back(0xf7);  // global color table, 256 entries, 8-bit color
    out.push_back(0);     // background color index
    out.push_back(0);     // aspect

    for (int i = 0; i < 256; ++i) {
        if (i < 252) {
            int bi = i % 6, gi = (i / 6) % 7, ri = i / 42;
            out.push_back(uint8_t(ri * 255 / 5));
            out.push_back(uint8_t(gi * 255 / 6));
            out.push_back(uint8_t(bi * 255 / 5));
        } else {
            out.push_back(0);
            out.push_back(0);
            out.push_back(0);
        }
    }

    // netscape loop-forever extension
    const uint8_t loop[] = {0x21, 0xff, 0x0b, 'N', 'E', 'T', 'S', 'C', 'A', 'P', 'E',
                            '2',  '.',  '0',  0x03, 0x01, 0x00, 0x00, 0x00};
    out.insert(out.end(), loop, loop + sizeof(loop));

    for (const auto& fr : frames) {
        out.push_back(0x21);  // graphics control
        out.push_back(0xf9);
        out.push_back(0x04);
        out.push_back(0x00);
        put16(delay_cs);
        out.push_back(0x00);
        out.push_back(0x00);

        out.push_back(0x2c);  // image descriptor
        put16(0);
        put16(0);
        put16(w);
        put16(h);
        out.push_back(0x00);

        std::vector<uint8_t> indices(size_t(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                uint8_t r, g, b;
                if (fr.channels == 3) {
                    r = fr.at(y, x, 0);
                    g = fr.at(y, x, 1);
                    b = fr.at(y, x, 2);
                } else {
                    r = g = b = fr.at(y, x, 0);
                }
                indices[size_t(y) * w + x] = gif_quantize(r, g, b);
            }

        const int min_code_size = 8;
        out.push_back(uint8_t(min_code_size));
        auto packed = gif_lzw(indices, min_code_size);
        size_t off = 0;
        while (off < packed.size()) {
            size_t n = std::min<size_t>(255, packed.size() - off);
            out.push_back(uint8_t(n));
            out.insert(out.end(), packed.begin() + off, packed.begin() + off + n);
            off += n;
        }
        out.push_back(0x00);  // block terminator
    }
    out.push_back(0x3b);  // trailer

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("gif: cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("gif: write failed: " + path.string());
}

}  // namespace faac
