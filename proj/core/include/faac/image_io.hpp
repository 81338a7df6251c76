#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace faac {

// 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t& at(int y, int x, int c) {
        return pixels[static_cast<size_t>((int64_t(y) * width + x) * channels + c)];
    }
    uint8_t at(int y, int x, int c) const {
        return pixels[static_cast<size_t>((int64_t(y) * width + x) * channels + c)];
    }
};

// Quantizes values in [0, 1] (clamped) to 8 bits. `values` is planar
// [channels, height, width], the layout the rest of the code uses.
ImageU8 to_image_u8(const double* values, int channels, int height, int width);
std::vector<double> from_image_u8(const ImageU8& img);  // planar, in [0, 1]

// Minimal PNG codec: 8-bit gray or RGB, zlib-compressed, deterministic
// output bytes. The reader handles any row filter but only the color
// types this writer emits.
void write_png(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_png(const std::filesystem::path& path);
std::vector<uint8_t> encode_png(const ImageU8& img);

// Animated GIF preview: fixed 6x7x6 color cube, LZW-coded, loops forever.
void write_gif(const std::filesystem::path& path, const std::vector<ImageU8>& frames,
               int delay_cs = 12);

}  // namespace faac
