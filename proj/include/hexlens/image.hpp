#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hexlens {

/// Float RGBA image, row-major from the top-left pixel.
struct Image {
    int width = 0, height = 0;
    std::vector<float> rgba;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, 0.0f) {}

    float* at(int x, int y) { return rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4; }
    const float* at(int x, int y) const { return rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4; }
    bool operator==(const Image&) const = default;
};

/// 8-bit RGBA, each channel round(clamp(v, 0, 1) * 255).
std::vector<std::uint8_t> to_rgba8(const Image& img);

std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

/// Raw dump: ASCII header "HXRAW <w> <h>\n" followed by little-endian float32 RGBA.
void write_raw(const std::filesystem::path& path, const Image& img);
Image read_raw(const std::filesystem::path& path);

/// Decodes 8-bit RGBA PNGs as written by encode_png (used by golden tests).
Image decode_png(const std::vector<std::uint8_t>& bytes);
Image read_png(const std::filesystem::path& path);

}  // namespace hexlens
