#include "hexlens/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace hexlens {

std::vector<std::uint8_t> to_rgba8(const Image& img) {
    std::vector<std::uint8_t> out(img.rgba.size());
    for (std::size_t i = 0; i < img.rgba.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.rgba[i], 0.0f, 1.0f) * 255.0f));
    return out;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    auto pixels = to_rgba8(img);
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&pi, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw std::runtime_error(std::string("png encode failed: ") + pi.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&pi, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw std::runtime_error(std::string("png encode failed: ") + pi.message);
    out.resize(size);
    return out;
}

namespace {
std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}
}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
    auto bytes = encode_png(img);
    dump(path, bytes.data(), bytes.size());
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
        throw std::runtime_error(std::string("png decode failed: ") + pi.message);
    pi.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, pixels.data(), 0, nullptr))
        throw std::runtime_error(std::string("png decode failed: ") + pi.message);
    Image img(static_cast<int>(pi.width), static_cast<int>(pi.height));
    for (std::size_t i = 0; i < pixels.size(); ++i) img.rgba[i] = pixels[i] / 255.0f;
    return img;
}

Image read_png(const std::filesystem::path& path) { return decode_png(slurp(path)); }

void write_raw(const std::filesystem::path& path, const Image& img) {
    static_assert(std::endian::native == std::endian::little, "raw dumps assume a little-endian host");
    std::string header = "HXRAW " + std::to_string(img.width) + " " + std::to_string(img.height) + "\n";
    std::vector<char> buf(header.begin(), header.end());
    const char* data = reinterpret_cast<const char*>(img.rgba.data());
    buf.insert(buf.end(), data, data + img.rgba.size() * sizeof(float));
    dump(path, buf.data(), buf.size());
}

Image read_raw(const std::filesystem::path& path) {
    auto bytes = slurp(path);
    auto nl = std::find(bytes.begin(), bytes.end(), '\n');
    if (nl == bytes.end()) throw std::runtime_error("raw image without header: " + path.string());
    std::istringstream header(std::string(bytes.begin(), nl));
    std::string magic;
    int w = 0, h = 0;
    header >> magic >> w >> h;
    if (magic != "HXRAW" || w <= 0 || h <= 0) throw std::runtime_error("bad raw image header: " + path.string());
    Image img(w, h);
    std::size_t payload = img.rgba.size() * sizeof(float);
    if (static_cast<std::size_t>(bytes.end() - nl - 1) != payload)
        throw std::runtime_error("raw image size mismatch: " + path.string());
    std::memcpy(img.rgba.data(), &*(nl + 1), payload);
    return img;
}

}  // namespace hexlens
