#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexlens/image.hpp"
#include "hexlens/shading.hpp"

namespace hexlens {

struct FragmentRecord {
    std::uint32_t pixel = 0;  // row-major index within the buffer's region
    std::uint32_t seq = 0;    // submission order, breaks depth ties
    float depth = 0.0f;       // normalized, finite
    float r = 0.0f, g = 0.0f, b = 0.0f;  // straight (non-premultiplied) colour
    float a = 0.0f;           // [0,1]
    FragmentKind kind = FragmentKind::ContextFace;
};

/// Front-to-back order: ascending depth, then submission order.
inline bool front_to_back(const FragmentRecord& x, const FragmentRecord& y) {
    if (x.depth != y.depth) return x.depth < y.depth;
    return x.seq < y.seq;
}

class CapacityError : public std::runtime_error {
public:
    CapacityError(std::size_t required, std::size_t capacity);
    std::size_t required() const { return required_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t required_, capacity_;
};

/// Fragment lists for a rectangular pixel region. Fragments are appended in
/// submission order and grouped per pixel by finalize(); a capacity of 0
/// means unbounded.
class FragmentBuffer {
public:
    FragmentBuffer() = default;
    FragmentBuffer(int x0, int y0, int width, int height, std::size_t capacity = 0);

    void push(int x, int y, float depth, const Rgb& straight, float alpha, FragmentKind kind);
    /// Appends a record as is (the caller assigns pixel and seq).
    void push_record(const FragmentRecord& rec);

    /// Groups fragments by pixel, keeping submission order inside each pixel.
    void finalize();
    bool finalized() const { return finalized_; }

    std::span<const FragmentRecord> pixel(int x, int y) const;
    std::span<const FragmentRecord> records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool over_capacity() const { return capacity_ != 0 && records_.size() > capacity_; }

    int x0() const { return x0_; }
    int y0() const { return y0_; }
    int width() const { return width_; }
    int height() const { return height_; }

    void clear();

private:
    int x0_ = 0, y0_ = 0, width_ = 0, height_ = 0;
    std::size_t capacity_ = 0;
    std::uint32_t next_seq_ = 0;
    std::vector<FragmentRecord> records_;
    std::vector<std::uint32_t> offsets_;
    bool finalized_ = false;
};

/// Default early-termination threshold for accumulated opacity.
inline constexpr double kOpaqueThreshold = 0.999;

/// Composites one pixel's fragments front to back
///   C += (1 - A) a c,  A += (1 - A) a
/// stopping once A > opaque_threshold, then fills (1 - A) with the background.
/// Uses a binary heap so only the consumed prefix is ordered. `scratch` is
/// reused storage.
Rgba composite_pixel(std::span<const FragmentRecord> fragments, const Rgb& background,
                     std::vector<FragmentRecord>& scratch, double opaque_threshold = kOpaqueThreshold);

/// Composites every pixel of a finalized buffer into `image` at the buffer's
/// region. Throws CapacityError when the buffer holds more fragments than its
/// capacity.
void sort_and_composite(const FragmentBuffer& buffer, const Rgb& background, Image& image,
                        double opaque_threshold = kOpaqueThreshold);

/// Convenience overload returning an image of exactly the buffer's size.
Image sort_and_composite(const FragmentBuffer& buffer, const Rgb& background);

}  // namespace hexlens
