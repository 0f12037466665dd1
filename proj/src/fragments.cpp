#include "hexlens/fragments.hpp"

#include <algorithm>

namespace hexlens {

CapacityError::CapacityError(std::size_t required, std::size_t capacity)
    : std::runtime_error("fragment capacity exceeded: required " + std::to_string(required) + ", capacity " +
                         std::to_string(capacity)),
      required_(required),
      capacity_(capacity) {}

FragmentBuffer::FragmentBuffer(int x0, int y0, int width, int height, std::size_t capacity)
    : x0_(x0), y0_(y0), width_(width), height_(height), capacity_(capacity) {}

void FragmentBuffer::push(int x, int y, float depth, const Rgb& straight, float alpha, FragmentKind kind) {
    FragmentRecord rec;
    rec.pixel = static_cast<std::uint32_t>((y - y0_) * width_ + (x - x0_));
    rec.seq = next_seq_++;
    rec.depth = depth;
    rec.r = static_cast<float>(straight.x);
    rec.g = static_cast<float>(straight.y);
    rec.b = static_cast<float>(straight.z);
    rec.a = alpha;
    rec.kind = kind;
    records_.push_back(rec);
    finalized_ = false;
}

void FragmentBuffer::push_record(const FragmentRecord& rec) {
    records_.push_back(rec);
    next_seq_ = std::max(next_seq_, rec.seq + 1);
    finalized_ = false;
}

void FragmentBuffer::finalize() {
    const std::size_t pixels = static_cast<std::size_t>(width_) * height_;
    offsets_.assign(pixels + 1, 0);
    for (const auto& r : records_) ++offsets_[r.pixel + 1];
    for (std::size_t i = 0; i < pixels; ++i) offsets_[i + 1] += offsets_[i];
    std::vector<FragmentRecord> sorted(records_.size());
    std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& r : records_) sorted[cursor[r.pixel]++] = r;
    records_ = std::move(sorted);
    finalized_ = true;
}

std::span<const FragmentRecord> FragmentBuffer::pixel(int x, int y) const {
    std::size_t p = static_cast<std::size_t>(y - y0_) * width_ + (x - x0_);
    return {records_.data() + offsets_[p], records_.data() + offsets_[p + 1]};
}

void FragmentBuffer::clear() {
    records_.clear();
    offsets_.clear();
    next_seq_ = 0;
    finalized_ = false;
}

Rgba composite_pixel(std::span<const FragmentRecord> fragments, const Rgb& background,
                     std::vector<FragmentRecord>& scratch, double opaque_threshold) {
    scratch.assign(fragments.begin(), fragments.end());
    auto later = [](const FragmentRecord& x, const FragmentRecord& y) { return front_to_back(y, x); };
    std::make_heap(scratch.begin(), scratch.end(), later);
    double r = 0.0, g = 0.0, b = 0.0, acc = 0.0;
    auto end = scratch.end();
    while (end != scratch.begin() && !(acc > opaque_threshold)) {
        std::pop_heap(scratch.begin(), end, later);
        --end;
        const FragmentRecord& f = *end;
        double w = (1.0 - acc) * f.a;
        r += w * f.r;
        g += w * f.g;
        b += w * f.b;
        acc += w;
    }
    double rest = 1.0 - acc;
    return {{r + rest * background.x, g + rest * background.y, b + rest * background.z}, 1.0};
}

void sort_and_composite(const FragmentBuffer& buffer, const Rgb& background, Image& image, double opaque_threshold) {
    if (buffer.over_capacity()) throw CapacityError(buffer.size(), buffer.capacity());
    if (!buffer.finalized()) throw std::logic_error("fragment buffer must be finalized before compositing");
    std::vector<FragmentRecord> scratch;
    for (int y = 0; y < buffer.height(); ++y)
        for (int x = 0; x < buffer.width(); ++x) {
            int gx = buffer.x0() + x, gy = buffer.y0() + y;
            Rgba c = composite_pixel(buffer.pixel(gx, gy), background, scratch, opaque_threshold);
            float* px = image.at(gx, gy);
            px[0] = static_cast<float>(c.rgb.x);
            px[1] = static_cast<float>(c.rgb.y);
            px[2] = static_cast<float>(c.rgb.z);
            px[3] = static_cast<float>(c.a);
        }
}

Image sort_and_composite(const FragmentBuffer& buffer, const Rgb& background) {
    Image img(buffer.x0() + buffer.width(), buffer.y0() + buffer.height());
    sort_and_composite(buffer, background, img);
    return img;
}

}  // namespace hexlens
