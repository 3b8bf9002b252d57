#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uda/tensor.hpp"

namespace uda::io {

// 8-bit PNG only. Images are exchanged as (3,H,W) tensors on the 1/255 grid,
// labels as flat uint8 rasters.

Tensor read_image_png(const std::string& path);
void write_image_png(const std::string& path, const Tensor& img);

struct GrayRaster {
    int h = 0, w = 0;
    std::vector<std::uint8_t> pixels;
};

GrayRaster read_gray_png(const std::string& path);
void write_gray_png(const std::string& path, const GrayRaster& raster);

}  // namespace uda::io
