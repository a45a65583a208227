#ifndef IPKP_PNG_HPP
#define IPKP_PNG_HPP

#include <string>

#include "ipkp/tensor.hpp"

namespace ipkp {

// 8-bit grayscale PNG of a [H, W] or [1, H, W] image with values in [0, 1]
// (clamped). Optional integer upscaling for easier eyeballing.
void write_png_gray(const std::string& path, const Tensor& img, int upscale = 1);

}  // namespace ipkp

#endif
