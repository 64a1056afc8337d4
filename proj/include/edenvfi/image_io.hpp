// 8-bit image files <-> [3,H,W] float tensors in [0,1]
#ifndef EDENVFI_IMAGE_IO_HPP
#define EDENVFI_IMAGE_IO_HPP

#include <string>

#include "edenvfi/errors.hpp"
#include "edenvfi/tensor.hpp"

namespace edenvfi {

// decodes PNG or binary PPM (P6), detected by content; values are byte/255
Tensor load_image(const std::string& path);

// clamps to [0,1], quantizes to 8 bit; format chosen by extension (.png / .ppm)
void save_image(const Tensor& img, const std::string& path);

} // namespace edenvfi

#endif
