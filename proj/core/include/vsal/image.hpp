#pragma once

#include <filesystem>
#include <iosfwd>

#include "vsal/tensor.hpp"

namespace vsal {

// Binary PGM (P5, maxval 255). Grayscale tensors are rank 2 [H][W] with
// values in [0,1]; color tensors rank 3 [3][H][W].

void write_pgm(const Tensor& gray, std::ostream& out);
Tensor read_pgm(std::istream& in);

void write_pgm_file(const Tensor& gray, const std::filesystem::path& path);
Tensor read_pgm_file(const std::filesystem::path& path);

void write_ppm(const Tensor& rgb, std::ostream& out);
Tensor read_ppm(std::istream& in);

// 0.299 R + 0.587 G + 0.114 B
Tensor to_grayscale(const Tensor& rgb);

// Bilinear resize of a rank-2 image to the given extent.
Tensor resize_bilinear(const Tensor& gray, int out_h, int out_w);

}  // namespace vsal
