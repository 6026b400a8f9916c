#pragma once

#include "tensor.hpp"

namespace dynrec {

/// Centered orthonormal 2D DFT over (row, col) of every (coil, time) slice.
/// DC sits at index floor(n/2) on both axes; forward and inverse each scale
/// by 1/sqrt(n_row*n_col) so the pair is unitary.
ComplexTensor4 fft2c(const ComplexTensor4 &t);
ComplexTensor4 ifft2c(const ComplexTensor4 &t);

} // namespace dynrec
