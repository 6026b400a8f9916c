#pragma once

#include "tensor.hpp"

#include <string>
#include <vector>

namespace dynrec {

/// 8-bit binary PGM, header exactly "P5\n<w> <h>\n255\n". Values are expected
/// in [0, 1] and are rounded to the nearest level.
void write_pgm(const std::string &path, const std::vector<double> &pixels, std::int64_t rows,
               std::int64_t cols);

/// One PGM per frame (prefix_fNNN.pgm), normalised by the global magnitude
/// maximum of the sequence.
void export_frames(const ComplexTensor4 &x, const std::string &prefix);

enum class ProfileAxis { Row, Col };

/// Spatiotemporal profile along a fixed row or column: output is
/// n_time x n_col (Row) or n_time x n_row (Col), one line per frame.
std::vector<double> xt_profile(const ComplexTensor4 &x, ProfileAxis axis, std::int64_t index,
                               std::int64_t *rows, std::int64_t *cols);

} // namespace dynrec
