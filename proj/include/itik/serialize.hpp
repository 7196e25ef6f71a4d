#ifndef ITIK_SERIALIZE_HPP
#define ITIK_SERIALIZE_HPP

#include <string>

#include "itik/types.hpp"

namespace itik {

/// Flat binary operator container: magic "ITI1", u32 rows, u32 cols (little
/// endian), then row-major complex128 entries.
void save_iti_binary(const std::string& path, const Mat& m);
Mat load_iti_binary(const std::string& path);

/// CSV inspection dump: header row, then "row,col,re,im" with 17 significant digits.
void save_matrix_csv(const std::string& path, const Mat& m);

/// Format a double with 17 significant digits (round-trip exact).
std::string fmt17(double x);

}  // namespace itik

#endif
