#include "itik/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace itik {

namespace {
void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
void put_f64(std::ostream& os, double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}
double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &u, 8);
    return x;
}
}  // namespace

void save_iti_binary(const std::string& path, const Mat& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("save_iti_binary: cannot open " + path);
    os.write("ITI1", 4);
    put_u32(os, static_cast<std::uint32_t>(m.rows()));
    put_u32(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_f64(os, m(r, c).real());
            put_f64(os, m(r, c).imag());
        }
    if (!os) throw Error("save_iti_binary: write failed for " + path);
}

Mat load_iti_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("load_iti_binary: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "ITI1", 4) != 0)
        throw Error("load_iti_binary: bad magic in " + path);
    const std::uint32_t rows = get_u32(is), cols = get_u32(is);
    Mat m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) {
            const double re = get_f64(is);
            const double im = get_f64(is);
            m(r, c) = cplx(re, im);
        }
    if (!is) throw Error("load_iti_binary: truncated file " + path);
    return m;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void save_matrix_csv(const std::string& path, const Mat& m) {
    std::ofstream os(path);
    if (!os) throw Error("save_matrix_csv: cannot open " + path);
    os << "row,col,re,im\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            os << r << "," << c << "," << fmt17(m(r, c).real()) << "," << fmt17(m(r, c).imag())
               << "\n";
}

}  // namespace itik
