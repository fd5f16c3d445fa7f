#include "nbmc/dataio.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nbmc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::ifstream open_for_read(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}' for reading", path.string()));
    return in;
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

// Whitespace/comment-aware token reader for PGM headers and P2 bodies.
class PgmReader {
public:
    explicit PgmReader(std::string data) : data_(std::move(data)) {}

    long next_int(std::string_view what) {
        skip_space_and_comments();
        const char* begin = data_.data() + pos_;
        const char* end = data_.data() + data_.size();
        long value = 0;
        const auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{} || ptr == begin) {
            throw ParseError(fmt::format("PGM: expected {} at byte {}", what, pos_));
        }
        pos_ += static_cast<std::size_t>(ptr - begin);
        return value;
    }

    // The single whitespace byte after maxval precedes binary data.
    void skip_one_whitespace() {
        if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            throw ParseError("PGM: missing whitespace before pixel data");
        }
        ++pos_;
    }

    std::string_view rest() const { return std::string_view(data_).substr(pos_); }

private:
    void skip_space_and_comments() {
        while (pos_ < data_.size()) {
            const char c = data_[pos_];
            if (c == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string data_;
    std::size_t pos_ = 2;  // past the magic number
};

}  // namespace

DenseMatrix load_matrix_csv(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    std::vector<double> values;
    Index cols = -1;
    Index rows = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        Index count = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = body.find(',', start);
            const std::string_view token =
                trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
                throw ParseError(fmt::format("{}:{}: '{}' is not a finite number", path.string(), line_no, token));
            }
            values.push_back(v);
            ++count;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols < 0) {
            cols = count;
        } else if (count != cols) {
            throw ParseError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no, cols, count));
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(fmt::format("{}: no data rows", path.string()));
    return make_matrix(rows, cols, values);
}

void save_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    std::string buffer;
    std::array<char, 32> num{};
    for (Index i = 0; i < m.rows(); ++i) {
        buffer.clear();
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) buffer.push_back(',');
            const auto res = std::to_chars(num.data(), num.data() + num.size(), m(i, j));
            buffer.append(num.data(), res.ptr);
        }
        buffer.push_back('\n');
        out << buffer;
    }
    if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

DenseMatrix load_pgm(const std::filesystem::path& path) {
    auto in = open_for_read(path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5')) {
        throw ParseError(fmt::format("{}: not a PGM file (magic must be P2 or P5)", path.string()));
    }
    const bool binary = data[1] == '5';
    PgmReader reader(std::move(data));
    const long width = reader.next_int("width");
    const long height = reader.next_int("height");
    const long max_val = reader.next_int("maxval");
    if (width <= 0 || height <= 0) throw ParseError(fmt::format("{}: bad dimensions {}x{}", path.string(), width, height));
    if (max_val <= 0 || max_val > 65535) throw ParseError(fmt::format("{}: maxval {} out of range", path.string(), max_val));

    DenseMatrix img(height, width);
    if (!binary) {
        for (long i = 0; i < height; ++i)
            for (long j = 0; j < width; ++j) {
                const long v = reader.next_int("pixel value");
                if (v < 0 || v > max_val) throw ParseError(fmt::format("{}: pixel {} exceeds maxval", path.string(), v));
                img(i, j) = static_cast<double>(v);
            }
        return img;
    }
    reader.skip_one_whitespace();
    const std::string_view raw = reader.rest();
    const std::size_t bytes_per = max_val > 255 ? 2 : 1;
    const std::size_t needed = static_cast<std::size_t>(width * height) * bytes_per;
    if (raw.size() < needed) {
        throw ParseError(fmt::format("{}: truncated pixel data ({} of {} bytes)", path.string(), raw.size(), needed));
    }
    std::size_t pos = 0;
    for (long i = 0; i < height; ++i)
        for (long j = 0; j < width; ++j) {
            unsigned v = static_cast<unsigned char>(raw[pos++]);
            if (bytes_per == 2) v = (v << 8) | static_cast<unsigned char>(raw[pos++]);
            img(i, j) = static_cast<double>(v);
        }
    return img;
}

void save_pgm(const DenseMatrix& m, const std::filesystem::path& path, int max_val) {
    if (max_val <= 0 || max_val > 65535) throw std::invalid_argument(fmt::format("maxval {} out of range", max_val));
    require_finite(m, "image");
    auto out = open_for_write(path, std::ios::binary);
    out << fmt::format("P5\n{} {}\n{}\n", m.cols(), m.rows(), max_val);
    std::string raw;
    raw.reserve(static_cast<std::size_t>(m.size()) * (max_val > 255 ? 2 : 1));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            const auto v = static_cast<unsigned>(std::clamp(std::round(m(i, j)), 0.0, static_cast<double>(max_val)));
            if (max_val > 255) raw.push_back(static_cast<char>(v >> 8));
            raw.push_back(static_cast<char>(v & 0xff));
        }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

PatchLayout PatchLayout::make(Index image_rows, Index image_cols, Index patch_size) {
    if (patch_size <= 0 || image_rows <= 0 || image_cols <= 0 || image_rows % patch_size != 0 ||
        image_cols % patch_size != 0) {
        throw std::invalid_argument(
            fmt::format("patch size {} does not divide a {}x{} image", patch_size, image_rows, image_cols));
    }
    return {image_rows, image_cols, patch_size};
}

DenseMatrix patchify(const DenseMatrix& image, Index patch_size) {
    const auto layout = PatchLayout::make(image.rows(), image.cols(), patch_size);
    const Index p = patch_size;
    DenseMatrix out(layout.patch_dim(), layout.patch_count());
    for (Index br = 0; br < layout.patches_per_col(); ++br)
        for (Index bc = 0; bc < layout.patches_per_row(); ++bc) {
            const Index k = br * layout.patches_per_row() + bc;
            out.col(k) = image.block(br * p, bc * p, p, p).reshaped();
        }
    return out;
}

DenseMatrix unpatchify(const DenseMatrix& patches, const PatchLayout& layout) {
    const auto checked = PatchLayout::make(layout.image_rows, layout.image_cols, layout.patch_size);
    if (patches.rows() != checked.patch_dim() || patches.cols() != checked.patch_count()) {
        throw std::invalid_argument(fmt::format("patch matrix is {}x{} but the layout needs {}x{}", patches.rows(),
                                                patches.cols(), checked.patch_dim(), checked.patch_count()));
    }
    const Index p = checked.patch_size;
    DenseMatrix image(checked.image_rows, checked.image_cols);
    for (Index br = 0; br < checked.patches_per_col(); ++br)
        for (Index bc = 0; bc < checked.patches_per_row(); ++bc) {
            const Index k = br * checked.patches_per_row() + bc;
            image.block(br * p, bc * p, p, p) = patches.col(k).reshaped(p, p);
        }
    return image;
}

}  // namespace nbmc
