#pragma once

#include "nbmc/linalg.hpp"

#include <filesystem>
#include <stdexcept>

namespace nbmc {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Comma-delimited rows; lines starting with '#' and blank lines are skipped.
/// Throws ParseError naming the offending line for ragged rows or bad tokens.
DenseMatrix load_matrix_csv(const std::filesystem::path& path);
/// Writes shortest round-trip representations, so load(save(m)) == m bitwise.
void save_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path);

/// Reads P2 (ASCII) or P5 (binary, 8- or 16-bit big-endian) graymaps.
DenseMatrix load_pgm(const std::filesystem::path& path);
/// Writes a binary P5 graymap; entries are rounded and clamped to [0, max_val].
void save_pgm(const DenseMatrix& m, const std::filesystem::path& path, int max_val = 255);

/// Image tiled into non-overlapping p x p patches.
struct PatchLayout {
    Index image_rows = 0;
    Index image_cols = 0;
    Index patch_size = 0;

    /// Throws std::invalid_argument unless p divides both image dimensions.
    static PatchLayout make(Index image_rows, Index image_cols, Index patch_size);

    Index patches_per_row() const { return image_cols / patch_size; }
    Index patches_per_col() const { return image_rows / patch_size; }
    Index patch_count() const { return patches_per_row() * patches_per_col(); }
    Index patch_dim() const { return patch_size * patch_size; }
};

/// p^2 x (number of patches) matrix. Column k holds patch k vectorized column by
/// column; patches are numbered row-major over the patch grid.
DenseMatrix patchify(const DenseMatrix& image, Index patch_size);

/// Exact inverse of patchify().
DenseMatrix unpatchify(const DenseMatrix& patches, const PatchLayout& layout);

}  // namespace nbmc
