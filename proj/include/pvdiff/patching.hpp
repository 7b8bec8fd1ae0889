#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"
#include "pvdiff/grid.hpp"

namespace pvdiff {

/// Geometry of one inpainting problem: a window of `window_rows` timesteps by
/// `feature_count` features, zero-padded at the bottom/right to image_side^2.
/// The first cond_rows rows condition, the last target_rows rows are generated.
struct PatchSpec {
  int window_rows = 16;
  int feature_count = 16;
  int image_side = 16;
  int cond_rows = 15;
  int target_rows = 1;

  int pad_rows() const { return image_side - window_rows; }
  int pad_cols() const { return image_side - feature_count; }

  void validate() const {
    require(window_rows >= 1 && feature_count >= 1, "patch spec: window_rows and feature_count must be >= 1");
    require(image_side > 0 && image_side % 16 == 0,
            "patch spec: image_side must be divisible by 2 at least four times (16, 32, ...)");
    require(pad_rows() >= 0, "patch spec: window_rows exceeds image_side");
    require(pad_cols() >= 0, "patch spec: feature_count exceeds image_side");
    require(cond_rows >= 1, "patch spec: cond_rows must be >= 1");
    require(target_rows >= 1, "patch spec: target_rows must be >= 1");
    require(cond_rows + target_rows == window_rows,
            "patch spec: cond_rows + target_rows must equal window_rows (" + std::to_string(cond_rows) +
                " + " + std::to_string(target_rows) + " != " + std::to_string(window_rows) + ")");
  }

  bool operator==(const PatchSpec&) const = default;
};

/// The twelve image-construction layouts of the ablation study, in order.
inline std::vector<PatchSpec> ablation_specs() {
  return {
      {16, 16, 16, 15, 1}, {16, 16, 16, 14, 2}, {16, 16, 16, 12, 4}, {16, 16, 16, 8, 8},
      {25, 25, 32, 24, 1}, {25, 25, 32, 23, 2}, {25, 25, 32, 21, 4}, {25, 25, 32, 17, 8},
      {32, 25, 32, 31, 1}, {32, 25, 32, 30, 2}, {32, 25, 32, 28, 4}, {32, 25, 32, 24, 8},
  };
}

struct Patch {
  Grid<float> values;  // window_rows x feature_count, normalized units
  std::size_t origin = 0;
};

/// Binary S x S mask, 1 on target rows x real feature columns.
struct Mask {
  Grid<std::uint8_t> cells;

  std::size_t side() const { return cells.rows; }
  std::size_t sum() const {
    std::size_t n = 0;
    for (auto v : cells.data) n += v;
    return n;
  }
  bool operator()(std::size_t r, std::size_t c) const { return cells(r, c) != 0; }
};

inline Mask build_mask(const PatchSpec& spec) {
  spec.validate();
  const auto side = static_cast<std::size_t>(spec.image_side);
  Mask m{Grid<std::uint8_t>(side, side, 0)};
  for (int r = spec.cond_rows; r < spec.window_rows; ++r) {
    for (int c = 0; c < spec.feature_count; ++c) {
      m.cells(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
    }
  }
  return m;
}

/// Stride-1 windows over a row-major (rows x feature_count) matrix.
inline std::vector<Patch> extract_patches(const Grid<float>& segment, const PatchSpec& spec) {
  spec.validate();
  require(segment.cols == static_cast<std::size_t>(spec.feature_count),
          "extract_patches: segment has " + std::to_string(segment.cols) + " features, spec expects " +
              std::to_string(spec.feature_count));
  const auto m = static_cast<std::size_t>(spec.window_rows);
  if (segment.rows < m) {
    throw ConfigError("extract_patches: segment of " + std::to_string(segment.rows) +
                      " rows is shorter than window_rows = " + std::to_string(m));
  }
  std::vector<Patch> out;
  out.reserve(segment.rows - m + 1);
  for (std::size_t k = 0; k + m <= segment.rows; ++k) {
    Patch p{Grid<float>(m, segment.cols), k};
    std::copy(segment.data.begin() + static_cast<std::ptrdiff_t>(k * segment.cols),
              segment.data.begin() + static_cast<std::ptrdiff_t>((k + m) * segment.cols), p.values.data.begin());
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
Grid<T> pad_patch(const Grid<T>& values, const PatchSpec& spec) {
  if (values.rows != static_cast<std::size_t>(spec.window_rows) ||
      values.cols != static_cast<std::size_t>(spec.feature_count)) {
    throw ConfigError("pad_patch: patch is " + std::to_string(values.rows) + "x" + std::to_string(values.cols) +
                      ", spec expects " + std::to_string(spec.window_rows) + "x" +
                      std::to_string(spec.feature_count));
  }
  const auto side = static_cast<std::size_t>(spec.image_side);
  Grid<T> img(side, side, T{0});
  for (std::size_t r = 0; r < values.rows; ++r) {
    for (std::size_t c = 0; c < values.cols; ++c) img(r, c) = values(r, c);
  }
  return img;
}

inline Grid<float> pad_patch(const Patch& p, const PatchSpec& spec) { return pad_patch(p.values, spec); }

/// Top-left window_rows x feature_count block; padded cells are discarded.
template <typename T>
Grid<T> unpad(const Grid<T>& image, const PatchSpec& spec) {
  const auto side = static_cast<std::size_t>(spec.image_side);
  if (image.rows != side || image.cols != side) {
    throw ConfigError("unpad: image is " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                      ", spec expects side " + std::to_string(side));
  }
  Grid<T> out(static_cast<std::size_t>(spec.window_rows), static_cast<std::size_t>(spec.feature_count));
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = image(r, c);
  }
  return out;
}

}  // namespace pvdiff
