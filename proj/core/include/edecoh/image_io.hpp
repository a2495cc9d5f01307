#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edecoh/analysis.hpp"

namespace edecoh {

/// Pixel geometry stored next to an image as <image>.json with keys
/// pixel_x_m, pixel_y_m, origin_x_m, origin_y_m.
struct PixelGeometry {
  double pixel_x = 1e-6;
  double pixel_y = 1e-6;
  double origin_x = 0.0;
  double origin_y = 0.0;
};

std::filesystem::path sidecar_path(const std::filesystem::path& image);

/// Reads P2/P5 graymaps (8 or 16 bit) or a CSV matrix (rows = Y pixels,
/// first file row = row 0). Pixel geometry comes from the sidecar when
/// present, otherwise from `fallback`.
DetectorImage read_detector_image(const std::filesystem::path& path,
                                  const PixelGeometry& fallback = {});

enum class GraymapEncoding { Plain, Binary };

/// Pixel values are rounded and clamped to [0, 65535]; maxval is 255 when
/// every value fits in a byte.
void write_pgm(const DetectorImage& image, const std::filesystem::path& path,
               GraymapEncoding encoding = GraymapEncoding::Binary);
void write_csv_matrix(const DetectorImage& image, const std::filesystem::path& path);
void write_sidecar(const DetectorImage& image, const std::filesystem::path& image_path);

/// Two columns with header x_m,counts.
LineOut read_lineout_csv(const std::filesystem::path& path);
void write_lineout_csv(const LineOut& line, const std::filesystem::path& path);

std::string fit_result_json(const FitResult& fit, double y);
/// Header y_m followed by the x grid of the first row.
void write_diffractogram_csv(const Diffractogram& gram, const std::filesystem::path& path);

/// Throws IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace edecoh
