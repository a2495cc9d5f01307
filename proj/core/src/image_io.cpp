#include "edecoh/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace edecoh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_csv_row(const std::string& line, const fs::path& path,
                                  std::size_t line_number) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_number) + ": bad number '" +
                    cell + "'");
    }
  }
  return values;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); });
}

// Next header token of a graymap, skipping whitespace and comments.
std::string pgm_token(std::istream& in, const fs::path& path) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw IoError(path.string() + ": truncated graymap header");
  return token;
}

std::size_t parse_size(const std::string& token, const fs::path& path) {
  try {
    const long v = std::stol(token);
    if (v <= 0) throw std::out_of_range("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad graymap header value '" + token + "'");
  }
}

DetectorImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pgm_token(in, path);
  if (magic != "P2" && magic != "P5") throw IoError(path.string() + ": unsupported magic " + magic);
  DetectorImage image;
  image.width = parse_size(pgm_token(in, path), path);
  image.height = parse_size(pgm_token(in, path), path);
  const std::size_t maxval = parse_size(pgm_token(in, path), path);
  if (maxval > 65535) throw IoError(path.string() + ": maxval above 65535");
  image.pixels.resize(image.width * image.height);
  if (magic == "P2") {
    for (double& v : image.pixels) {
      long value;
      if (!(in >> value)) throw IoError(path.string() + ": truncated pixel data");
      v = static_cast<double>(value);
    }
  } else {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(image.pixels.size() * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw IoError(path.string() + ": truncated pixel data");
    for (std::size_t i = 0; i < image.pixels.size(); ++i)
      image.pixels[i] = bytes == 2 ? raw[2 * i] * 256.0 + raw[2 * i + 1] : raw[i];
  }
  return image;
}

DetectorImage read_csv_image(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  DetectorImage image;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (blank(line)) continue;
    auto row = parse_csv_row(line, path, line_number);
    if (image.width == 0) image.width = row.size();
    if (row.size() != image.width)
      throw IoError(path.string() + ":" + std::to_string(line_number) + ": ragged row");
    image.pixels.insert(image.pixels.end(), row.begin(), row.end());
    ++image.height;
  }
  return image;
}

std::uint16_t to_level(double v) {
  if (!std::isfinite(v)) return 0;
  return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
}

}  // namespace

fs::path sidecar_path(const fs::path& image) {
  fs::path p = image;
  p += ".json";
  return p;
}

DetectorImage read_detector_image(const fs::path& path, const PixelGeometry& fallback) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path.string());
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  DetectorImage image = (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5'))
                            ? read_pgm(path)
                            : read_csv_image(path);
  PixelGeometry g = fallback;
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    try {
      const json j = json::parse(read_text_file(side));
      g.pixel_x = j.value("pixel_x_m", g.pixel_x);
      g.pixel_y = j.value("pixel_y_m", g.pixel_y);
      g.origin_x = j.value("origin_x_m", g.origin_x);
      g.origin_y = j.value("origin_y_m", g.origin_y);
    } catch (const json::exception& e) {
      throw IoError(side.string() + ": " + e.what());
    }
  }
  image.pixel_x = g.pixel_x;
  image.pixel_y = g.pixel_y;
  image.origin_x = g.origin_x;
  image.origin_y = g.origin_y;
  return image;
}

void write_pgm(const DetectorImage& image, const fs::path& path, GraymapEncoding encoding) {
  std::uint16_t top = 0;
  for (double v : image.pixels) top = std::max(top, to_level(v));
  const int maxval = top > 255 ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << (encoding == GraymapEncoding::Plain ? "P2" : "P5") << '\n'
      << image.width << ' ' << image.height << '\n'
      << maxval << '\n';
  if (encoding == GraymapEncoding::Plain) {
    for (std::size_t r = 0; r < image.height; ++r) {
      for (std::size_t c = 0; c < image.width; ++c)
        out << (c ? " " : "") << to_level(image.at(r, c));
      out << '\n';
    }
  } else {
    std::vector<unsigned char> raw;
    raw.reserve(image.pixels.size() * 2);
    for (double v : image.pixels) {
      const std::uint16_t level = to_level(v);
      if (maxval > 255) raw.push_back(static_cast<unsigned char>(level >> 8));
      raw.push_back(static_cast<unsigned char>(level & 0xff));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_csv_matrix(const DetectorImage& image, const fs::path& path) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t r = 0; r < image.height; ++r) {
    for (std::size_t c = 0; c < image.width; ++c) out << (c ? "," : "") << image.at(r, c);
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_sidecar(const DetectorImage& image, const fs::path& image_path) {
  json j;
  j["pixel_x_m"] = image.pixel_x;
  j["pixel_y_m"] = image.pixel_y;
  j["origin_x_m"] = image.origin_x;
  j["origin_y_m"] = image.origin_y;
  j["width"] = image.width;
  j["height"] = image.height;
  write_text_file(sidecar_path(image_path), j.dump(2) + "\n");
}

LineOut read_lineout_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LineOut line;
  std::string text;
  std::size_t line_number = 0;
  while (std::getline(in, text)) {
    ++line_number;
    if (blank(text)) continue;
    if (line_number == 1 && text.rfind("x_m", 0) == 0) continue;
    const auto row = parse_csv_row(text, path, line_number);
    if (row.size() != 2)
      throw IoError(path.string() + ":" + std::to_string(line_number) + ": expected 2 columns");
    line.x.push_back(row[0]);
    line.counts.push_back(row[1]);
  }
  return line;
}

void write_lineout_csv(const LineOut& line, const fs::path& path) {
  std::ostringstream out;
  out.precision(17);
  out << "x_m,counts\n";
  for (std::size_t i = 0; i < line.x.size(); ++i) out << line.x[i] << ',' << line.counts[i] << '\n';
  write_text_file(path, out.str());
}

std::string fit_result_json(const FitResult& fit, double y) {
  static const char* names[] = {"amplitude",  "alpha_per_m",      "envelope_center_m",
                                "comb_center_m", "spacing_m",     "mixture",
                                "width1_m",   "width2_m",         "background",
                                "background_center_m", "background_width_m"};
  const FitParams& p = fit.params;
  const double values[] = {p.amplitude, p.alpha,     p.envelope_center, p.comb_center,
                           p.spacing,   p.mixture,   p.width1,          p.width2,
                           p.background, p.background_center, p.background_width};
  json params, errors;
  for (std::size_t i = 0; i < 11; ++i) {
    params[names[i]] = values[i];
    const double e = i < fit.std_errors.size() ? fit.std_errors[i] : NAN;
    errors[names[i]] = std::isfinite(e) ? json(e) : json(nullptr);
  }
  params["n_max"] = p.n_max;
  json j;
  j["y_m"] = y;
  j["params"] = params;
  j["w_fwhm_m"] = fit.w_fwhm;
  j["l_coh_m"] = fit.l_coh;
  j["grating_period_m"] = fit.grating_period;
  j["residual_norm"] = fit.residual_norm;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["stop_reason"] = fit.stop_reason;
  j["std_errors"] = errors;
  j["condition_number"] =
      std::isfinite(fit.condition_number) ? json(fit.condition_number) : json(nullptr);
  return j.dump(2);
}

void write_diffractogram_csv(const Diffractogram& gram, const fs::path& path) {
  std::ostringstream out;
  out.precision(17);
  if (!gram.rows.empty()) {
    const std::size_t width = gram.rows.front().x.size();
    out << "y_m";
    for (double x : gram.rows.front().x) out << ',' << x;
    out << '\n';
    for (const auto& row : gram.rows) {
      if (row.values.size() != width)
        throw IoError("diffractogram rows have different lengths; cannot write a matrix");
      out << row.y;
      for (double v : row.values) out << ',' << v;
      out << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace edecoh
