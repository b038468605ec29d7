#include "eblime/errors.hpp"
#include "eblime/perturbation.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>

namespace eblime::perturbation {

namespace {

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_pnm_int(std::istream& in, const std::string& path) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw InvalidInput("malformed PGM header in " + path);
  return v;
}

bool has_png_signature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw InvalidInput(path + " is not a binary PGM (P5)");
  Image img;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
    throw InvalidInput("unsupported PGM dimensions or depth in " + path);
  }
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw InvalidInput("truncated PGM raster in " + path);
  }
  img.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / static_cast<double>(maxval);
  return img;
}

void write_pgm(const std::string& path, const Image& image) {
  if (image.channels != 1) throw InvalidInput("PGM output needs a single channel");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.pixels) {
    const double c = std::clamp(v, 0.0, 1.0) * 255.0 + 0.5;
    out.put(static_cast<char>(static_cast<unsigned char>(c)));
  }
}

Image read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw InvalidInput("cannot open " + path);

  // libpng's message is kept for the exception instead of going to stderr.
  std::string png_message;
  const png_error_ptr on_error = [](png_structp p, png_const_charp msg) {
    *static_cast<std::string*>(png_get_error_ptr(p)) = msg;
    png_longjmp(p, 1);
  };
  const png_error_ptr on_warning = [](png_structp, png_const_charp) {};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &png_message, on_error, on_warning);
  if (!png) throw InvalidInput("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw InvalidInput("libpng initialisation failed");
  }
  // libpng reports errors through longjmp, so every object touched during
  // decoding is declared before setjmp.
  Image img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput("corrupt PNG " + path + (png_message.empty() ? "" : ": " + png_message));
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_palette_to_rgb(png);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  raster.resize(stride * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = raster.data() + stride * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      img.pixels[static_cast<std::size_t>(y) * img.width + x] = rows[y][x] / 255.0;
    }
  }
  return img;
}

Image read_image(const std::string& path) {
  if (has_png_signature(path)) return read_png(path);
  return read_pgm(path);
}

}  // namespace eblime::perturbation
