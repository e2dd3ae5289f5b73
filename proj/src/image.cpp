#include "mpox/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <jpeglib.h>
#include <memory>

namespace mpox {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageError("cannot open " + path.string());
  return f;
}

Image8 decode_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw ImageError("png decode failed for " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageError("png decode failed for " + path.string() + ": " + png.message);
  }
  Image8 out{Index(png.height), Index(png.width), {}};
  out.pixels.resize(std::size_t(out.height * out.width * 3));
  for (std::size_t i = 0, n = std::size_t(out.height * out.width); i < n; ++i)
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = rgba[i * 4 + c];
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

Image8 decode_jpeg(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silent;
  Image8 out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageError("jpeg decode failed for " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.height = cinfo.output_height;
  out.width = cinfo.output_width;
  out.pixels.resize(std::size_t(out.height * out.width * 3));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + std::size_t(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

ImageFormat detect_image_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char magic[8] = {};
  if (!in.read(reinterpret_cast<char*>(magic), 8)) return ImageFormat::kUnknown;
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (std::equal(magic, magic + 8, kPng)) return ImageFormat::kPng;
  if (magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return ImageFormat::kJpeg;
  return ImageFormat::kUnknown;
}

Image8 decode_image(const std::filesystem::path& path) {
  switch (detect_image_format(path)) {
    case ImageFormat::kPng: return decode_png(path);
    case ImageFormat::kJpeg: return decode_jpeg(path);
    case ImageFormat::kUnknown: break;
  }
  throw ImageError("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(image.width);
  png.height = png_uint_32(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    throw ImageError("png write failed for " + path.string() + ": " + png.message);
}

void write_jpeg(const std::filesystem::path& path, const Image8& image, int quality) {
  FilePtr file = open_file(path, "wb");
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw ImageError("jpeg write failed for " + path.string() + ": " + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file.get());
  cinfo.image_width = JDIMENSION(image.width);
  cinfo.image_height = JDIMENSION(image.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(image.pixels.data() +
                                     std::size_t(cinfo.next_scanline) * image.width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

TensorF to_tensor(const Image8& image) {
  TensorF t({image.height, image.width, 3});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[Index(i)] = float(image.pixels[i]);
  return t;
}

TensorF resize_bilinear(const TensorF& image, Index out_h, Index out_w) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear expects an (h, w, c) image");
  const Index in_h = image.dim(0), in_w = image.dim(1), c = image.dim(2);
  if (in_h == out_h && in_w == out_w) return image;
  TensorF out({out_h, out_w, c});
  const double sy = double(in_h) / double(out_h);
  const double sx = double(in_w) / double(out_w);
  auto source = [](Index i, double scale, Index extent, Index& lo, Index& hi, float& frac) {
    double s = (double(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, double(extent - 1));
    lo = Index(std::floor(s));
    hi = std::min(lo + 1, extent - 1);
    frac = float(s - double(lo));
  };
  for (Index y = 0; y < out_h; ++y) {
    Index y0, y1;
    float fy;
    source(y, sy, in_h, y0, y1, fy);
    for (Index x = 0; x < out_w; ++x) {
      Index x0, x1;
      float fx;
      source(x, sx, in_w, x0, x1, fx);
      for (Index ch = 0; ch < c; ++ch) {
        const float a = image[(y0 * in_w + x0) * c + ch];
        const float b = image[(y0 * in_w + x1) * c + ch];
        const float d = image[(y1 * in_w + x0) * c + ch];
        const float e = image[(y1 * in_w + x1) * c + ch];
        const float top = a + (b - a) * fx;
        const float bottom = d + (e - d) * fx;
        out[(y * out_w + x) * c + ch] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

float rescale_value(float v) { return float(double(v) * (1.0 / 255.0)); }

TensorF rescale(const TensorF& image) {
  TensorF out(image.shape());
  for (Index i = 0; i < image.size(); ++i) out[i] = rescale_value(image[i]);
  return out;
}

Image8 to_image8(const TensorF& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("to_image8 expects (h, w, 3)");
  Image8 out{image.dim(0), image.dim(1), {}};
  out.pixels.resize(std::size_t(image.size()));
  for (Index i = 0; i < image.size(); ++i)
    out.pixels[std::size_t(i)] =
        std::uint8_t(std::lround(std::clamp(double(image[i]), 0.0, 1.0) * 255.0));
  return out;
}

TensorF load_image(const std::filesystem::path& path, Index size) {
  return rescale(resize_bilinear(to_tensor(decode_image(path)), size, size));
}

}  // namespace mpox
