// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

// jpeglib.h expects stdio declarations to precede it.
#include <jpeglib.h>

#include "eep3dqa/error.hpp"
#include "eep3dqa/raster.hpp"

namespace eep3dqa {

// 8-bit RGB PNG; channels are rounded from [0,1].
inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  detail::require(!img.empty(), "write_png: empty image");
  std::vector<std::uint8_t> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& p = img.data()[i];
    bytes[3 * i + 0] = channel_to_u8(p.r);
    bytes[3 * i + 1] = channel_to_u8(p.g);
    bytes[3 * i + 2] = channel_to_u8(p.b);
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw Error("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

inline RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    throw Error("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr) == 0) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot decode PNG '" + path.string() + "': " + msg);
  }
  RgbImage out(image.width, image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = rgb_from_u8(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]);
  }
  return out;
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

// Decodes into `bytes`; returns false with `mgr.message` set on failure. Kept free of
// non-trivial locals because of the longjmp error path.
inline bool decode_jpeg(std::FILE* file, jpeg_decompress_struct& cinfo, JpegErrorManager& mgr,
                        std::vector<std::uint8_t>& bytes, unsigned& width, unsigned& height) {
  cinfo.err = jpeg_std_error(&mgr.base);
  mgr.base.error_exit = jpeg_error_exit;
  if (setjmp(mgr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  bytes.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = bytes.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace detail

inline RgbImage read_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "rb"),
                                                       &std::fclose);
  if (!file) throw Error("cannot open JPEG '" + path.string() + "'");
  jpeg_decompress_struct cinfo{};
  detail::JpegErrorManager mgr{};
  std::vector<std::uint8_t> bytes;
  unsigned width = 0;
  unsigned height = 0;
  if (!detail::decode_jpeg(file.get(), cinfo, mgr, bytes, width, height)) {
    throw Error("cannot decode JPEG '" + path.string() + "': " + mgr.message);
  }
  RgbImage out(width, height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = rgb_from_u8(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]);
  }
  return out;
}

// Dispatches on the file signature, not the extension.
inline RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image '" + path.string() + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof sig);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (in.gcount() >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
  throw Error("unsupported image format '" + path.string() + "' (expected PNG or JPEG)");
}

}  // namespace eep3dqa
