#include "hairforge/imaging.hpp"

#include <png.h>

#include <cstring>

namespace hairforge::imaging {

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  if (img.empty()) throw Error(ErrorCode::EmptyImage, "cannot encode an empty image");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::InvalidArgument, std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::InvalidArgument, std::string("png decode failed: ") + image.message);
  }
  return img;
}

}  // namespace hairforge::imaging
