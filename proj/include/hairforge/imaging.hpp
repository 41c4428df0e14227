#pragma once

// Viewport capture to edge-conditioned generation requests: a small software
// rasterizer for strands over a shaded head, a Canny detector, prompt
// composition and PNG interchange.

#include "hairforge/error.hpp"
#include "hairforge/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hairforge::imaging {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  bool empty() const { return width <= 0 || height <= 0; }
};

// Binary image: every value is 0 or 255.
using EdgeMap = GrayImage;

inline constexpr double kCannySigma = 1.4;
inline constexpr double kCannyLow = 100.0;
inline constexpr double kCannyHigh = 200.0;

// Gaussian blur (radius ceil(3 sigma), renormalized, horizontal then
// vertical), Sobel 3x3, 4-direction non-maximum suppression (keep when the
// magnitude beats the neighbour behind and at least ties the one ahead),
// strong > high, weak > low, 8-connected hysteresis. Borders clamp.
// Throws EmptyImage, BadThresholds (need 0 <= low < high <= 255, sigma > 0).
EdgeMap canny(const GrayImage& img, double sigma = kCannySigma, double low = kCannyLow,
              double high = kCannyHigh);

struct Camera {
  Vec3 eye{0.0, 0.0, 60.0};
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_y_deg = 35.0;
  int width = 512;
  int height = 512;
};

// Throws DegenerateCamera (eye == target, up parallel to the view axis, bad
// fov or size).
void validate(const Camera& cam);

// Pixel coordinates (x right, y down) and view depth of a world point;
// depth <= 0 means behind the camera.
struct Projected {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
};
Projected project(const Camera& cam, const Vec3& p);

// Head triangles flat-shaded by facing ratio into a depth buffer, then every
// strand segment as a 1-px anti-aliased line whose brightness falls off with
// depth; hair behind the head surface is hidden. `head` may be null.
GrayImage rasterize_strands(const Hairstyle& h, const HeadMesh* head, const Camera& cam);

// Comma-join of the non-empty fields (gender, hair colour, head pose, misc).
// Throws AllEmpty.
std::string compose_prompt(const RenderAttributes& attrs);

// PNG, 8-bit grayscale. decode_png converts colour input to gray.
// Throws InvalidArgument on undecodable bytes.
std::vector<std::uint8_t> encode_png(const GrayImage& img);
GrayImage decode_png(std::span<const std::uint8_t> bytes);

}  // namespace hairforge::imaging
