#include "hairforge/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

namespace hairforge::imaging {

namespace {

constexpr double kTan22_5 = 0.4142135623730950;
constexpr double kTan67_5 = 2.4142135623730950;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

EdgeMap canny(const GrayImage& img, double sigma, double low, double high) {
  if (img.empty() || img.data.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
    throw Error(ErrorCode::EmptyImage, "canny needs a non-empty image");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !(low >= 0.0) || !(low < high) || !(high <= 255.0)) {
    throw Error(ErrorCode::BadThresholds, "canny needs sigma > 0 and 0 <= low < high <= 255");
  }
  const int w = img.width, h = img.height;
  const auto at = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };

  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  for (int i = -r; i <= r; ++i) k[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  double sum = 0.0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;

  std::vector<double> tmp(img.data.size()), blur(img.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * img.data[at(clampi(x + i, 0, w - 1), y)];
      tmp[at(x, y)] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp[at(x, clampi(y + i, 0, h - 1))];
      blur[at(x, y)] = acc;
    }
  }

  const auto b = [&](int x, int y) { return blur[at(clampi(x, 0, w - 1), clampi(y, 0, h - 1))]; };
  std::vector<double> mag(img.data.size());
  std::vector<std::uint8_t> dir(img.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = ((b(x + 1, y - 1) + 2.0 * b(x + 1, y)) + b(x + 1, y + 1)) -
                        ((b(x - 1, y - 1) + 2.0 * b(x - 1, y)) + b(x - 1, y + 1));
      const double gy = ((b(x - 1, y + 1) + 2.0 * b(x, y + 1)) + b(x + 1, y + 1)) -
                        ((b(x - 1, y - 1) + 2.0 * b(x, y - 1)) + b(x + 1, y - 1));
      mag[at(x, y)] = std::sqrt(gx * gx + gy * gy);
      const double ax = std::abs(gx), ay = std::abs(gy);
      std::uint8_t d;
      if (ay <= ax * kTan22_5) {
        d = 0;
      } else if (ay > ax * kTan67_5) {
        d = 2;
      } else {
        d = gx * gy > 0.0 ? 1 : 3;
      }
      dir[at(x, y)] = d;
    }
  }

  // neighbour offsets along the quantized gradient: 0, 45, 90, 135 degrees
  static constexpr int kStep[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  const auto m = [&](int x, int y) { return mag[at(clampi(x, 0, w - 1), clampi(y, 0, h - 1))]; };
  std::vector<double> nms(img.data.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dx = kStep[dir[at(x, y)]][0], dy = kStep[dir[at(x, y)]][1];
      const double v = mag[at(x, y)];
      if (v > m(x - dx, y - dy) && v >= m(x + dx, y + dy)) nms[at(x, y)] = v;
    }
  }

  EdgeMap out(w, h, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < nms.size(); ++i) {
    if (nms[i] > high) {
      out.data[i] = 255;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        const std::size_t j = at(nx, ny);
        if (out.data[j] == 0 && nms[j] > low) {
          out.data[j] = 255;
          queue.push_back(j);
        }
      }
    }
  }
  return out;
}

void validate(const Camera& cam) {
  const Vec3 view = cam.target - cam.eye;
  if (!cam.eye.allFinite() || !cam.target.allFinite() || !cam.up.allFinite() || view.norm() < 1e-9) {
    throw Error(ErrorCode::DegenerateCamera, "camera eye and target must be distinct finite points");
  }
  if (view.normalized().cross(cam.up).norm() < 1e-9) {
    throw Error(ErrorCode::DegenerateCamera, "camera up vector is parallel to the view direction");
  }
  if (!(cam.fov_y_deg > 0.0 && cam.fov_y_deg < 180.0) || cam.width < 1 || cam.height < 1) {
    throw Error(ErrorCode::DegenerateCamera, "camera needs 0 < fov < 180 and a positive size");
  }
}

namespace {

struct View {
  Vec3 eye, right, up, forward;
  double focal;  // pixels
  double cx, cy;
};

View make_view(const Camera& cam) {
  View v;
  v.eye = cam.eye;
  v.forward = (cam.target - cam.eye).normalized();
  v.right = v.forward.cross(cam.up).normalized();
  v.up = v.right.cross(v.forward);
  v.focal = 0.5 * cam.height / std::tan(0.5 * cam.fov_y_deg * std::numbers::pi / 180.0);
  v.cx = 0.5 * cam.width;
  v.cy = 0.5 * cam.height;
  return v;
}

Projected project(const View& v, const Vec3& p) {
  const Vec3 rel = p - v.eye;
  Projected out;
  out.depth = rel.dot(v.forward);
  if (out.depth <= 0.0) return out;
  out.x = v.cx + v.focal * rel.dot(v.right) / out.depth;
  out.y = v.cy - v.focal * rel.dot(v.up) / out.depth;
  return out;
}

constexpr double kNear = 1e-3;

struct Canvas {
  GrayImage img;
  std::vector<double> zbuf;  // head depth per pixel

  void plot(int x, int y, double depth, double value) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x);
    if (depth > zbuf[i]) return;
    const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    img.data[i] = std::max(img.data[i], v);
  }
};

void fill_triangle(Canvas& c, const Projected& a, const Projected& b, const Projected& d, std::uint8_t shade) {
  const double area = (b.x - a.x) * (d.y - a.y) - (b.y - a.y) * (d.x - a.x);
  if (std::abs(area) < 1e-12) return;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, d.x}))));
  const int x1 = std::min(c.img.width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, d.x}))));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, d.y}))));
  const int y1 = std::min(c.img.height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, d.y}))));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double w0 = ((b.x - px) * (d.y - py) - (b.y - py) * (d.x - px)) / area;
      const double w1 = ((d.x - px) * (a.y - py) - (d.y - py) * (a.x - px)) / area;
      const double w2 = 1.0 - w0 - w1;
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double depth = w0 * a.depth + w1 * b.depth + w2 * d.depth;
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(c.img.width) + static_cast<std::size_t>(x);
      if (depth < c.zbuf[i]) {
        c.zbuf[i] = depth;
        c.img.data[i] = shade;
      }
    }
  }
}

// Xiaolin Wu's line, coverage scaled by `value`; depth interpolated along it.
void draw_line(Canvas& c, Projected a, Projected b, double value_a, double value_b) {
  const bool steep = std::abs(b.y - a.y) > std::abs(b.x - a.x);
  if (steep) {
    std::swap(a.x, a.y);
    std::swap(b.x, b.y);
  }
  if (a.x > b.x) {
    std::swap(a, b);
    std::swap(value_a, value_b);
  }
  const double dx = b.x - a.x;
  const double grad = dx < 1e-12 ? 0.0 : (b.y - a.y) / dx;
  const auto plot = [&](int px, int py, double cover, double t) {
    const double depth = a.depth + t * (b.depth - a.depth);
    const double value = cover * (value_a + t * (value_b - value_a));
    if (steep) {
      c.plot(py, px, depth, value);
    } else {
      c.plot(px, py, depth, value);
    }
  };
  const int xs = static_cast<int>(std::lround(a.x));
  const int xe = static_cast<int>(std::lround(b.x));
  for (int x = xs; x <= xe; ++x) {
    const double t = dx < 1e-12 ? 0.0 : std::clamp((x - a.x) / dx, 0.0, 1.0);
    const double y = a.y + grad * (x - a.x);
    const double fy = std::floor(y);
    const double frac = y - fy;
    plot(x, static_cast<int>(fy), 1.0 - frac, t);
    plot(x, static_cast<int>(fy) + 1, frac, t);
  }
}

}  // namespace

Projected project(const Camera& cam, const Vec3& p) {
  validate(cam);
  return project(make_view(cam), p);
}

GrayImage rasterize_strands(const Hairstyle& h, const HeadMesh* head, const Camera& cam) {
  validate(cam);
  const View view = make_view(cam);
  Canvas canvas{GrayImage(cam.width, cam.height, 0),
                std::vector<double>(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height),
                                    std::numeric_limits<double>::infinity())};

  if (head != nullptr) {
    for (const auto& tri : head->triangles) {
      const Vec3& p0 = head->vertices[static_cast<std::size_t>(tri[0])];
      const Vec3& p1 = head->vertices[static_cast<std::size_t>(tri[1])];
      const Vec3& p2 = head->vertices[static_cast<std::size_t>(tri[2])];
      const Projected a = project(view, p0), b = project(view, p1), d = project(view, p2);
      if (a.depth <= kNear || b.depth <= kNear || d.depth <= kNear) continue;
      const Vec3 n = (p1 - p0).cross(p2 - p0).normalized();
      const Vec3 to_eye = (view.eye - (p0 + p1 + p2) / 3.0).normalized();
      const double facing = std::abs(n.dot(to_eye));
      fill_triangle(canvas, a, b, d, static_cast<std::uint8_t>(std::lround(30.0 + 70.0 * facing)));
    }
  }

  double near_d = std::numeric_limits<double>::infinity(), far_d = -near_d;
  for (const auto& s : h.strands) {
    for (const auto& v : s.vertices) {
      const double d = (v - view.eye).dot(view.forward);
      if (d > kNear) {
        near_d = std::min(near_d, d);
        far_d = std::max(far_d, d);
      }
    }
  }
  const double span = far_d - near_d;
  // nearer hair is brighter: 255 at the closest vertex, 120 at the farthest
  const auto brightness = [&](double depth) {
    return span > 1e-9 ? 255.0 - 135.0 * (depth - near_d) / span : 255.0;
  };
  for (const auto& s : h.strands) {
    for (std::size_t i = 0; i + 1 < s.vertices.size(); ++i) {
      const Projected a = project(view, s.vertices[i]), b = project(view, s.vertices[i + 1]);
      if (a.depth <= kNear || b.depth <= kNear) continue;
      draw_line(canvas, a, b, brightness(a.depth), brightness(b.depth));
    }
  }
  return canvas.img;
}

std::string compose_prompt(const RenderAttributes& attrs) {
  std::string out;
  for (const std::string* field : {&attrs.gender, &attrs.hair_color, &attrs.head_pose, &attrs.misc}) {
    const auto first = field->find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto last = field->find_last_not_of(" \t\r\n");
    if (!out.empty()) out += ", ";
    out += field->substr(first, last - first + 1);
  }
  if (out.empty()) throw Error(ErrorCode::AllEmpty, "every render attribute is empty");
  return out;
}

}  // namespace hairforge::imaging
