// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "odecme/matexp.hpp"
#include "odecme/rng.hpp"

namespace odecme {

namespace {

void check_landmarks(const LandmarkSet& lm, bool need_dims) {
  if (lm.fixed_pts.rows() != lm.moving_pts.rows() ||
      lm.fixed_pts.cols() != lm.moving_pts.cols())
    throw Error::dim("landmarks: point sets differ in shape");
  if (lm.count() < 1) throw Error::invalid("landmarks: empty set");
  int k = lm.dims();
  if (k != 2 && k != 3) throw Error::dim("landmarks: points must be 2-d or 3-d");
  if (!need_dims) return;
  if (static_cast<int>(lm.fixed_dims.size()) != k ||
      static_cast<int>(lm.moving_dims.size()) != k)
    throw Error::invalid("landmarks: frame sizes missing or wrong rank");
  for (int a = 0; a < k; ++a)
    if (lm.fixed_dims[static_cast<size_t>(a)] < 2 ||
        lm.moving_dims[static_cast<size_t>(a)] < 2)
      throw Error::invalid("landmarks: frame axes need at least 2 samples");
  for (Eigen::Index i = 0; i < lm.count(); ++i)
    for (int a = 0; a < k; ++a) {
      double f = lm.fixed_pts(i, a), m = lm.moving_pts(i, a);
      if (f < 0 || f > lm.fixed_dims[static_cast<size_t>(a)] - 1 || m < 0 ||
          m > lm.moving_dims[static_cast<size_t>(a)] - 1)
        throw Error::invalid("landmarks: point outside its frame");
    }
}

}  // namespace

double naed(const LandmarkSet& lm, const ComplexMatrix& h) {
  check_landmarks(lm, /*need_dims=*/true);
  int k = lm.dims();
  if (h.dim() != k + 1) throw Error::dim("naed: transform rank does not match points");

  PointSet mc(lm.count(), k);
  for (Eigen::Index i = 0; i < lm.count(); ++i)
    for (int a = 0; a < k; ++a)
      mc(i, a) = px_to_canonical(lm.moving_pts(i, a), lm.moving_dims[static_cast<size_t>(a)]);
  PointSet fc = transform_points(h, mc);

  double acc = 0.0;
  for (Eigen::Index i = 0; i < lm.count(); ++i) {
    double d2 = 0.0;
    for (int a = 0; a < k; ++a) {
      int n = lm.fixed_dims[static_cast<size_t>(a)];
      double px = canonical_to_px(fc(i, a), n);
      double r = (px - lm.fixed_pts(i, a)) / (n - 1);
      d2 += r * r;
    }
    acc += std::sqrt(d2);
  }
  return acc / static_cast<double>(lm.count());
}

namespace {

Image elementwise_product(const Image& a, const Image& b) {
  Image out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

}  // namespace

double ssim(const Image& p, const Image& q) {
  if (!p.same_dims(q)) throw Error::dim("ssim: image dims differ");
  constexpr double kSigma = 1.5;       // 11-wide window
  constexpr double kC1 = 1e-4;         // (0.01 * 1)^2
  constexpr double kC2 = 9e-4;         // (0.03 * 1)^2
  Image mu_p = gaussian_blur(p, kSigma);
  Image mu_q = gaussian_blur(q, kSigma);
  Image m_pp = gaussian_blur(elementwise_product(p, p), kSigma);
  Image m_qq = gaussian_blur(elementwise_product(q, q), kSigma);
  Image m_pq = gaussian_blur(elementwise_product(p, q), kSigma);
  double acc = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i) {
    double up = mu_p.data[i], uq = mu_q.data[i];
    double vp = m_pp.data[i] - up * up;
    double vq = m_qq.data[i] - uq * uq;
    double cov = m_pq.data[i] - up * uq;
    acc += ((2.0 * up * uq + kC1) * (2.0 * cov + kC2)) /
           ((up * up + uq * uq + kC1) * (vp + vq + kC2));
  }
  return acc / static_cast<double>(p.data.size());
}

double psnr(const Image& p, const Image& q) {
  if (!p.same_dims(q)) throw Error::dim("psnr: image dims differ");
  double mse = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i) {
    double d = p.data[i] - q.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(p.data.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    size_t b = cell.find_first_not_of(" \t\r");
    size_t e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

double parse_coord(const std::string& s, const std::string& path) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error::io("'" + path + "': bad coordinate '" + s + "'");
  }
}

}  // namespace

LandmarkSet load_landmarks_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error::io("'" + path + "': empty file");
  std::vector<std::string> header = split_csv_row(line);
  int k;
  if (header == std::vector<std::string>{"fx", "fy", "mx", "my"})
    k = 2;
  else if (header == std::vector<std::string>{"fx", "fy", "fz", "mx", "my", "mz"})
    k = 3;
  else
    throw Error::io("'" + path + "': expected header fx,fy,mx,my or fx,fy,fz,mx,my,mz");

  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells = split_csv_row(line);
    if (static_cast<int>(cells.size()) != 2 * k)
      throw Error::io("'" + path + "': row with wrong column count");
    for (const std::string& c : cells) vals.push_back(parse_coord(c, path));
  }
  long n = static_cast<long>(vals.size()) / (2 * k);
  if (n < 1) throw Error::io("'" + path + "': no landmark rows");
  LandmarkSet lm;
  lm.fixed_pts.resize(n, k);
  lm.moving_pts.resize(n, k);
  for (long i = 0; i < n; ++i)
    for (int a = 0; a < k; ++a) {
      lm.fixed_pts(i, a) = vals[static_cast<size_t>(i * 2 * k + a)];
      lm.moving_pts(i, a) = vals[static_cast<size_t>(i * 2 * k + k + a)];
    }
  check_landmarks(lm, /*need_dims=*/false);
  return lm;
}

void save_landmarks_csv(const std::string& path, const LandmarkSet& lm) {
  check_landmarks(lm, /*need_dims=*/false);
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  int k = lm.dims();
  out << (k == 2 ? "fx,fy,mx,my" : "fx,fy,fz,mx,my,mz") << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < lm.count(); ++i) {
    for (int a = 0; a < k; ++a) {
      std::snprintf(buf, sizeof buf, a ? ",%.17g" : "%.17g", lm.fixed_pts(i, a));
      out << buf;
    }
    for (int a = 0; a < k; ++a) {
      std::snprintf(buf, sizeof buf, ",%.17g", lm.moving_pts(i, a));
      out << buf;
    }
    out << "\n";
  }
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");
}

namespace {

// Headerless whitespace rows of `width` finite numbers; '#' starts a comment.
std::vector<std::array<double, 4>> read_plain_rows(const std::string& path, int width) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");
  std::vector<std::array<double, 4>> rows;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::array<double, 4> row{};
    int got = 0;
    double v;
    while (ss >> v) {
      if (got < width) row[static_cast<size_t>(got)] = v;
      ++got;
    }
    if (got == 0) continue;
    if (got != width || !ss.eof())
      throw Error::io("'" + path + "': expected " + std::to_string(width) +
                      " numbers per row");
    rows.push_back(row);
  }
  if (rows.empty()) throw Error::io("'" + path + "': no point rows");
  return rows;
}

}  // namespace

LandmarkSet load_landmarks_fire(const std::string& path) {
  std::vector<std::array<double, 4>> rows = read_plain_rows(path, 4);
  LandmarkSet lm;
  long n = static_cast<long>(rows.size());
  lm.fixed_pts.resize(n, 2);
  lm.moving_pts.resize(n, 2);
  for (long i = 0; i < n; ++i) {
    lm.fixed_pts(i, 0) = rows[static_cast<size_t>(i)][0];
    lm.fixed_pts(i, 1) = rows[static_cast<size_t>(i)][1];
    lm.moving_pts(i, 0) = rows[static_cast<size_t>(i)][2];
    lm.moving_pts(i, 1) = rows[static_cast<size_t>(i)][3];
  }
  check_landmarks(lm, /*need_dims=*/false);
  return lm;
}

LandmarkSet load_landmarks_fire(const std::string& fixed_path,
                                const std::string& moving_path) {
  std::vector<std::array<double, 4>> f = read_plain_rows(fixed_path, 2);
  std::vector<std::array<double, 4>> m = read_plain_rows(moving_path, 2);
  if (f.size() != m.size())
    throw Error::io("point files '" + fixed_path + "' and '" + moving_path +
                    "' differ in row count");
  LandmarkSet lm;
  long n = static_cast<long>(f.size());
  lm.fixed_pts.resize(n, 2);
  lm.moving_pts.resize(n, 2);
  for (long i = 0; i < n; ++i) {
    lm.fixed_pts(i, 0) = f[static_cast<size_t>(i)][0];
    lm.fixed_pts(i, 1) = f[static_cast<size_t>(i)][1];
    lm.moving_pts(i, 0) = m[static_cast<size_t>(i)][0];
    lm.moving_pts(i, 1) = m[static_cast<size_t>(i)][1];
  }
  check_landmarks(lm, /*need_dims=*/false);
  return lm;
}

Image make_test_image(int width, int height, int depth, int channels,
                      std::uint64_t seed) {
  if (width < 2 || height < 2 || depth < 1 || channels < 1)
    throw Error::invalid("test image: bad shape");
  bool volume = depth > 1;
  Image img(width, height, depth, channels, volume);
  Rng rng(seed);
  constexpr int kOctaveCells[] = {4, 8, 16, 32};
  for (int c = 0; c < channels; ++c) {
    double amp = 1.0;
    for (int cells : kOctaveCells) {
      int nx = cells + 1, ny = cells + 1, nz = volume ? cells + 1 : 1;
      std::vector<double> lat(static_cast<size_t>(nx) * ny * nz);
      for (double& v : lat) v = rng.uniform();
      auto latv = [&](int x, int y, int z) {
        return lat[(static_cast<size_t>(z) * ny + y) * nx + x];
      };
      for (int z = 0; z < depth; ++z)
        for (int y = 0; y < height; ++y)
          for (int x = 0; x < width; ++x) {
            double ux = static_cast<double>(x) / (width - 1) * cells;
            double uy = static_cast<double>(y) / (height - 1) * cells;
            double uz = volume ? static_cast<double>(z) / (depth - 1) * cells : 0.0;
            int ix = std::min(static_cast<int>(ux), cells - 1);
            int iy = std::min(static_cast<int>(uy), cells - 1);
            int iz = volume ? std::min(static_cast<int>(uz), cells - 1) : 0;
            double fx = ux - ix, fy = uy - iy, fz = volume ? uz - iz : 0.0;
            double v = 0.0;
            for (int dz = 0; dz < (volume ? 2 : 1); ++dz)
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                             (volume ? (dz ? fz : 1.0 - fz) : 1.0);
                  v += w * latv(ix + dx, iy + dy, iz + dz);
                }
            img.at(x, y, z, c) += amp * v;
          }
      amp *= 0.5;
    }
    double lo = 1e300, hi = -1e300;
    for (int z = 0; z < depth; ++z)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          double v = img.at(x, y, z, c);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
    double span = hi - lo;
    for (int z = 0; z < depth; ++z)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          img.at(x, y, z, c) = span > 0 ? (img.at(x, y, z, c) - lo) / span : 0.5;
  }
  return img;
}

SynthPair synth_pair(const Image& img, GroupSpec group, double sd_real,
                     double sd_imag, std::uint64_t seed, int grid_per_axis,
                     int n_terms) {
  if (sd_real < 0 || sd_imag < 0) throw Error::invalid("synth: negative spread");
  if (grid_per_axis < 1) throw Error::invalid("synth: need at least one grid line");
  if (matrix_dim(group) != img.dims + 1)
    throw Error::invalid("synth: group '" + group_name(group) + "' does not act on " +
                         std::to_string(img.dims) + "-d images");
  int k = img.dims;
  std::vector<int> dims{img.width, img.height};
  if (k == 3) dims.push_back(img.depth);

  // Interior lattice in the moving frame; row order is z-major, then y, x.
  int g = grid_per_axis;
  long n_pts = 1;
  for (int a = 0; a < k; ++a) n_pts *= g;
  Eigen::MatrixXd moving_pts(n_pts, k);
  {
    long row = 0;
    int gz = k == 3 ? g : 1;
    for (int iz = 0; iz < gz; ++iz)
      for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
          moving_pts(row, 0) = (ix + 1) / static_cast<double>(g + 1) * (dims[0] - 1);
          moving_pts(row, 1) = (iy + 1) / static_cast<double>(g + 1) * (dims[1] - 1);
          if (k == 3)
            moving_pts(row, 2) = (iz + 1) / static_cast<double>(g + 1) * (dims[2] - 1);
          ++row;
        }
  }

  Rng rng(seed);
  int ng = n_generators(group);
  for (int attempt = 0; attempt < 10; ++attempt) {
    CoefficientVector v = CoefficientVector::zero(group);
    for (int i = 0; i < ng; ++i) v.re[i] = sd_real * rng.normal();
    for (int i = 0; i < ng; ++i) v.im[i] = sd_imag * rng.normal();
    ForwardInverse fi = forward_inverse(group, v, n_terms);
    try {
      SynthPair sp;
      sp.moving = warp(img, fi.h_inv);

      PointSet mc(n_pts, k);
      for (long i = 0; i < n_pts; ++i)
        for (int a = 0; a < k; ++a)
          mc(i, a) = px_to_canonical(moving_pts(i, a), dims[static_cast<size_t>(a)]);
      PointSet fc = transform_points(fi.h_inv, mc);
      Eigen::MatrixXd fixed_pts(n_pts, k);
      bool inside = true;
      for (long i = 0; i < n_pts && inside; ++i)
        for (int a = 0; a < k; ++a) {
          double px = canonical_to_px(fc(i, a), dims[static_cast<size_t>(a)]);
          if (px < 0 || px > dims[static_cast<size_t>(a)] - 1) {
            inside = false;
            break;
          }
          fixed_pts(i, a) = px;
        }
      if (!inside) continue;  // landmark escaped the frame; redraw

      sp.fixed = img;
      sp.landmarks.fixed_pts = std::move(fixed_pts);
      sp.landmarks.moving_pts = moving_pts;
      sp.landmarks.fixed_dims = dims;
      sp.landmarks.moving_dims = dims;
      sp.true_v = v;
      sp.h = fi.h;
      sp.h_inv = fi.h_inv;
      return sp;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Numeric) throw;  // only singularity restarts
    }
  }
  throw Error::numeric("synth: transform stayed degenerate after 10 draws");
}

TransformResult synth_truth(const SynthPair& sp, GroupSpec group,
                            bool complex_coeffs, std::uint64_t seed, int n_terms) {
  TransformResult r;
  r.h = sp.h;
  r.h_inv = sp.h_inv;
  r.trajectory = {flatten(sp.true_v, complex_coeffs)};
  r.schedule.scales = {1.0};
  r.group = group;
  r.complex_coeffs = complex_coeffs;
  r.n_terms = n_terms;
  r.seed = seed;
  r.mask = full_mask(group);
  r.fixed_dims = sp.landmarks.fixed_dims;
  r.moving_dims = sp.landmarks.moving_dims;
  r.channels = sp.fixed.channels;
  return r;
}

}  // namespace odecme
