#include "fan/array.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "fan/error.hpp"

namespace fan {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double unnormalized_sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(x) / x;
}

// Distance from point p to the segment [a, b].
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab{b.x - a.x, b.y - a.y, b.z - a.z};
  const Vec3 ap{p.x - a.x, p.y - a.y, p.z - a.z};
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(ap, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 q{a.x + t * ab.x - p.x, a.y + t * ab.y - p.y, a.z + t * ab.z - p.z};
  return std::sqrt(dot(q, q));
}
}  // namespace

Vec3 ArrayGeometry::centroid() const {
  Vec3 c;
  for (const auto& m : mic_positions) {
    c.x += m.x;
    c.y += m.y;
    c.z += m.z;
  }
  const double n = static_cast<double>(mic_positions.size());
  return {c.x / n, c.y / n, c.z / n};
}

ArrayGeometry ArrayGeometry::default_circular(double diameter_m) {
  ArrayGeometry g;
  const double r = diameter_m / 2.0;
  for (int i = 0; i < 6; ++i) {
    const double ang = kTwoPi * i / 6.0;
    g.mic_positions.push_back({r * std::cos(ang), r * std::sin(ang), 0.0});
  }
  g.mic_positions.push_back({0.0, 0.0, 0.0});
  return g;
}

ArrayGeometry ArrayGeometry::subset(const std::vector<int>& indices) const {
  ArrayGeometry g;
  g.speed_of_sound = speed_of_sound;
  for (int i : indices) {
    if (i < 0 || i >= mics()) throw DataError("mic index out of range");
    g.mic_positions.push_back(mic_positions[i]);
  }
  return g;
}

LookDirection::LookDirection(double az, double el) : azimuth(az), elevation(el) {
  azimuth = std::fmod(azimuth, kTwoPi);
  if (azimuth < 0.0) azimuth += kTwoPi;
}

Vec3 LookDirection::source_unit() const {
  const double ce = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

std::vector<LookDirection> uniform_look_directions(int count) {
  std::vector<LookDirection> dirs;
  dirs.reserve(count);
  for (int d = 0; d < count; ++d) dirs.emplace_back(kTwoPi * d / count);
  return dirs;
}

double plane_wave_delay(const ArrayGeometry& g, const LookDirection& dir, int m) {
  const Vec3 c = g.centroid();
  const Vec3 s = dir.source_unit();
  const Vec3 r{g.mic_positions[m].x - c.x, g.mic_positions[m].y - c.y,
               g.mic_positions[m].z - c.z};
  return -dot(s, r) / g.speed_of_sound;
}

std::vector<cplx> steering_vector(const ArrayGeometry& g,
                                  const LookDirection& dir, double omega) {
  std::vector<cplx> v(g.mics());
  for (int m = 0; m < g.mics(); ++m) {
    const double phase = -omega * plane_wave_delay(g, dir, m);
    v[m] = {std::cos(phase), std::sin(phase)};
  }
  return v;
}

Eigen::MatrixXd diffuse_coherence(const ArrayGeometry& g, double omega) {
  const int m = g.mics();
  Eigen::MatrixXd gamma(m, m);
  for (int i = 0; i < m; ++i) {
    gamma(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      const Vec3 d{g.mic_positions[i].x - g.mic_positions[j].x,
                   g.mic_positions[i].y - g.mic_positions[j].y,
                   g.mic_positions[i].z - g.mic_positions[j].z};
      const double dist = std::sqrt(dot(d, d));
      const double v = unnormalized_sinc(omega * dist / g.speed_of_sound);
      gamma(i, j) = v;
      gamma(j, i) = v;
    }
  }
  return gamma;
}

std::pair<int, int> select_diagonal_pair(const ArrayGeometry& g) {
  if (g.mics() < 2) throw DataError("need at least 2 mics");
  const Vec3 c = g.centroid();
  std::vector<int> perimeter;
  for (int i = 0; i < g.mics(); ++i) {
    const Vec3 r{g.mic_positions[i].x - c.x, g.mic_positions[i].y - c.y,
                 g.mic_positions[i].z - c.z};
    if (std::sqrt(dot(r, r)) > 1e-9) perimeter.push_back(i);
  }
  if (perimeter.size() < 2) throw DataError("need at least 2 perimeter mics");

  std::pair<int, int> best{-1, -1};
  double best_dist = std::numeric_limits<double>::infinity();
  double best_sep = -1.0;
  for (std::size_t a = 0; a < perimeter.size(); ++a) {
    for (std::size_t b = a + 1; b < perimeter.size(); ++b) {
      const int i = perimeter[a], j = perimeter[b];
      const double dist =
          point_segment_distance(c, g.mic_positions[i], g.mic_positions[j]);
      const Vec3 d{g.mic_positions[i].x - g.mic_positions[j].x,
                   g.mic_positions[i].y - g.mic_positions[j].y,
                   g.mic_positions[i].z - g.mic_positions[j].z};
      const double sep = std::sqrt(dot(d, d));
      // Closest to the centroid wins; then the widest pair; then lowest index.
      if (dist < best_dist - 1e-12 ||
          (dist < best_dist + 1e-12 && sep > best_sep + 1e-12)) {
        best = {i, j};
        best_dist = dist;
        best_sep = sep;
      }
    }
  }
  return best;
}

SuperdirectiveWeights superdirective_weights(
    const ArrayGeometry& g, const std::vector<LookDirection>& directions,
    const std::vector<double>& omegas, double sigma2) {
  if (sigma2 < 0.0) throw DataError("sigma2 must be >= 0");
  const int m = g.mics();
  const int d_count = static_cast<int>(directions.size());
  const int k_count = static_cast<int>(omegas.size());

  SuperdirectiveWeights out;
  out.mics = m;
  out.directions = d_count;
  out.bins = k_count;
  out.sigma2 = sigma2;
  out.omegas = omegas;
  out.look_dirs = directions;
  out.w.resize(static_cast<std::size_t>(d_count) * k_count * m);

  // The coherence inverse depends only on the bin; solve once per bin.
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu;
  lu.reserve(k_count);
  for (int k = 0; k < k_count; ++k) {
    Eigen::MatrixXcd a = diffuse_coherence(g, omegas[k]).cast<cplx>();
    a += sigma2 * Eigen::MatrixXcd::Identity(m, m);
    if (sigma2 == 0.0) {
      Eigen::FullPivLU<Eigen::MatrixXcd> check(a);
      if (!check.isInvertible()) throw DataError("singular coherence");
    }
    lu.emplace_back(a);
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (int d = 0; d < d_count; ++d) {
    for (int k = 0; k < k_count; ++k) {
      const std::vector<cplx> v = steering_vector(g, directions[d], omegas[k]);
      Eigen::VectorXcd ve(m);
      for (int i = 0; i < m; ++i) ve(i) = v[i];
      const Eigen::VectorXcd y = lu[k].solve(ve);
      const cplx denom = ve.adjoint() * y;
      if (std::abs(denom) == 0.0) throw DataError("singular coherence");
      cplx* dst = out.w.data() + (static_cast<std::size_t>(d) * k_count + k) * m;
      for (int i = 0; i < m; ++i) dst[i] = y(i) / denom;
    }
  }
  return out;
}

std::vector<double> beampattern(std::span<const cplx> weights,
                                const ArrayGeometry& g, double omega,
                                const std::vector<double>& azimuth_grid) {
  if (azimuth_grid.empty()) throw DataError("empty azimuth grid");
  if (static_cast<int>(weights.size()) != g.mics())
    throw DataError("weight/mic count mismatch");
  std::vector<double> gains(azimuth_grid.size());
  for (std::size_t i = 0; i < azimuth_grid.size(); ++i) {
    const std::vector<cplx> v =
        steering_vector(g, LookDirection(azimuth_grid[i]), omega);
    cplx resp = 0.0;
    for (int m = 0; m < g.mics(); ++m) resp += std::conj(weights[m]) * v[m];
    gains[i] = std::norm(resp);
  }
  return gains;
}

ArrayGeometry load_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open geometry file: " + path);
  ArrayGeometry g;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x >> p.y >> p.z))
      throw DataError("bad geometry row: " + line);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw DataError("non-finite mic position");
    g.mic_positions.push_back(p);
  }
  if (g.mic_positions.empty()) throw DataError("empty geometry file");
  return g;
}

}  // namespace fan
