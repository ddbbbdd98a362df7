#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "fan/frame.hpp"

namespace fan {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

/// Microphone positions in meters plus the speed of sound.
struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  double speed_of_sound = 343.0;

  int mics() const { return static_cast<int>(mic_positions.size()); }
  Vec3 centroid() const;

  /// 6 mics equi-spaced on a circle of the given diameter plus one center
  /// mic (the last index). Mic 0 sits on the +x axis.
  static ArrayGeometry default_circular(double diameter_m = 0.072);

  /// Geometry restricted to a subset of mics, positions kept as-is.
  ArrayGeometry subset(const std::vector<int>& indices) const;
};

/// Far-field look direction. Azimuth is normalized into [0, 2*pi).
struct LookDirection {
  double azimuth = 0.0;
  double elevation = 0.0;

  LookDirection() = default;
  LookDirection(double az, double el = 0.0);

  /// Unit vector pointing from the array toward the source.
  Vec3 source_unit() const;
};

/// D equally spaced azimuths starting at 0, elevation 0.
std::vector<LookDirection> uniform_look_directions(int count);

/// Arrival delay of a plane wave from `dir` at mic m, in seconds,
/// referenced to the array centroid. Mics closer to the source get
/// negative (earlier) delays.
double plane_wave_delay(const ArrayGeometry& g, const LookDirection& dir, int m);

/// Unit-modulus phase factors v_m = exp(-i * omega * delay_m).
std::vector<cplx> steering_vector(const ArrayGeometry& g,
                                  const LookDirection& dir, double omega);

/// Spherically isotropic noise coherence, Gamma_ij = sinc(omega * d_ij / c)
/// with the unnormalized convention sin(x)/x. Real symmetric, unit diagonal.
Eigen::MatrixXd diffuse_coherence(const ArrayGeometry& g, double omega);

/// The perimeter pair whose connecting segment passes closest to the array
/// centroid; ties broken by larger separation, then lowest indices.
std::pair<int, int> select_diagonal_pair(const ArrayGeometry& g);

/// MVDR weights against diffuse noise with diagonal loading, one complex
/// M-vector per (direction, bin): w = A^-1 v / (v^H A^-1 v), A = Gamma +
/// sigma2*I. Satisfies the distortionless constraint w^H v = 1.
struct SuperdirectiveWeights {
  int mics = 0;
  int directions = 0;
  int bins = 0;
  double sigma2 = 0.0;
  std::vector<double> omegas;            // per bin, rad/s
  std::vector<LookDirection> look_dirs;  // per direction
  std::vector<cplx> w;                   // [direction][bin][mic]

  std::span<const cplx> at(int d, int k) const {
    return {w.data() + (static_cast<std::size_t>(d) * bins + k) * mics,
            static_cast<std::size_t>(mics)};
  }
};

SuperdirectiveWeights superdirective_weights(
    const ArrayGeometry& g, const std::vector<LookDirection>& directions,
    const std::vector<double>& omegas, double sigma2 = 1e-2);

/// |w^H v(theta)|^2 over an azimuth grid (elevation 0).
std::vector<double> beampattern(std::span<const cplx> weights,
                                const ArrayGeometry& g, double omega,
                                const std::vector<double>& azimuth_grid);

/// Plain-text geometry file: one "x y z" row per mic, meters.
ArrayGeometry load_geometry(const std::string& path);

}  // namespace fan
