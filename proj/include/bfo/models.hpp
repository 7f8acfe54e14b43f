#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "bfo/fem.hpp"
#include "bfo/linalg.hpp"
#include "bfo/observers.hpp"

namespace bfo::models {

using fem::FieldSpec;
using fem::Mesh1D;
using fem::ObservationProfile;
using linalg::Complex;
using linalg::CVec;
using linalg::RVec;
using observers::Equation;
using observers::ObservationTrace;
using observers::WaveState;

/// One reconstruction problem: geometry, observation window, time grid and
/// the truth. For the wave, `truth` is w_0 and `truth_velocity` is w_1.
struct ProblemInstance {
  Equation equation = Equation::schrodinger;
  Mesh1D mesh{1.0, 32};
  ObservationProfile profile = ObservationProfile::standard();
  double tau = 1.0;
  double dt = 1.0 / 32;
  int steps = 32;
  FieldSpec truth = FieldSpec::sine_sum({1.0, 0.5});
  FieldSpec truth_velocity = FieldSpec::sine_sum({});
  /// Allow truths without a regularity guarantee (custom callables).
  bool unsafe = false;

  /// Throws std::invalid_argument with a field-level message.
  void validate() const;
};

double default_tau(Equation eq);

/// Default instance on `n_cells` cells of the unit interval with dt = kappa h
/// rounded so that steps * dt = tau exactly.
ProblemInstance default_instance(Equation eq, int n_cells, double kappa = 1.0);

/// Number of steps and step size for the coupling dt ~ kappa h.
std::pair<int, double> time_grid(double tau, double h, double kappa);

struct NoiseSpec {
  double eps = 0.0;
  std::uint64_t seed = 0;
};

/// Exact-in-time propagation of the conservative system on a mesh `refine`
/// times finer than the instance mesh, through the pencil eigendecomposition.
class ExactPropagator {
 public:
  ExactPropagator(const ProblemInstance& instance, int refine);

  const fem::FemOperators& fine_ops() const noexcept { return *fine_; }
  int refine() const noexcept { return refine_; }
  const linalg::PencilEig& eig() const noexcept { return eig_; }

  /// Fine-mesh nodal coefficients of z(t) (Schrodinger instances).
  CVec schrodinger_state(double t) const;
  /// Fine-mesh (w(t), w'(t)) (wave instances).
  WaveState wave_state(double t) const;

 private:
  Equation equation_;
  int refine_;
  std::shared_ptr<const fem::FemOperators> fine_;
  linalg::PencilEig eig_;
  RVec modal_position_;
  RVec modal_velocity_;
};

/// Samples y^l = c z(t_l) (or c w'(t_l)) on the fine mesh, restricted to the
/// instance mesh by injection, with noise added afterwards.
ObservationTrace generate_observation(const ProblemInstance& instance, int refine = 2,
                                      const NoiseSpec& noise = {});

/// Adds independent uniform noise on [-eps, eps] to every nodal value (real and
/// imaginary parts separately). eps = 0 returns an identical copy.
ObservationTrace add_noise(const ObservationTrace& trace, const NoiseSpec& noise);

// ---------------------------------------------------------------------------
// Text formats.

void write_trace(std::ostream& out, const ObservationTrace& trace);
void write_trace(const std::string& path, const ObservationTrace& trace);
ObservationTrace read_trace(std::istream& in);
ObservationTrace read_trace(const std::string& path);

/// Header lines shared by trace and estimate files, one "# key=value" each.
std::string trace_header_text(const observers::TraceHeader& header);

/// Estimate files: same header and numeric format as traces. Schrodinger
/// estimates hold one interleaved complex row, wave estimates two rows
/// (position, velocity).
void write_estimate(const std::string& path, const observers::TraceHeader& header,
                    const CVec& estimate);
void write_estimate(const std::string& path, const observers::TraceHeader& header,
                    const WaveState& estimate);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::string& path);

}  // namespace bfo::models
