#pragma once

#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "rfdose/tissue.hpp"

namespace rfdose {

inline constexpr double kC0 = 299792458.0;
inline constexpr double kMu0 = 4e-7 * std::numbers::pi;
inline constexpr double kEps0 = 1.0 / (kMu0 * kC0 * kC0);
inline const double kEta0 = std::sqrt(kMu0 / kEps0);

// Graded absorber parameters: polynomial order 4, sigma at the Gedney
// optimum scaled by sigma_factor, kappa up to kappa_max, linear alpha.
struct CpmlParams {
    int depth = 10;
    int order = 4;
    double sigma_factor = 0.8;
    double kappa_max = 8.0;
    double alpha_max = 0.24;
};

enum class AxisMode { cpml, pec, periodic };

enum class FieldComp { ex, ey, ez };

struct SoftSource {
    FieldComp comp = FieldComp::ez;
    std::size_t i = 0, j = 0, k = 0;
    double scale = 1.0; // multiplies the common waveform
};

struct DipoleSource {
    Band band = Band::f900MHz;
    double total_length_mm = 0.0; // 0 = band default (157 / 79 / 47 mm)
    double standoff_mm = 20.0;
    double amplitude = 1.0; // drive current, A
};

// Half-wavelength antenna length used per band.
double dipole_length_mm(Band band);

struct GridConfig {
    double delta_mm = 1.0;
    int margin_cells = 20; // air between any structure and the absorber
    CpmlParams cpml;
    std::size_t max_cells_per_axis = 350;
};

// One absorber profile per axis, evaluated at the integer (E) and half (H)
// grid positions. Non-absorbing axes hold kappa=1, c=0 so the update loops
// stay uniform.
struct PmlAxis {
    std::vector<double> ik_e, b_e, c_e; // size n+1, ik = 1/kappa
    std::vector<double> ik_h, b_h, c_h; // size n
};

struct SimulationGrid {
    std::size_t nx = 0, ny = 0, nz = 0; // cells
    double delta = 0.0;                 // m
    double dt = 0.0;                    // s
    double freq = 0.0;                  // Hz; 0 = no periodic drive
    std::size_t steps_per_period = 0;   // 0 when freq == 0
    AxisMode mode[3] = {AxisMode::pec, AxisMode::pec, AxisMode::pec};
    CpmlParams cpml;
    PmlAxis pml[3];

    // cell-centered materials
    GridD sigma_cell, eps_cell, rho_cell;
    // per-edge update coefficients, shaped like the E component arrays
    GridD ca_ex, cb_ex, ca_ey, cb_ey, ca_ez, cb_ez;

    std::vector<SoftSource> sources;
    std::function<double(double)> waveform; // drive current I(t), A

    bool has_feed = false;
    std::size_t feed_i = 0, feed_j = 0, feed_k = 0; // Ez gap edge
    std::vector<std::size_t> pec_ez;                // antenna arm edges (linear)
    std::size_t dipole_cells = 0;

    // placement of the (resampled) material box inside the grid
    std::size_t head_x0 = 0, head_y0 = 0, head_z0 = 0;
    std::size_t head_nx = 0, head_ny = 0, head_nz = 0;
};

struct FeedSample {
    long long step = 0;
    double v = 0.0; // gap voltage at (step)*dt
    double i = 0.0; // loop current at (step - 1/2)*dt
};

struct FieldState {
    GridD ex, ey, ez, hx, hy, hz;
    // absorber convolution accumulators, one per curl term
    GridD pexy, pexz, peyz, peyx, pezx, pezy;
    GridD phxy, phxz, phyz, phyx, phzx, phzy;
    long long step = 0;
    // Energy tracking snapshots the fields straddling one instant: E right
    // before its update together with H before and after its own.
    bool track_energy = false;
    GridD hx_prev, hy_prev, hz_prev;
    GridD ex_prev, ey_prev, ez_prev;
    std::vector<FeedSample> trace;
};

struct PhasorField {
    // voxel-centered complex amplitudes (peak convention), one per cell
    GridC ex, ey, ez;
    // staggered-edge phasors kept for flux and probe work
    GridC ex_edge, ey_edge, ez_edge, hx_edge, hy_edge, hz_edge;
    std::complex<double> feed_v{0.0, 0.0};
    std::complex<double> feed_i{0.0, 0.0};
    double accepted_power_w = 0.0;
    int periods = 0;
    double delta = 0.0;
    double freq = 0.0;
};

struct SteadyStateConfig {
    int min_periods = 5;
    int max_periods = 80;
    double tol = 0.005; // relative feed-amplitude change between periods
    // convergence probe when there is no feed: E component edge to watch
    bool has_probe = false;
    SoftSource probe;
};

struct FeedMetrics {
    std::complex<double> impedance{0.0, 0.0};
    double accepted_power_w = 0.0;
};

struct Simulation {
    SimulationGrid grid;
    FieldState state;
};

// Low-level grid factory used by the physics tests: uniform material (or
// vacuum when the grids are empty), no sources.
SimulationGrid make_grid(std::size_t nx, std::size_t ny, std::size_t nz, double delta_mm,
                         double freq_hz, AxisMode mode_x, AxisMode mode_y, AxisMode mode_z,
                         const CpmlParams& cpml, const GridD& sigma = {}, const GridD& eps_r = {});

FieldState make_state(const SimulationGrid& grid);

// Assembles the exposure domain: resampled material box, z-directed dipole at
// the lateral extremum of the tissue at mid-height, absorber on all sides.
Simulation build_simulation(const PropertyMaps& maps, const DipoleSource& source,
                            const GridConfig& config);

// One leapfrog update: H from E, then E from H, then source injection.
void step(const SimulationGrid& grid, FieldState& state);

// Runs whole periods until the feed-current amplitude settles, then extracts
// single-frequency phasors over one further period.
PhasorField run_to_steady_state(const SimulationGrid& grid, FieldState& state,
                                const SteadyStateConfig& config);

FeedMetrics feed_metrics(const PhasorField& phasors);

PhasorField normalize_to_power(PhasorField phasors, double target_w = 1.0);

// Discrete EM energy; exact invariant for lossless closed boxes. Needs
// state.track_energy set before the steps of interest.
double field_energy(const SimulationGrid& grid, const FieldState& state);

// Net outward flux of the time-averaged Poynting vector through the box
// `inset` cells in from every wall.
double poynting_box_power(const SimulationGrid& grid, const PhasorField& phasors,
                          std::size_t inset);

// (2/N) * sum x_n exp(-j w t_n), t_n = t0 + n dt: the peak phasor of a real
// sinusoid sampled over whole periods.
std::complex<double> dft_peak_phasor(const std::vector<double>& samples, double freq_hz,
                                     double dt, double t0);

// Nearest-neighbor resampling between voxel pitches.
GridD resample_nearest(const GridD& src, double src_mm, double dst_mm);

struct ExposureConfig {
    GridConfig grid;
    SteadyStateConfig steady;
    double power_w = 1.0;
};

struct ExposureResult {
    // cropped to the resampled material box, voxel-centered, power-normalized
    PhasorField phasors;
    PropertyMaps maps; // same box, fdtd pitch
    std::complex<double> impedance{0.0, 0.0};
    double raw_accepted_w = 0.0;
    double radiated_power_w = 0.0; // post-normalization
    double absorbed_power_w = 0.0; // post-normalization
    int periods = 0;
    std::size_t steps_per_period = 0;
    std::vector<FeedSample> trace;
};

ExposureResult simulate_dipole_exposure(const PropertyMaps& maps, const DipoleSource& source,
                                        const ExposureConfig& config);

} // namespace rfdose
