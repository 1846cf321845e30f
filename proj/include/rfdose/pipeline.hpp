#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfdose/run_config.hpp"
#include "rfdose/tissue.hpp"

namespace rfdose {

inline constexpr const char* kCodeVersion = "0.1.0";

// Stages form a ladder; running a stage reproduces everything below it, so a
// subcommand is just "build up to here". Checkpoint reuse short-circuits the
// training stage when all three orientation files already exist.
enum class PipelineStage { inputs, standard, train, estimate, fdtd, sar, full };

PipelineStage parse_stage(const std::string& name);
std::string stage_name(PipelineStage s);

struct TissueErrorRow {
    int tissue_id = 0;
    std::size_t count = 0;
    double mae_sigma = 0.0, mae_epsilon = 0.0, mae_rho = 0.0;
};

struct ExposureSummary {
    std::complex<double> impedance;
    double raw_accepted_w = 0.0;
    double radiated_w = 0.0;
    double absorbed_w = 0.0;
    std::size_t periods = 0;
    std::size_t steps_per_period = 0;
};

struct PipelineOutputs {
    std::string out_dir;
    std::string subject;
    double frequency_hz = 0.0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    PipelineStage stage = PipelineStage::full;

    // Property comparison, learned against standard, present from the
    // estimate stage onward.
    std::vector<TissueErrorRow> tissue_errors;
    double max_prerescale = 0.0;   // largest averaged network output, sigmoid-bounded
    double mean_max_estimate = 0.0; // mean over the three maps of the rescaled maxima

    // Dosimetry, present when the run reached the sar/full stages.
    bool has_dosimetry = false;
    ExposureSummary fdtd_standard, fdtd_learned;
    double e_abs = 0.0;
    double pssar_std = 0.0, pssar_learned = 0.0, e_max = 0.0;
    std::size_t pssar_x = 0, pssar_y = 0, pssar_z = 0;
};

struct RunOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<PipelineStage> stage;
};

PipelineOutputs run_pipeline(const RunConfig& cfg, const RunOverrides& overrides = {});

enum class SweepAxis { tau, subjects };

struct SweepPoint {
    double value = 0.0;
    PipelineOutputs outputs;
};

// One pipeline run per axis value, same master seed, each point in its own
// subdirectory; emits the per-tissue error table as a CSV at the sweep root.
std::vector<SweepPoint> run_sweep(const RunConfig& cfg, SweepAxis axis,
                                  const RunOverrides& overrides = {});

} // namespace rfdose
