#include "rfdose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "rfdose/checkpoint.hpp"
#include "rfdose/condnet.hpp"
#include "rfdose/errors.hpp"
#include "rfdose/fdtd.hpp"
#include "rfdose/phantom.hpp"
#include "rfdose/rng.hpp"
#include "rfdose/sar.hpp"
#include "rfdose/scaling.hpp"
#include "rfdose/training.hpp"
#include "rfdose/volume_io.hpp"

namespace fs = std::filesystem;

namespace rfdose {

PipelineStage parse_stage(const std::string& name) {
    if (name == "inputs") return PipelineStage::inputs;
    if (name == "standard") return PipelineStage::standard;
    if (name == "train") return PipelineStage::train;
    if (name == "estimate") return PipelineStage::estimate;
    if (name == "fdtd") return PipelineStage::fdtd;
    if (name == "sar") return PipelineStage::sar;
    if (name == "full") return PipelineStage::full;
    throw UsageError("unknown pipeline stage '" + name + "'");
}

std::string stage_name(PipelineStage s) {
    switch (s) {
        case PipelineStage::inputs: return "inputs";
        case PipelineStage::standard: return "standard";
        case PipelineStage::train: return "train";
        case PipelineStage::estimate: return "estimate";
        case PipelineStage::fdtd: return "fdtd";
        case PipelineStage::sar: return "sar";
        case PipelineStage::full: return "full";
    }
    return "?";
}

namespace {

struct Params {
    Band band = Band::f900MHz;
    double tau = 0.1;
    std::uint64_t seed = 0;
    std::string out_dir;
    PipelineStage stage = PipelineStage::full;
    std::string subject = "phantom";

    bool external_inputs = false;
    std::string labels_path, t1_path, t2_path;

    std::string preset = "default_head";
    std::size_t phantom_size = 64;
    double phantom_voxel_mm = 1.0;
    double noise_std = 20.0;

    int train_subjects = 2;
    int epochs = 4;
    int batch = 4;
    double lr = 1e-3;
    std::size_t input_size = 64;
    std::size_t max_slices = 0;
    std::string checkpoint_dir;

    GridConfig grid;
    double standoff_mm = 20.0;
    double power_w = 1.0;
    int max_periods = 80;
    double tol = 0.005;
};

int input_m(std::size_t s) {
    for (int m = 4; m <= 8; ++m)
        if ((std::size_t(1) << m) == s) return m;
    throw UsageError("train.input_size must be a power of two in [16, 256], got " +
                     std::to_string(s));
}

Params parse_params(const RunConfig& cfg, const RunOverrides& ov) {
    Params p;
    p.band = parse_band(cfg.require_string("frequency"));
    p.tau = cfg.get_double("tau", 0.1);
    if (!(p.tau >= 0.0) || p.tau >= 1.0)
        throw UsageError("tau must lie in [0, 1), got " + std::to_string(p.tau));
    p.seed = ov.seed ? *ov.seed : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    p.out_dir = ov.out_dir ? *ov.out_dir : cfg.resolve_path(cfg.require_string("out_dir"));
    p.stage = ov.stage ? *ov.stage : parse_stage(cfg.get_string("pipeline.stage", "full"));

    if (cfg.has("labels_path") || cfg.has("t1_path") || cfg.has("t2_path")) {
        if (!cfg.has("labels_path") || !cfg.has("t1_path") || !cfg.has("t2_path"))
            throw UsageError("labels_path, t1_path and t2_path must be given together");
        p.external_inputs = true;
        p.labels_path = cfg.resolve_path(cfg.require_string("labels_path"));
        p.t1_path = cfg.resolve_path(cfg.require_string("t1_path"));
        p.t2_path = cfg.resolve_path(cfg.require_string("t2_path"));
        p.subject = fs::path(p.labels_path).stem().string();
    }

    p.preset = cfg.get_string("phantom.preset", "default_head");
    if (p.preset != "default_head" && p.preset != "three_tissue")
        throw UsageError("unknown phantom preset '" + p.preset + "'");
    p.phantom_size = static_cast<std::size_t>(cfg.get_int("phantom.size", 64));
    if (p.phantom_size < 8) throw UsageError("phantom.size must be >= 8");
    p.phantom_voxel_mm = cfg.get_double("phantom.voxel_mm", 1.0);
    if (!(p.phantom_voxel_mm > 0)) throw UsageError("phantom.voxel_mm must be > 0");
    p.noise_std = cfg.get_double("phantom.noise_std", 20.0);
    if (p.noise_std < 0) throw UsageError("phantom.noise_std must be >= 0");

    p.train_subjects = static_cast<int>(cfg.get_int("train.subjects", 2));
    if (p.train_subjects < 1) throw UsageError("train.subjects must be >= 1");
    p.epochs = static_cast<int>(cfg.get_int("train.epochs", 4));
    if (p.epochs < 0) throw UsageError("train.epochs must be >= 0");
    p.batch = static_cast<int>(cfg.get_int("train.batch", 4));
    if (p.batch < 1) throw UsageError("train.batch must be >= 1");
    p.lr = cfg.get_double("train.lr", 1e-3);
    if (!(p.lr > 0)) throw UsageError("train.lr must be > 0");
    p.input_size = static_cast<std::size_t>(cfg.get_int("train.input_size", 64));
    input_m(p.input_size);
    p.max_slices = static_cast<std::size_t>(cfg.get_int("train.max_slices", 0));
    if (cfg.has("train.checkpoint"))
        p.checkpoint_dir = cfg.resolve_path(cfg.require_string("train.checkpoint"));

    p.grid.delta_mm = cfg.get_double("fdtd.voxel_mm", 2.5);
    p.grid.margin_cells = static_cast<int>(cfg.get_int("fdtd.padding_cells", 20));
    p.grid.cpml.depth = static_cast<int>(cfg.get_int("fdtd.cpml_depth", 10));
    p.standoff_mm = cfg.get_double("fdtd.standoff_mm", 20.0);
    p.power_w = cfg.get_double("fdtd.power_w", 1.0);
    p.max_periods = static_cast<int>(cfg.get_int("fdtd.max_periods", 80));
    p.tol = cfg.get_double("fdtd.tol", 0.005);
    return p;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_csv(const std::string& path, const char* schema) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.precision(17);
    out << "# schema: " << schema << "\n";
    return out;
}

template <typename F>
auto stage_guard(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.cls(), std::string("stage '") + name + "': " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorClass::numeric, std::string("stage '") + name + "': " + e.what());
    }
}

PhantomSpec base_spec(const Params& p, std::size_t n) {
    PhantomSpec spec;
    if (p.preset == "three_tissue") {
        spec.nx = spec.ny = spec.nz = n;
        spec.voxel_size_mm = p.phantom_voxel_mm;
        const double half = 0.5 * static_cast<double>(n) * p.phantom_voxel_mm;
        spec.shells = {
            {12, 0.90 * half, 650, 280}, // skin
            {3, 0.78 * half, 180, 80},   // cortical bone
            {4, 0.62 * half, 620, 420},  // grey matter
        };
    } else {
        spec = PhantomSpec::default_head(n, p.phantom_voxel_mm);
    }
    spec.noise_std = p.noise_std;
    return spec;
}

// Training subjects are the evaluation geometry with jittered shell radii
// and their own noise streams. The jitter keeps the shells strictly nested.
PhantomSpec variant_spec(const Params& p, std::uint64_t subject_seed) {
    PhantomSpec spec = base_spec(p, p.input_size);
    Rng rng(subject_seed);
    const double global = 0.95 + 0.10 * rng.uniform();
    double prev = 1e300;
    for (PhantomShell& sh : spec.shells) {
        double r = sh.radius_mm * global * (0.98 + 0.04 * rng.uniform());
        r = std::min(r, prev * 0.995);
        sh.radius_mm = r;
        prev = r;
    }
    spec.seed = derive_seed(subject_seed, "noise");
    return spec;
}

GridD unpad_cube(const GridD& cube, std::size_t nx, std::size_t ny, std::size_t nz) {
    GridD out(nx, ny, nz, 0.0);
    const long long S = static_cast<long long>(cube.nx());
    const long long ox = (S - static_cast<long long>(nx)) / 2;
    const long long oy = (S - static_cast<long long>(ny)) / 2;
    const long long oz = (S - static_cast<long long>(nz)) / 2;
    for (std::size_t z = 0; z < nz; ++z) {
        const long long cz = static_cast<long long>(z) + oz;
        if (cz < 0 || cz >= S) continue;
        for (std::size_t y = 0; y < ny; ++y) {
            const long long cy = static_cast<long long>(y) + oy;
            if (cy < 0 || cy >= S) continue;
            for (std::size_t x = 0; x < nx; ++x) {
                const long long cx = static_cast<long long>(x) + ox;
                if (cx < 0 || cx >= S) continue;
                out(x, y, z) = cube(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy),
                                    static_cast<std::size_t>(cz));
            }
        }
    }
    return out;
}

// The network never emits an exact zero, so the subject's own air mask is
// applied before dosimetry; it also pins both pipelines to the same head box.
void mask_air(PropertyMaps& maps, const LabelVolume& labels) {
    for (std::size_t i = 0; i < maps.sigma.size(); ++i)
        if (labels.labels[i] == 0) {
            maps.sigma[i] = 0.0;
            maps.epsilon[i] = 1.0;
            maps.rho[i] = 0.0;
        }
}

void write_tissue_stats_csv(const std::string& path, const PropertyMaps& maps,
                            const LabelVolume& labels) {
    auto stats = tissue_stats(maps, labels);
    auto out = open_csv(path, "tissue-stats-v1");
    out << "tissue_id,count,mean_sigma,std_sigma,mean_epsilon,std_epsilon,mean_rho,std_rho\n";
    for (const TissueStat& s : stats) {
        if (s.count == 0) continue;
        out << s.tissue_id << ',' << s.count << ',' << s.mean_sigma << ',' << s.std_sigma << ','
            << s.mean_epsilon << ',' << s.std_epsilon << ',' << s.mean_rho << ',' << s.std_rho
            << "\n";
    }
}

std::vector<TissueErrorRow> tissue_property_errors(const PropertyMaps& std_maps,
                                                   const PropertyMaps& learned,
                                                   const LabelVolume& labels) {
    std::vector<TissueErrorRow> rows;
    for (int id = 1; id <= kNumTissues; ++id) {
        TissueErrorRow row;
        row.tissue_id = id;
        for (std::size_t i = 0; i < labels.labels.size(); ++i) {
            if (labels.labels[i] != id) continue;
            ++row.count;
            row.mae_sigma += std::fabs(std_maps.sigma[i] - learned.sigma[i]);
            row.mae_epsilon += std::fabs(std_maps.epsilon[i] - learned.epsilon[i]);
            row.mae_rho += std::fabs(std_maps.rho[i] - learned.rho[i]);
        }
        if (row.count == 0) continue;
        row.mae_sigma /= static_cast<double>(row.count);
        row.mae_epsilon /= static_cast<double>(row.count);
        row.mae_rho /= static_cast<double>(row.count);
        rows.push_back(row);
    }
    return rows;
}

void write_tissue_errors_csv(const std::string& path, const std::vector<TissueErrorRow>& rows) {
    auto out = open_csv(path, "tissue-error-v1");
    out << "tissue_id,count,mae_sigma,mae_epsilon,mae_rho\n";
    for (const TissueErrorRow& r : rows)
        out << r.tissue_id << ',' << r.count << ',' << r.mae_sigma << ',' << r.mae_epsilon << ','
            << r.mae_rho << "\n";
}

void write_loss_csv(const std::string& path, const std::vector<TracePoint>& trace) {
    auto out = open_csv(path, "loss-trace-v1");
    out << "epoch,step,loss\n";
    for (const TracePoint& t : trace) out << t.epoch << ',' << t.step << ',' << t.loss << "\n";
}

void write_feed_trace_csv(const std::string& path, const std::vector<FeedSample>& trace) {
    auto out = open_csv(path, "feed-trace-v1");
    out << "step,feed_v,feed_i\n";
    for (const FeedSample& s : trace) out << s.step << ',' << s.v << ',' << s.i << "\n";
}

double grid_max(const GridD& g) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, g[i]);
    return m;
}

ExposureSummary summarize(const ExposureResult& r) {
    ExposureSummary s;
    s.impedance = r.impedance;
    s.raw_accepted_w = r.raw_accepted_w;
    s.radiated_w = r.radiated_power_w;
    s.absorbed_w = r.absorbed_power_w;
    s.periods = static_cast<std::size_t>(r.periods);
    s.steps_per_period = r.steps_per_period;
    return s;
}

void write_report(const std::string& path, const PipelineOutputs& o, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.precision(17);
    out << "# schema: report-v1\n";
    out << "version: " << kCodeVersion << "\n";
    out << "seed: " << o.seed << "\n";
    out << "subject: " << o.subject << "\n";
    out << "frequency_hz: " << o.frequency_hz << "\n";
    out << "tau: " << o.tau << "\n";
    out << "stage: " << stage_name(o.stage) << "\n";
    if (!o.tissue_errors.empty()) {
        out << "max_prerescale: " << o.max_prerescale << "\n";
        out << "mean_max_estimate: " << o.mean_max_estimate << "\n";
    }
    if (o.has_dosimetry) {
        out << "impedance_standard_ohm: " << o.fdtd_standard.impedance.real() << ' '
            << o.fdtd_standard.impedance.imag() << "\n";
        out << "impedance_learned_ohm: " << o.fdtd_learned.impedance.real() << ' '
            << o.fdtd_learned.impedance.imag() << "\n";
        out << "absorbed_standard_w: " << o.fdtd_standard.absorbed_w << "\n";
        out << "absorbed_learned_w: " << o.fdtd_learned.absorbed_w << "\n";
        out << "pssar_standard: " << o.pssar_std << "\n";
        out << "pssar_learned: " << o.pssar_learned << "\n";
        if (o.stage == PipelineStage::full) {
            out << "e_abs: " << o.e_abs << "\n";
            out << "e_max: " << o.e_max << "\n";
        }
    }
    out << "config-begin\n" << cfg.canonical_text() << "config-end\n";
}

struct OrientationNets {
    std::vector<CondNet> nets; // axial, sagittal, coronal
};

OrientationNets make_nets(const Params& p) {
    OrientationNets on;
    const Orientation all[3] = {Orientation::axial, Orientation::sagittal, Orientation::coronal};
    if (!p.checkpoint_dir.empty()) {
        for (Orientation o : all) {
            const std::string path =
                (fs::path(p.checkpoint_dir) / (orientation_name(o) + ".cnet")).string();
            on.nets.push_back(load_checkpoint(path));
        }
        return on;
    }

    std::vector<Subject> dataset;
    for (int i = 0; i < p.train_subjects; ++i) {
        PhantomSpec spec = variant_spec(p, derive_seed(p.seed, "train-subject",
                                                       static_cast<std::uint64_t>(i)));
        Phantom ph = make_phantom(spec);
        PropertyMaps maps = assign_properties(ph.labels, p.band);
        ScalingParams sp = ScalingParams::for_band(p.band, p.tau);
        Subject s;
        s.t1 = normalize_mri(ph.t1);
        s.t2 = normalize_mri(ph.t2);
        s.targets = normalize_properties(maps, sp);
        dataset.push_back(std::move(s));
    }

    const std::string ckpt_dir = (fs::path(p.out_dir) / "checkpoints").string();
    ensure_dir(ckpt_dir);
    for (Orientation o : all) {
        CondNetConfig ncfg;
        ncfg.m = input_m(p.input_size);
        ncfg.seed = derive_seed(p.seed, "net-init", static_cast<std::uint64_t>(o));
        CondNet net(ncfg);
        TrainConfig tc;
        tc.epochs = p.epochs;
        tc.batch_size = p.batch;
        tc.adam.lr = p.lr;
        tc.seed = derive_seed(p.seed, "train", static_cast<std::uint64_t>(o));
        tc.orientation = o;
        tc.max_slices = p.max_slices;
        auto trace = train(net, dataset, tc);
        write_loss_csv((fs::path(ckpt_dir) / ("loss_" + orientation_name(o) + ".csv")).string(),
                       trace);
        save_checkpoint(net, (fs::path(ckpt_dir) / (orientation_name(o) + ".cnet")).string());
        on.nets.push_back(std::move(net));
    }
    return on;
}

ExposureResult run_exposure(const Params& p, const PropertyMaps& maps, const std::string& dir) {
    ensure_dir(dir);
    ExposureConfig ec;
    ec.grid = p.grid;
    ec.steady.max_periods = p.max_periods;
    ec.steady.tol = p.tol;
    ec.power_w = p.power_w;
    DipoleSource src;
    src.band = p.band;
    src.standoff_mm = p.standoff_mm;
    ExposureResult res = simulate_dipole_exposure(maps, src, ec);

    write_feed_trace_csv((fs::path(dir) / "trace.csv").string(), res.trace);
    const double mm = res.maps.voxel_size_mm;
    write_volume(res.phasors.ex, mm, (fs::path(dir) / "ex.dvol").string());
    write_volume(res.phasors.ey, mm, (fs::path(dir) / "ey.dvol").string());
    write_volume(res.phasors.ez, mm, (fs::path(dir) / "ez.dvol").string());
    write_volume(res.maps.sigma, mm, (fs::path(dir) / "sigma.dvol").string());
    write_volume(res.maps.rho, mm, (fs::path(dir) / "rho.dvol").string());
    return res;
}

PipelineOutputs run_params(const RunConfig& cfg, const Params& p) {
    PipelineOutputs out;
    out.out_dir = p.out_dir;
    out.subject = p.subject;
    out.frequency_hz = band_hz(p.band);
    out.tau = p.tau;
    out.seed = p.seed;
    out.stage = p.stage;

    ensure_dir(p.out_dir);
    const auto sub = [&](const char* d) { return (fs::path(p.out_dir) / d).string(); };

    LabelVolume labels;
    MriVolume t1, t2;
    stage_guard("inputs", [&] {
        if (p.external_inputs) {
            labels = read_label_volume(p.labels_path);
            double v1 = 0.0, v2 = 0.0;
            t1.intensities = read_real_volume(p.t1_path, &v1);
            t2.intensities = read_real_volume(p.t2_path, &v2);
            t1.voxel_size_mm = v1;
            t2.voxel_size_mm = v2;
            if (!labels.labels.size() || !t1.intensities.same_shape(labels.labels) ||
                !t2.intensities.same_shape(labels.labels))
                throw DomainError("labels, T1 and T2 volumes must share dimensions");
            if (std::fabs(v1 - labels.voxel_size_mm) > 1e-9 ||
                std::fabs(v2 - labels.voxel_size_mm) > 1e-9)
                throw DomainError("labels, T1 and T2 volumes must share voxel pitch");
        } else {
            PhantomSpec spec = base_spec(p, p.phantom_size);
            spec.seed = derive_seed(p.seed, "phantom-eval");
            Phantom ph = make_phantom(spec);
            labels = std::move(ph.labels);
            t1 = std::move(ph.t1);
            t2 = std::move(ph.t2);
        }
        ensure_dir(sub("inputs"));
        write_volume(labels, (fs::path(sub("inputs")) / "labels.dvol").string());
        write_volume(t1.intensities, t1.voxel_size_mm,
                     (fs::path(sub("inputs")) / "t1.dvol").string());
        write_volume(t2.intensities, t2.voxel_size_mm,
                     (fs::path(sub("inputs")) / "t2.dvol").string());
    });
    if (p.stage == PipelineStage::inputs) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    PropertyMaps maps_std;
    stage_guard("standard", [&] {
        maps_std = assign_properties(labels, p.band);
        ensure_dir(sub("standard"));
        write_volume(maps_std.sigma, maps_std.voxel_size_mm,
                     (fs::path(sub("standard")) / "sigma.dvol").string());
        write_volume(maps_std.epsilon, maps_std.voxel_size_mm,
                     (fs::path(sub("standard")) / "epsilon.dvol").string());
        write_volume(maps_std.rho, maps_std.voxel_size_mm,
                     (fs::path(sub("standard")) / "rho.dvol").string());
        write_tissue_stats_csv((fs::path(sub("standard")) / "tissue_stats.csv").string(),
                               maps_std, labels);
    });
    if (p.stage == PipelineStage::standard) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    OrientationNets nets = stage_guard("train", [&] { return make_nets(p); });
    if (p.stage == PipelineStage::train) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    PropertyMaps maps_learned;
    stage_guard("estimate", [&] {
        const std::size_t S = p.input_size;
        const ScalingParams sp = ScalingParams::for_band(p.band, p.tau);
        MriVolume n1 = normalize_mri(t1);
        MriVolume n2 = normalize_mri(t2);
        MriVolume p1{pad_crop_cube(n1.intensities, S), n1.voxel_size_mm};
        MriVolume p2{pad_crop_cube(n2.intensities, S), n2.voxel_size_mm};
        SubjectEstimate est =
            estimate_subject(nets.nets[0], nets.nets[1], nets.nets[2], p1, p2, sp, p.band);

        out.max_prerescale = std::max({grid_max(est.averaged.sigma), grid_max(est.averaged.epsilon),
                                       grid_max(est.averaged.rho)});
        const ScalingParams ref = ScalingParams::for_band(p.band, 0.0);
        out.mean_max_estimate = (grid_max(est.rescaled.sigma) / ref.max_sigma +
                                 (grid_max(est.rescaled.epsilon) - 1.0) / ref.max_epsilon +
                                 grid_max(est.rescaled.rho) / ref.max_rho) /
                                3.0;

        maps_learned.band = p.band;
        maps_learned.voxel_size_mm = labels.voxel_size_mm;
        maps_learned.sigma =
            unpad_cube(est.rescaled.sigma, labels.labels.nx(), labels.labels.ny(),
                       labels.labels.nz());
        maps_learned.epsilon =
            unpad_cube(est.rescaled.epsilon, labels.labels.nx(), labels.labels.ny(),
                       labels.labels.nz());
        maps_learned.rho = unpad_cube(est.rescaled.rho, labels.labels.nx(), labels.labels.ny(),
                                      labels.labels.nz());
        // Voxels outside the estimation cube are zero-filled; permittivity
        // floors at vacuum so they stay simulable.
        for (std::size_t i = 0; i < maps_learned.epsilon.size(); ++i)
            maps_learned.epsilon[i] = std::max(maps_learned.epsilon[i], 1.0);
        mask_air(maps_learned, labels);

        ensure_dir(sub("learned"));
        const double mm = labels.voxel_size_mm;
        write_volume(maps_learned.sigma, mm, (fs::path(sub("learned")) / "sigma.dvol").string());
        write_volume(maps_learned.epsilon, mm,
                     (fs::path(sub("learned")) / "epsilon.dvol").string());
        write_volume(maps_learned.rho, mm, (fs::path(sub("learned")) / "rho.dvol").string());
        write_volume(unpad_cube(est.averaged.sigma, labels.labels.nx(), labels.labels.ny(),
                                labels.labels.nz()),
                     mm, (fs::path(sub("learned")) / "norm_sigma.dvol").string());
        write_volume(unpad_cube(est.averaged.epsilon, labels.labels.nx(), labels.labels.ny(),
                                labels.labels.nz()),
                     mm, (fs::path(sub("learned")) / "norm_epsilon.dvol").string());
        write_volume(unpad_cube(est.averaged.rho, labels.labels.nx(), labels.labels.ny(),
                                labels.labels.nz()),
                     mm, (fs::path(sub("learned")) / "norm_rho.dvol").string());

        out.tissue_errors = tissue_property_errors(maps_std, maps_learned, labels);
        write_tissue_errors_csv((fs::path(sub("learned")) / "tissue_errors.csv").string(),
                                out.tissue_errors);
        write_tissue_stats_csv((fs::path(sub("learned")) / "tissue_stats.csv").string(),
                               maps_learned, labels);
    });
    if (p.stage == PipelineStage::estimate) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    ExposureResult res_std, res_learned;
    stage_guard("fdtd", [&] {
        res_std = run_exposure(p, maps_std, (fs::path(sub("standard")) / "fdtd").string());
        res_learned = run_exposure(p, maps_learned, (fs::path(sub("learned")) / "fdtd").string());
        out.fdtd_standard = summarize(res_std);
        out.fdtd_learned = summarize(res_learned);
    });
    if (p.stage == PipelineStage::fdtd) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    SarVolume sar_std, sar_learned;
    stage_guard("sar", [&] {
        sar_std = point_sar(res_std.phasors, res_std.maps);
        sar_learned = point_sar(res_learned.phasors, res_learned.maps);
        AveragedSar avg_std = sar_10g_cubic(sar_std, res_std.maps.rho);
        AveragedSar avg_learned = sar_10g_cubic(sar_learned, res_learned.maps.rho);
        out.pssar_std = avg_std.pssar;
        out.pssar_learned = avg_learned.pssar;
        out.pssar_x = avg_std.pssar_x;
        out.pssar_y = avg_std.pssar_y;
        out.pssar_z = avg_std.pssar_z;
        out.has_dosimetry = true;

        const double mm_s = res_std.maps.voxel_size_mm;
        write_volume(sar_std.sar, mm_s, (fs::path(sub("standard")) / "fdtd/sar.dvol").string());
        write_volume(avg_std.sar, mm_s, (fs::path(sub("standard")) / "fdtd/sar10g.dvol").string());
        const double mm_l = res_learned.maps.voxel_size_mm;
        write_volume(sar_learned.sar, mm_l, (fs::path(sub("learned")) / "fdtd/sar.dvol").string());
        write_volume(avg_learned.sar, mm_l,
                     (fs::path(sub("learned")) / "fdtd/sar10g.dvol").string());
    });
    if (p.stage == PipelineStage::sar) {
        write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
        return out;
    }

    stage_guard("metrics", [&] {
        out.e_abs = abs_error(sar_std, sar_learned);
        out.e_max = rel_error_pssar(out.pssar_std, out.pssar_learned);
        auto csv = open_csv((fs::path(p.out_dir) / "metrics.csv").string(), "metrics-v1");
        csv << "subject,frequency_hz,e_abs,pssar_std,pssar_learned,e_max,pssar_x,pssar_y,pssar_z\n";
        csv << out.subject << ',' << out.frequency_hz << ',' << out.e_abs << ',' << out.pssar_std
            << ',' << out.pssar_learned << ',' << out.e_max << ',' << out.pssar_x << ','
            << out.pssar_y << ',' << out.pssar_z << "\n";
    });
    write_report((fs::path(p.out_dir) / "report.txt").string(), out, cfg);
    return out;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace

PipelineOutputs run_pipeline(const RunConfig& cfg, const RunOverrides& overrides) {
    Params p = parse_params(cfg, overrides);
    return run_params(cfg, p);
}

std::vector<SweepPoint> run_sweep(const RunConfig& cfg, SweepAxis axis,
                                  const RunOverrides& overrides) {
    Params base = parse_params(cfg, overrides);
    // Sweeps default to the property stages; dosimetry per point is opt-in.
    if (!cfg.has("pipeline.stage") && !(overrides.stage))
        base.stage = PipelineStage::estimate;
    // Checkpoints cannot carry across points: both axes change what the
    // networks are trained on.
    base.checkpoint_dir.clear();

    std::vector<double> values;
    if (axis == SweepAxis::tau) {
        values = cfg.get_double_list("sweep.tau", {0.0, 0.1, 0.2, 0.5});
        for (double v : values)
            if (!(v >= 0.0) || v >= 1.0)
                throw UsageError("sweep.tau values must lie in [0, 1)");
    } else {
        for (std::int64_t v : cfg.get_int_list("sweep.subjects", {2, 4})) {
            if (v < 1) throw UsageError("sweep.subjects values must be >= 1");
            values.push_back(static_cast<double>(v));
        }
    }
    if (values.empty()) throw UsageError("sweep has no axis values");

    const char* axis_name = axis == SweepAxis::tau ? "tau" : "subjects";
    std::vector<SweepPoint> points;
    for (double v : values) {
        Params pp = base;
        if (axis == SweepAxis::tau)
            pp.tau = v;
        else
            pp.train_subjects = static_cast<int>(v);
        pp.out_dir =
            (fs::path(base.out_dir) / (std::string(axis_name) + "_" + format_value(v))).string();
        SweepPoint pt;
        pt.value = v;
        pt.outputs = run_params(cfg, pp);
        points.push_back(std::move(pt));
    }

    ensure_dir(base.out_dir);
    auto csv = open_csv((fs::path(base.out_dir) / ("sweep_" + std::string(axis_name) + ".csv"))
                            .string(),
                        "sweep-v1");
    csv << "axis,value,tissue_id,count,mae_sigma,mae_epsilon,mae_rho,max_prerescale,"
           "mean_max_estimate\n";
    for (const SweepPoint& pt : points)
        for (const TissueErrorRow& r : pt.outputs.tissue_errors)
            csv << axis_name << ',' << pt.value << ',' << r.tissue_id << ',' << r.count << ','
                << r.mae_sigma << ',' << r.mae_epsilon << ',' << r.mae_rho << ','
                << pt.outputs.max_prerescale << ',' << pt.outputs.mean_max_estimate << "\n";
    return points;
}

} // namespace rfdose
