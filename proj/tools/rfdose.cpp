// Command line front end. Subcommands are rungs of the pipeline ladder:
// each one runs everything up to and including its own stage.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "rfdose/errors.hpp"
#include "rfdose/pipeline.hpp"
#include "rfdose/run_config.hpp"

namespace {

void apply_thread_env() {
#ifdef _OPENMP
    if (const char* env = std::getenv("RFDOSE_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1) throw rfdose::UsageError("RFDOSE_THREADS must be a positive integer");
        omp_set_num_threads(n);
    }
#endif
}

void print_outputs(const rfdose::PipelineOutputs& o) {
    std::cout << "stage " << rfdose::stage_name(o.stage) << " complete; artifacts in "
              << o.out_dir << "\n";
    if (!o.tissue_errors.empty())
        std::cout << "  max pre-rescale estimate " << o.max_prerescale << "\n";
    if (o.has_dosimetry) {
        std::cout << "  psSAR standard " << o.pssar_std << " W/kg, learned " << o.pssar_learned
                  << " W/kg\n";
        if (o.stage == rfdose::PipelineStage::full)
            std::cout << "  E " << o.e_abs << " W/kg, E_max " << 100.0 * o.e_max << " %\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MRI-driven RF dosimetry pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::string axis = "tau";

    struct SubSpec {
        const char* name;
        const char* help;
        std::optional<rfdose::PipelineStage> stage;
    };
    const SubSpec specs[] = {
        {"phantom", "generate or load the subject volumes", rfdose::PipelineStage::inputs},
        {"assign", "standard label-based property assignment", rfdose::PipelineStage::standard},
        {"train", "train the three orientation networks", rfdose::PipelineStage::train},
        {"estimate", "MRI-driven property estimation", rfdose::PipelineStage::estimate},
        {"fdtd", "dipole exposure on both property pipelines", rfdose::PipelineStage::fdtd},
        {"sar", "point and 10 g averaged absorption", rfdose::PipelineStage::sar},
        {"metrics", "error metrics between the two pipelines", rfdose::PipelineStage::full},
        {"pipeline", "run up to the stage named in the config (default full)", std::nullopt},
    };

    std::optional<rfdose::PipelineStage> chosen;
    bool sweep_chosen = false;
    for (const SubSpec& s : specs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--out", out_dir, "output directory override");
        sub->callback([&chosen, &s] { chosen = s.stage; });
    }
    CLI::App* sw = app.add_subcommand("sweep", "repeat the run across one axis");
    sw->add_option("--config", config_path, "run configuration file")->required();
    sw->add_option("--seed", seed, "master seed override");
    sw->add_option("--out", out_dir, "output directory override");
    sw->add_option("--axis", axis, "sweep axis: tau or subjects");
    sw->callback([&sweep_chosen] { sweep_chosen = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(rfdose::ErrorClass::usage);
    }

    try {
        apply_thread_env();
        rfdose::RunConfig cfg = rfdose::RunConfig::parse_file(config_path);
        rfdose::RunOverrides ov;
        ov.seed = seed;
        ov.out_dir = out_dir;
        if (sweep_chosen) {
            rfdose::SweepAxis ax;
            if (axis == "tau")
                ax = rfdose::SweepAxis::tau;
            else if (axis == "subjects")
                ax = rfdose::SweepAxis::subjects;
            else
                throw rfdose::UsageError("unknown sweep axis '" + axis + "'");
            auto points = rfdose::run_sweep(cfg, ax, ov);
            std::cout << "sweep over " << axis << " finished with " << points.size()
                      << " points\n";
            for (const auto& pt : points) print_outputs(pt.outputs);
        } else {
            ov.stage = chosen;
            print_outputs(rfdose::run_pipeline(cfg, ov));
        }
    } catch (const rfdose::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.cls());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(rfdose::ErrorClass::numeric);
    }
    return 0;
}
