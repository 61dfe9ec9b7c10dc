#include "mlwave/cli.hpp"

#include "mlwave/error.hpp"
#include "mlwave/evalkit.hpp"
#include "mlwave/fitting.hpp"
#include "mlwave/mesh_io.hpp"
#include "mlwave/training.hpp"
#include "mlwave/wavelet.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mlwave {
namespace fs = std::filesystem;

namespace {

int verbosity = 0;

void log(const std::string& msg) {
    if (verbosity > 0) std::cerr << "mlwave: " << msg << '\n';
}

// Effective configuration of a subcommand, one `key = value` per line.
std::vector<std::string> effective_config(const CLI::App& app) {
    std::vector<std::string> lines{"mlwave " + app.get_name()};
    std::istringstream ss(app.config_to_str(true, false));
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line[0] != '[') lines.push_back(line);
    }
    return lines;
}

std::ofstream open_report(const fs::path& path, const std::vector<std::string>& header) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": cannot open for writing");
    out.precision(12);
    for (const std::string& h : header) out << "# " << h << '\n';
    return out;
}

void close_report(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": write failed");
}

struct FitFlags {
    FitConfig config;
    std::string landmarks;
};

void add_fit_options(CLI::App* app, FitFlags& f) {
    FitConfig& c = f.config;
    app->add_option("--landmarks", f.landmarks, "landmark file (model_index x y z)")->check(CLI::ExistingFile);
    app->add_option("--rho-l", c.rho_L, "landmark weight")->capture_default_str();
    app->add_option("--rho-s", c.rho_S, "smoothing weight")->capture_default_str();
    app->add_option("--rho-t", c.rho_T, "temporal weight (tracking)")->capture_default_str();
    app->add_option("--tau", c.tau, "correspondence distance threshold (mm)")->capture_default_str();
    app->add_option("--lambda-init", c.lambda_init, "prior box during initialisation")->capture_default_str();
    app->add_option("--lambda-surface", c.lambda_surface, "prior box during surface fitting")->capture_default_str();
    app->add_option("--init-iterations", c.init_iterations, "initialisation rounds per level")->capture_default_str();
    app->add_option("--surface-passes", c.surface_passes, "surface passes per level")->capture_default_str();
    app->add_option("--settle-sweeps", c.settle_sweeps, "extra coarse-to-fine sweeps")->capture_default_str();
    app->add_option("--min-decrease", c.min_decrease, "relative energy decrease a block update must achieve")
        ->capture_default_str();
    app->add_option("--max-iters", c.optimizer.max_iters, "optimizer iterations per block")->capture_default_str();
    app->add_option("--grad-tol", c.optimizer.grad_tol, "optimizer projected-gradient tolerance")->capture_default_str();
}

TargetScan attach_landmarks(TargetScan scan, const std::string& path) {
    if (path.empty()) return scan;
    return scan.with_landmarks(read_landmarks(path));
}

void write_trace(std::ostream& out, const FitResult& r, int frame) {
    for (const PassTrace& p : r.energy_trace) {
        for (std::size_t s = 0; s < p.energies.size(); ++s) {
            out << frame << ',' << to_string(p.stage) << ',' << p.level << ',' << p.iteration << ',' << s << ','
                << p.energies[s] << '\n';
        }
    }
}

double final_energy(const FitResult& r) {
    return r.energy_trace.empty() ? 0.0 : r.energy_trace.back().energies.back();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Multilinear wavelet face model toolkit", "mlwave"};
    app.set_config("--config", "", "read options from a TOML/INI file (flags take precedence)");
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads for training")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("-v,--verbose", verbosity, "progress messages on stderr");

    // train
    std::string train_input, train_out, train_lmk;
    int m2 = 3, m3 = 3;
    auto* train_cmd = app.add_subcommand("train", "train a model from a manifest of registered OBJ grids");
    train_cmd->add_option("--input", train_input, "manifest: identity_id expression_id path")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--m2", m2, "identity components")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--m3", m3, "expression components")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--landmark-indices", train_lmk, "template landmark vertices, one per line (default: built-in set)")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "model file")->required();

    // fit
    std::string fit_model, fit_scan, fit_out, fit_report, fit_dist;
    FitFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model to an oriented point cloud");
    fit_cmd->add_option("--model", fit_model, "model file")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--scan", fit_scan, "binary PLY with normals")->required()->check(CLI::ExistingFile);
    add_fit_options(fit_cmd, fit_flags);
    fit_cmd->add_option("--out", fit_out, "fitted OBJ in scan coordinates")->required();
    fit_cmd->add_option("--report", fit_report, "CSV energy trace and summary");
    fit_cmd->add_option("--distances", fit_dist, "CSV per-vertex distance-to-data");

    // track
    std::string track_model, track_frames, track_dir, track_report;
    FitFlags track_flags;
    auto* track_cmd = app.add_subcommand("track", "track a sequence of scans");
    track_cmd->add_option("--model", track_model, "model file")->required()->check(CLI::ExistingFile);
    track_cmd->add_option("--frames", track_frames, "manifest with one PLY path per line")->required()->check(CLI::ExistingFile);
    add_fit_options(track_cmd, track_flags);
    track_cmd->add_option("--out-dir", track_dir, "directory for frame_NNN.obj")->required();
    track_cmd->add_option("--report", track_report, "CSV per-frame energy and mean distance (default: <out-dir>/track.csv)");

    // transform
    std::string tr_input, tr_out;
    auto* tr_cmd = app.add_subcommand("transform", "write the wavelet coefficients of an OBJ grid as CSV");
    tr_cmd->add_option("--input", tr_input, "OBJ grid")->required()->check(CLI::ExistingFile);
    tr_cmd->add_option("--out", tr_out, "CSV k,level,kind,sx,sy,sz")->required();

    // synth
    SyntheticPopulationSpec pop;
    std::string synth_dir;
    bool synth_scans = false;
    CorruptionSpec corr;
    double occ_fraction = 0.0;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic population");
    synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
    synth_cmd->add_option("--seed", pop.seed, "random seed")->capture_default_str();
    synth_cmd->add_option("--rows", pop.grid.rows, "grid rows")->capture_default_str();
    synth_cmd->add_option("--cols", pop.grid.cols, "grid columns")->capture_default_str();
    synth_cmd->add_option("--levels", pop.grid.levels, "wavelet levels")->capture_default_str();
    synth_cmd->add_option("--d2", pop.d2, "identities")->check(CLI::PositiveNumber)->capture_default_str();
    synth_cmd->add_option("--d3", pop.d3, "expressions")->check(CLI::PositiveNumber)->capture_default_str();
    synth_cmd->add_option("--identity-rank", pop.identity_rank, "rank of identity amplitudes (0: full)")->capture_default_str();
    synth_cmd->add_option("--expression-rank", pop.expression_rank, "rank of expression amplitudes (0: full)")
        ->capture_default_str();
    synth_cmd->add_flag("--scans", synth_scans, "also write a PLY scan and landmark file per sample");
    synth_cmd->add_option("--noise", corr.noise_sigma, "scan noise sigma (mm)")->capture_default_str();
    synth_cmd->add_option("--density", corr.density, "scan samples per quad edge")->capture_default_str();
    auto* occ_opt = synth_cmd->add_option("--occlusion-fraction", occ_fraction, "delete this fraction of points around the nose")
                        ->check(CLI::Range(0.0, 0.99));
    auto* keep_opt = synth_cmd->add_option("--keep-fraction", corr.keep_fraction, "random subsampling keep probability")
                         ->check(CLI::Range(0.01, 1.0));
    (void)keep_opt;
    (void)occ_opt;

    // eval
    std::string ev_fitted, ev_scan, ev_mask, ev_out, ev_curve;
    auto* ev_cmd = app.add_subcommand("eval", "distance-to-data of a fitted OBJ against a scan");
    ev_cmd->add_option("--fitted", ev_fitted, "fitted OBJ grid")->required()->check(CLI::ExistingFile);
    ev_cmd->add_option("--scan", ev_scan, "binary PLY")->required()->check(CLI::ExistingFile);
    ev_cmd->add_option("--mask", ev_mask, "vertices to exclude, one per line")->check(CLI::ExistingFile);
    ev_cmd->add_option("--out", ev_out, "per-vertex CSV report")->required();
    ev_cmd->add_option("--curve", ev_curve, "cumulative error curve CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train_cmd) {
            const auto entries = read_training_manifest(train_input);
            if (entries.empty()) throw Error(ErrorCode::InsufficientSamples, "empty training manifest");
            int d2 = 0, d3 = 0;
            for (const auto& e : entries) {
                if (e.identity < 0 || e.expression < 0) throw Error(ErrorCode::FormatError, "negative id in manifest");
                d2 = std::max(d2, e.identity + 1);
                d3 = std::max(d3, e.expression + 1);
            }
            TrainingSet ts(d2, d3);
            for (const auto& e : entries) {
                log("reading " + e.path.string());
                ts.set(e.identity, e.expression, read_obj(e.path));
            }
            TrainOptions opt;
            opt.m2 = m2;
            opt.m3 = m3;
            opt.threads = threads;
            const GridSpec grid = ts.at(0, 0).grid();
            opt.landmark_indices = train_lmk.empty() ? default_landmark_indices(grid) : read_mask(train_lmk);
            const WaveletShapeModel model = train(ts, opt);
            save_model(model, train_out);
            log("wrote " + train_out);
        } else if (*fit_cmd) {
            const WaveletShapeModel model = load_model(fit_model);
            const TargetScan scan = attach_landmarks(read_ply(fit_scan), fit_flags.landmarks);
            const FitResult r = fit(model, scan, fit_flags.config);
            for (const std::string& w : r.warnings) std::cerr << "mlwave: warning: " << w << '\n';
            write_obj(fit_out, r.aligned_shape());
            if (!fit_report.empty()) {
                auto header = effective_config(*fit_cmd);
                header.push_back("final_energy = " + std::to_string(final_energy(r)));
                header.push_back("mean_distance = " + std::to_string(mean_of(r.per_vertex_distance)));
                std::ofstream out = open_report(fit_report, header);
                out << "frame,stage,level,iteration,step,energy\n";
                write_trace(out, r, 0);
                close_report(out, fit_report);
            }
            if (!fit_dist.empty()) {
                write_report_csv(fit_dist, distance_to_data(r.aligned_shape(), scan), effective_config(*fit_cmd));
            }
        } else if (*track_cmd) {
            const WaveletShapeModel model = load_model(track_model);
            const auto paths = read_frames_manifest(track_frames);
            if (paths.empty()) throw Error(ErrorCode::InsufficientSamples, "empty frames manifest");
            std::vector<TargetScan> frames;
            for (std::size_t t = 0; t < paths.size(); ++t) {
                TargetScan s = read_ply(paths[t]);
                frames.push_back(t == 0 ? attach_landmarks(std::move(s), track_flags.landmarks) : std::move(s));
            }
            const auto results = track(model, frames, track_flags.config);
            fs::create_directories(track_dir);
            const fs::path report = track_report.empty() ? fs::path(track_dir) / "track.csv" : fs::path(track_report);
            std::ofstream out = open_report(report, effective_config(*track_cmd));
            out << "frame,energy,mean_distance\n";
            for (std::size_t t = 0; t < results.size(); ++t) {
                char name[32];
                std::snprintf(name, sizeof name, "frame_%03zu.obj", t);
                write_obj(fs::path(track_dir) / name, results[t].aligned_shape());
                out << t << ',' << final_energy(results[t]) << ',' << mean_of(results[t].per_vertex_distance) << '\n';
            }
            close_report(out, report);
        } else if (*tr_cmd) {
            const QuadGridShape shape = read_obj(tr_input);
            const WaveletCoefficients coeffs = forward(shape);
            const WaveletLayout layout(shape.grid());
            std::ofstream out = open_report(tr_out, effective_config(*tr_cmd));
            out.precision(17);
            out << "k,level,kind,sx,sy,sz\n";
            for (Index k = 0; k < coeffs.size(); ++k) {
                const CoefficientInfo& info = layout.info(k);
                const auto s = coeffs.values.row(k);
                out << k << ',' << info.level << ',' << to_string(info.kind) << ',' << s(0) << ',' << s(1) << ',' << s(2)
                    << '\n';
            }
            close_report(out, tr_out);
        } else if (*synth_cmd) {
            const SyntheticFaceGenerator gen(pop);
            const fs::path dir(synth_dir);
            fs::create_directories(dir);
            std::vector<ManifestEntry> entries;
            corr.landmark_indices = default_landmark_indices(pop.grid);
            for (int i = 0; i < pop.d2; ++i) {
                for (int e = 0; e < pop.d3; ++e) {
                    char stem[64];
                    std::snprintf(stem, sizeof stem, "face_%03d_%03d", i, e);
                    const QuadGridShape s = gen.sample(i, e);
                    write_obj(dir / (std::string(stem) + ".obj"), s);
                    entries.push_back({i, e, std::string(stem) + ".obj"});
                    if (synth_scans) {
                        CorruptionSpec c = corr;
                        c.seed = pop.seed * 1000003u + std::uint64_t(i) * 1009u + std::uint64_t(e);
                        if (occ_fraction > 0.0) {
                            c.occlusion_fraction = occ_fraction;
                            c.occlusion_center = s.vertex(pop.grid.index(pop.grid.rows / 2, pop.grid.cols / 2));
                        }
                        const TargetScan scan = corrupt_scan(s, c);
                        write_ply(dir / (std::string(stem) + ".ply"), scan.points(), scan.normals());
                        write_landmarks(dir / (std::string(stem) + ".lmk"), *scan.landmarks());
                    }
                }
            }
            write_training_manifest(dir / "manifest.txt", entries);
        } else if (*ev_cmd) {
            const QuadGridShape fitted = read_obj(ev_fitted);
            const TargetScan scan = read_ply(ev_scan);
            const std::vector<Index> mask = ev_mask.empty() ? std::vector<Index>{} : read_mask(ev_mask);
            const ErrorReport rep = distance_to_data(fitted, scan, mask);
            const auto header = effective_config(*ev_cmd);
            write_report_csv(ev_out, rep, header);
            if (!ev_curve.empty()) write_curve_csv(ev_curve, rep, header);
            log("median " + std::to_string(rep.median) + " mm, mean " + std::to_string(rep.mean) + " mm");
        }
    } catch (const Error& e) {
        std::cerr << "mlwave: error: " << e.what() << '\n';
        switch (category(e.code())) {
            case ErrorCategory::Usage: return 1;
            case ErrorCategory::Data: return 2;
            case ErrorCategory::Numerical: return 3;
        }
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "mlwave: error: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "mlwave: error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace mlwave
