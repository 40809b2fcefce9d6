// orcamem: simulate | sweep | fit | protocols
//
// Exit codes: 0 success, 2 config/parse errors, 3 validation errors,
// 4 numerical divergence (reported with the tau it happened at), 5 fit
// failures. Manifests depend only on config + seed; wall-clock metadata goes
// to a .sidecar.json next to each manifest so reruns stay byte-identical.

#include "orca/analysis.hpp"
#include "orca/errors.hpp"
#include "orca/oracle.hpp"
#include "orca/runconfig.hpp"
#include "orca/serialize.hpp"
#include "orca/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace orca;

namespace {

std::string fp_hex(std::uint64_t fp) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fp));
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write '" + path.string() + "'");
    out << content;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_sidecar(const fs::path& stem, double elapsed_s) {
    ordered_json j;
    j["written_utc"] = now_utc();
    j["elapsed_s"] = elapsed_s;
    write_file(stem.string() + ".sidecar.json", j.dump(2) + "\n");
}

// manifest = record JSON + run bookkeeping; no timestamps in here
std::string run_manifest(const SimulationRecord& rec, const RunConfig& rc) {
    ordered_json j = ordered_json::parse(record_manifest_json(rec));
    j["seed"] = rc.seed;
    j["label"] = rc.label;
    j["protocol"] = rc.protocol;
    return j.dump(2) + "\n";
}

double overall_efficiency(const SimulationRecord& rec) {
    double in = 0, out = 0;
    for (const auto& w : rec.windows) {
        if (w.energy_in > 0) {
            in += w.energy_in;
            out += w.energy_out;
        }
    }
    return in > 0 ? out / in : 0.0;
}

void print_summary(const SimulationRecord& rec, const RunConfig& rc) {
    std::printf("run %s  fingerprint %s\n", rc.label.c_str(),
                fp_hex(rec.fingerprint).c_str());
    std::printf("  events %zu, samples %zu, energy in %.6e out %.6e\n",
                rec.events_applied.size(), rec.tau_ns.size(),
                rec.total_energy_in, rec.total_energy_out);
    std::printf("  %3s  %10s  %8s  %3s  %12s  %12s  %10s\n", "win",
                "center_ns", "width_ns", "bin", "energy_in", "energy_out",
                "efficiency");
    for (std::size_t i = 0; i < rec.windows.size(); ++i) {
        const auto& w = rec.windows[i];
        std::printf("  %3zu  %10.3f  %8.3f  %3d  %12.5e  %12.5e  %10.6f\n", i,
                    w.center_ns, w.width_ns, w.source_bin, w.energy_in,
                    w.energy_out, std::isnan(w.efficiency) ? 0.0 : w.efficiency);
    }
    std::printf("  total retrieval efficiency %.6f\n", overall_efficiency(rec));
}

// ---------------------------------------------------------------------------
// CSV ingestion for the fit subcommands. Accepts '#' comments, an optional
// header line, and 2 or 3 comma-separated numeric columns.

std::vector<std::vector<double>> load_csv(const std::string& path,
                                          std::size_t min_cols,
                                          std::size_t max_cols) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    bool header_skipped = false;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        auto a = s.find_first_not_of(ws);
        auto b = s.find_last_not_of(ws);
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::vector<double> row;
        bool numeric = true;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            field = trim(field);
            char* end = nullptr;
            double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str() || *end != '\0') {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            // one leading header line is fine; anything else is malformed
            if (!header_skipped && rows.empty()) {
                header_skipped = true;
                continue;
            }
            throw config_error(path + ":" + std::to_string(lineno) +
                               ": non-numeric field '" + field + "'");
        }
        if (row.size() < min_cols || row.size() > max_cols)
            throw config_error(path + ":" + std::to_string(lineno) + ": got " +
                               std::to_string(row.size()) +
                               " columns, expected " +
                               std::to_string(min_cols) + "-" +
                               std::to_string(max_cols));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw config_error(path + ": no data rows");
    return rows;
}

EfficiencyTrace trace_from_rows(const std::vector<std::vector<double>>& rows) {
    EfficiencyTrace tr;
    for (const auto& r : rows)
        tr.points.push_back({r[0], r[1], r.size() > 2 ? r[2] : 0.0});
    return tr;
}

std::string stem_for(const std::string& data_path, const char* suffix) {
    fs::path p(data_path);
    p.replace_extension();
    return p.string() + suffix;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    if (!out_dir.empty()) rc.output_dir = out_dir;
    PulseSequence seq = rc.sequence();
    seq.require_valid();

    const auto t0 = std::chrono::steady_clock::now();
    SimulationRecord rec = run_simulation(rc.solver, seq);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    fs::create_directories(rc.output_dir);
    fs::path stem =
        fs::path(rc.output_dir) / (rc.label + "-" + fp_hex(rec.fingerprint));
    write_file(stem.string() + ".manifest.json", run_manifest(rec, rc));
    write_file(stem.string() + ".fields.csv", field_trace_csv(rec));
    write_sidecar(stem, elapsed);

    print_summary(rec, rc);
    std::printf("wrote %s.manifest.json\n", stem.string().c_str());
    return 0;
}

int error_code_of(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const config_error&) {
        return 2;
    } catch (const divergence_error&) {
        return 4;
    } catch (const std::exception&) {
        return 3;
    }
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    if (!out_dir.empty()) rc.output_dir = out_dir;
    if (rc.axes.empty())
        throw config_error("sweep needs at least one sweep.axis.*");

    // Cartesian product, first axis outermost; first-axis value doubles as
    // the x column of the aggregate trace
    struct Point {
        std::vector<std::pair<std::string, std::string>> overrides;
        double x = 0;
    };
    std::vector<Point> points;
    std::vector<std::size_t> idx(rc.axes.size(), 0);
    for (;;) {
        Point p;
        for (std::size_t a = 0; a < rc.axes.size(); ++a) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", rc.axes[a].values[idx[a]]);
            p.overrides.emplace_back(rc.axes[a].path, buf);
        }
        p.x = rc.axes[0].values[idx[0]];
        points.push_back(std::move(p));
        std::size_t a = rc.axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < rc.axes[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) goto done;
        }
    }
done:

    fs::create_directories(fs::path(rc.output_dir) / "points");

    // compile every point up front so a typo in an axis path aborts before
    // any solver time is spent
    std::vector<RunConfig> cfgs;
    std::vector<fs::path> stems;
    std::vector<bool> skip(points.size(), false);
    for (const auto& p : points) {
        RunConfig rcp = rc;
        for (const auto& [path, value] : p.overrides)
            rcp = with_override(rcp, path, value);
        fs::path stem = fs::path(rc.output_dir) / "points" /
                        (rc.label + "-" + fp_hex(rcp.fingerprint()));
        cfgs.push_back(std::move(rcp));
        stems.push_back(std::move(stem));
    }
    std::size_t n_skipped = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (fs::exists(stems[i].string() + ".manifest.json")) {
            skip[i] = true;
            ++n_skipped;
        }

    // bounded pool over the remaining points; results land in per-point
    // slots, all artifact writing and aggregation stays single-threaded
    std::vector<std::optional<SimulationRecord>> recs(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::vector<double> elapsed(points.size(), 0.0);
    std::atomic<std::size_t> cursor{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            if (skip[i]) continue;
            try {
                SolverConfig cfg = cfgs[i].solver;
                cfg.workers = 1; // the pool is the parallelism
                const auto t0 = std::chrono::steady_clock::now();
                recs[i] = run_simulation(cfg, cfgs[i].sequence());
                elapsed[i] = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t pool = std::min<std::size_t>(
        static_cast<std::size_t>(std::max(rc.solver.workers, 1)),
        points.size());
    if (pool <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }

    std::vector<double> xs, etas, sigmas;
    std::vector<std::string> failures;
    int first_error = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::string tag;
        for (const auto& [path, value] : points[i].overrides)
            tag += (tag.empty() ? "" : " ") + path + "=" + value;
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                failures.push_back(tag + ": " + e.what());
            }
            if (!first_error) first_error = error_code_of(errors[i]);
            continue;
        }
        double eta;
        if (skip[i]) {
            std::ifstream in(stems[i].string() + ".manifest.json");
            ordered_json j = ordered_json::parse(in);
            double ein = 0, eout = 0;
            for (const auto& w : j["windows"]) {
                const double wi = w["energy_in"].get<double>();
                if (wi > 0) {
                    ein += wi;
                    eout += w["energy_out"].get<double>();
                }
            }
            eta = ein > 0 ? eout / ein : 0.0;
        } else {
            write_file(stems[i].string() + ".manifest.json",
                       run_manifest(*recs[i], cfgs[i]));
            write_sidecar(stems[i], elapsed[i]);
            eta = overall_efficiency(*recs[i]);
        }
        xs.push_back(points[i].x);
        etas.push_back(eta);
        sigmas.push_back(0.0);
    }

    fs::path base = fs::path(rc.output_dir) / (rc.label + "-sweep");
    write_file(base.string() + ".csv", efficiency_trace_csv(xs, etas, sigmas));
    std::string gnuplot = "# t_storage_ns efficiency\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof line, "%.6f %.9e\n", xs[i], etas[i]);
        gnuplot += line;
    }
    write_file(base.string() + ".dat", gnuplot);
    if (!failures.empty()) {
        std::string report;
        for (const auto& f : failures) report += f + "\n";
        write_file(base.string() + "-failures.txt", report);
    }

    std::printf("sweep %s: %zu points, %zu ok (%zu reused), %zu failed\n",
                rc.label.c_str(), points.size(), xs.size(), n_skipped,
                failures.size());
    std::printf("wrote %s.csv\n", base.string().c_str());
    if (!failures.empty())
        std::printf("failures in %s-failures.txt\n", base.string().c_str());
    if (xs.empty()) return first_error ? first_error : 3;
    return 0;
}

// ---------------------------------------------------------------------------

void print_fit(const FitResult& fit) {
    for (std::size_t i = 0; i < fit.names.size(); ++i)
        std::printf("  %-12s %14.8g +- %.3g\n", fit.names[i].c_str(),
                    fit.params[i], fit.sigmas[i]);
    std::printf("  residual 2-norm %.6g  (seed %llu, %d replicas)\n",
                fit.residual_norm, static_cast<unsigned long long>(fit.seed),
                fit.n_boot);
}

ordered_json fit_json(const FitResult& fit) {
    ordered_json j;
    j["names"] = fit.names;
    j["params"] = fit.params;
    j["sigmas"] = fit.sigmas;
    j["residual_norm"] = fit.residual_norm;
    j["n_boot"] = fit.n_boot;
    j["seed"] = fit.seed;
    return j;
}

int cmd_fit_rabi(const std::string& data, std::uint64_t seed, int boot,
                 std::string out) {
    auto rows = load_csv(data, 2, 3);
    std::vector<RabiPoint> pts;
    for (const auto& r : rows)
        pts.push_back({r[0], r[1], r.size() > 2 ? r[2] : 0.0});
    FitResult fit = fit_rabi(pts, seed, boot);

    std::printf("rabi fit over %zu points\n", pts.size());
    print_fit(fit);
    std::printf("  pi pulse: energy %.6g nJ +- %.3g, fidelity %.4f +- %.4f\n",
                fit.pi_energy_nj, fit.pi_energy_sigma, fit.pi_fidelity,
                fit.pi_fidelity_sigma);

    ordered_json j = fit_json(fit);
    j["kind"] = "rabi";
    j["pi_energy_nj"] = fit.pi_energy_nj;
    j["pi_energy_sigma"] = fit.pi_energy_sigma;
    j["pi_fidelity"] = fit.pi_fidelity;
    j["pi_fidelity_sigma"] = fit.pi_fidelity_sigma;
    if (out.empty()) out = stem_for(data, "-rabifit.json");
    write_file(out, j.dump(2) + "\n");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_fit_lifetime(const std::string& data, const std::string& model,
                     std::uint64_t seed, int boot, std::string out) {
    LifetimeModel m;
    if (model == "gaussian")
        m = LifetimeModel::gaussian;
    else if (model == "exponential")
        m = LifetimeModel::exponential;
    else
        throw config_error("unknown lifetime model '" + model + "'");
    EfficiencyTrace tr = trace_from_rows(load_csv(data, 2, 3));
    FitResult fit = fit_lifetime(tr, m, seed, boot);

    std::printf("%s lifetime fit over %zu points\n", model.c_str(),
                tr.points.size());
    print_fit(fit);

    ordered_json j = fit_json(fit);
    j["kind"] = "lifetime";
    j["model"] = model;
    if (out.empty()) out = stem_for(data, "-lifetimefit.json");
    write_file(out, j.dump(2) + "\n");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_fit_grid(const std::string& data, const std::string& config_path,
                 std::vector<double> a_axis, std::vector<double> b_axis,
                 std::uint64_t seed, int resample, std::string out) {
    if (a_axis.size() < 3 || b_axis.size() < 3)
        throw config_error("--a and --b need at least 3 grid values each");
    RunConfig rc = load_run_config(config_path);
    EfficiencyTrace tr = trace_from_rows(load_csv(data, 2, 3));

    GridSearchSetup setup;
    setup.species = rc.species;
    setup.cfg = rc.solver;
    setup.target = Level::d;
    setup.sequence_for = [rc](double storage_ns) {
        RunConfig r2 = rc;
        r2.storage_ns = storage_ns;
        return r2.sequence();
    };
    setup.efficiency_of = [](const SimulationRecord& rec) {
        return overall_efficiency(rec);
    };

    ResidualGrid grid = hyperfine_grid_search(tr, a_axis, b_axis, setup, seed,
                                              resample);

    std::printf("grid search %zux%zu nodes, %zu storage times\n",
                a_axis.size(), b_axis.size(), tr.points.size());
    std::printf("  minimum A = %.4f MHz, B = %.4f MHz (residual %.6g)\n",
                grid.A_min, grid.B_min, grid.value_min);
    if (grid.n_resample > 0)
        std::printf("  spread    A +- %.4f, B +- %.4f (%d replicas)\n",
                    grid.A_sigma, grid.B_sigma, grid.n_resample);
    for (const auto& n : grid.notes) std::printf("  note: %s\n", n.c_str());

    ordered_json j;
    j["kind"] = "hfs-grid";
    j["A_MHz"] = grid.A_MHz;
    j["B_MHz"] = grid.B_MHz;
    auto& rows = j["residual"] = ordered_json::array();
    for (Eigen::Index i = 0; i < grid.residual.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index k = 0; k < grid.residual.cols(); ++k) {
            const double v = grid.residual(i, k);
            if (std::isnan(v))
                row.push_back(nullptr);
            else
                row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    j["A_min"] = grid.A_min;
    j["B_min"] = grid.B_min;
    j["value_min"] = grid.value_min;
    j["A_sigma"] = grid.A_sigma;
    j["B_sigma"] = grid.B_sigma;
    j["n_resample"] = grid.n_resample;
    j["seed"] = grid.seed;
    j["polarizations"] = grid.polarizations;
    j["notes"] = grid.notes;
    if (out.empty()) out = stem_for(data, "-grid.json");
    write_file(out, j.dump(2) + "\n");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_protocols() {
    std::printf("protocols:\n");
    std::printf("  standard      write, storage, read; one input bin\n");
    std::printf("  rephased      transfer pair brackets the storage interval\n");
    std::printf("  multimode     bin train sharing transfer rungs, first-in first-out\n");
    std::printf("  reorder       two bins, selective shelving swaps readout order\n");
    std::printf("  interference  two bins mixed by a partial transfer\n");
    std::printf("presets:\n");
    for (const auto& name : preset_names())
        std::printf("  %s\n", name.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamically rephased off-resonant cascaded absorption "
                 "memory toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_path, out_path;
    std::string model = "exponential";
    std::uint64_t seed = 0;
    int boot = 1000, resample = 0;
    std::vector<double> a_axis, b_axis;

    auto* sim = app.add_subcommand("simulate", "run one configuration");
    sim->add_option("config", config_path, "run config file")->required();
    sim->add_option("--output", out_dir, "override run.output_dir");

    auto* swp = app.add_subcommand("sweep",
                                   "run the config's sweep axes; resumable");
    swp->add_option("config", config_path, "run config file")->required();
    swp->add_option("--output", out_dir, "override run.output_dir");

    auto* fit = app.add_subcommand("fit", "fit traces");
    fit->require_subcommand(1);
    auto add_common = [&](CLI::App* f) {
        f->add_option("data", data_path, "input CSV")->required();
        f->add_option("--seed", seed, "bootstrap RNG seed");
        f->add_option("--out", out_path, "output JSON path");
    };
    auto* frabi = fit->add_subcommand(
        "rabi", "efficiency vs control energy (energy_nj, efficiency[, sigma])");
    add_common(frabi);
    frabi->add_option("--boot", boot, "bootstrap replicas");
    auto* flife = fit->add_subcommand(
        "lifetime", "efficiency vs storage time (t_storage_ns, efficiency[, sigma])");
    add_common(flife);
    flife->add_option("--boot", boot, "bootstrap replicas");
    flife->add_option("--model", model, "gaussian | exponential");
    auto* fgrid = fit->add_subcommand(
        "hfs-grid", "hyperfine-constant residual surface over (A, B)");
    add_common(fgrid);
    fgrid->add_option("--config", config_path, "simulation base config")
        ->required();
    fgrid->add_option("--a", a_axis, "A axis values, MHz")
        ->required()
        ->delimiter(',');
    fgrid->add_option("--b", b_axis, "B axis values, MHz")
        ->required()
        ->delimiter(',');
    fgrid->add_option("--resample", resample, "data resampling replicas");

    auto* protos = app.add_subcommand("protocols", "describe protocols");
    protos->require_subcommand(1);
    protos->add_subcommand("list", "list protocols and shipped presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir);
        if (swp->parsed()) return cmd_sweep(config_path, out_dir);
        if (fit->parsed()) {
            if (frabi->parsed())
                return cmd_fit_rabi(data_path, seed, boot, out_path);
            if (flife->parsed())
                return cmd_fit_lifetime(data_path, model, seed, boot, out_path);
            return cmd_fit_grid(data_path, config_path, a_axis, b_axis, seed,
                                resample, out_path);
        }
        return cmd_protocols();
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const divergence_error& e) {
        std::cerr << "divergence at tau = " << e.tau_ns << " ns: " << e.what()
                  << "\n";
        return 4;
    } catch (const fit_error& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 5;
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const lookup_error& e) {
        std::cerr << "lookup error: " << e.what() << "\n";
        return 3;
    }
}
