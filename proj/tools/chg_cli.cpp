// chg: kernel checks, ratio studies, field files and Calderón tables from the command line.
//
// Exit codes: 0 everything passed, 2 a check or study row failed, 1 usage or input errors.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "chg/error.hpp"
#include "chg/harness.hpp"
#include "chg/kernels.hpp"
#include "chg/spaces.hpp"

using namespace chg;
using nlohmann::json;

namespace {

struct RunFlags {
    std::string out = ".";
    std::string format;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol_scale;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--format", f.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "seed recorded in the report and fed to Monte Carlo backends");
    cmd->add_option("--tol-scale", f.tol_scale, "multiplier on the drift tolerance")->check(CLI::NonNegativeNumber);
}

void apply(StudyConfig& c, const RunFlags& f, bool out_given) {
    if (out_given) c.output_dir = f.out;
    if (!f.format.empty()) c.output_format = f.format;
    if (f.threads) c.threads = *f.threads;
    if (f.seed) c.seed = *f.seed;
    if (f.tol_scale) c.tol_scale = *f.tol_scale;
    c.validate();
}

int finish(const RatioReport& rep, const StudyConfig& c) {
    const std::string path = emit_report(rep, c.output_format, c.output_dir);
    std::printf("%s: %zu rows, spread %.4g, drift %.4g -> %s\n", to_string(rep.study).c_str(), rep.rows.size(), rep.spread,
                rep.dilation_drift, path.c_str());
    for (const auto& ch : rep.checks)
        if (!ch.passed) std::printf("FAILED check %s: %.6g (limit %.6g)\n", ch.name.c_str(), ch.value, ch.limit);
    for (const ReportRow* r : rep.failing_rows())
        std::printf("FAILED %s: %s\n", r->case_id.c_str(), r->message.empty() ? "failed" : r->message.c_str());
    std::printf("%s\n", rep.passed ? "PASS" : "FAIL");
    return rep.passed ? 0 : 2;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::usage, path + ": " + e.what());
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional operators and function spaces on stratified groups"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kLibraryVersion);

    // study
    RunFlags sf;
    std::string config_path;
    auto* study = app.add_subcommand("study", "run a ratio study from a JSON config");
    study->add_option("--config", config_path, "study config (schema chg-report/1)")->required()->check(CLI::ExistingFile);
    add_run_flags(study, sf);

    // kernel
    RunFlags kf;
    std::string kkind = "heat", kgroup = "H1", kbackend;
    double kalpha = 0.5;
    std::vector<std::string> kchecks = {"mass", "homogeneity", "symmetry"};
    std::vector<double> ktimes, knorms;
    std::string ktable;
    auto* kernel = app.add_subcommand("kernel", "kernel property checks and tabulation");
    kernel->add_option("--kind", kkind, "heat, frac_heat, poisson, riesz or tilde_riesz");
    kernel->add_option("--group", kgroup, "R1, R2, R3 or H1");
    kernel->add_option("--alpha", kalpha, "order of the fractional kernels");
    kernel->add_option("--backend", kbackend, "evaluation backend (group default when omitted)");
    kernel->add_option("--checks", kchecks, "checks to run")->delimiter(',');
    kernel->add_option("--table", ktable, "also write a (t, |x|, value) CSV here");
    kernel->add_option("--times", ktimes, "table times")->delimiter(',');
    kernel->add_option("--norms", knorms, "table radii along the first axis")->delimiter(',');
    add_run_flags(kernel, kf);

    // field
    auto* field = app.add_subcommand("field", "inspect, convert or sample CGF1 field files");
    field->require_subcommand(1);
    std::string in_path, out_path, fn_json, fgroup = "R1";
    std::pair<int, int> axes{0, 1};
    auto* inspect = field->add_subcommand("inspect", "print grid and norms of a CGF1 file");
    inspect->add_option("file", in_path)->required()->check(CLI::ExistingFile);
    auto* convert = field->add_subcommand("convert", "CGF1 to CSV (by extension of the output)");
    convert->add_option("input", in_path)->required()->check(CLI::ExistingFile);
    convert->add_option("output", out_path)->required();
    convert->add_option("--axes", axes, "slice axes for fields of dimension 2 and up");
    auto* sample = field->add_subcommand("sample", "sample a built-in function on the standard grid");
    sample->add_option("--function", fn_json, R"(JSON, e.g. {"id":"gaussian","lambda":2})")->required();
    sample->add_option("--group", fgroup, "R1, R2, R3 or H1");
    sample->add_option("output", out_path, "CGF1 or .csv path")->required();

    // scalars
    double salpha = 0.5, sa = 0.5, sb = 2, sc = 1;
    std::string spath;
    auto* scalars = app.add_subcommand("scalars", "Calderón scalar tables H, H~, G and the reproduction check");
    scalars->add_option("--alpha", salpha)->check(CLI::Range(0.0, 1.0));
    scalars->add_option("--a", sa, "eta = 1 on [a, b]");
    scalars->add_option("--b", sb);
    scalars->add_option("--c-alpha", sc, "normalising constant");
    scalars->add_option("--out", spath, "CSV path for the tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*study) {
            StudyConfig c = StudyConfig::from_json(read_json(config_path));
            apply(c, sf, study->count("--out") > 0);
            return finish(run_study(c), c);
        }
        if (*kernel) {
            StudyConfig c;
            c.study = StudyId::kernel_verify;
            c.group = kgroup;
            c.grid = GridSpec::standard(kgroup);
            c.kernel = {kkind, kbackend, kalpha, kchecks};
            apply(c, kf, kernel->count("--out") > 0);
            const RatioReport rep = run_study(c);
            if (!ktable.empty()) {
                KernelHandle k = KernelHandle::make(kernel_kind_from_string(kkind), kgroup, kalpha);
                if (!kbackend.empty()) k.backend = backend_from_string(kbackend);
                k.quad.mc_seed = c.seed;
                if (ktimes.empty()) ktimes = {0.25, 1, 4};
                if (knorms.empty())
                    for (int i = 0; i <= 12; ++i) knorms.push_back(0.25 * i);
                const auto parent = std::filesystem::path(ktable).parent_path();
                if (!parent.empty()) std::filesystem::create_directories(parent);
                write_kernel_csv(tabulate_kernel(k, ktimes, knorms), ktable);
                std::printf("table -> %s\n", ktable.c_str());
            }
            return finish(rep, c);
        }
        if (*inspect) {
            const ScalarField f = load_field(in_path);
            json j = {{"grid", f.grid.to_json()},   {"provenance", f.provenance},  {"integral", f.integral()},
                      {"L1", lp_norm(f, 1)},        {"L2", lp_norm(f, 2)},         {"Linf", f.max_abs()},
                      {"boundary_ratio", f.boundary_ratio}, {"exterior", f.exterior}, {"leakage", f.leakage}};
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*convert) {
            const ScalarField f = load_field(in_path);
            if (ends_with(out_path, ".csv"))
                write_field_csv(f, out_path, axes.first, axes.second);
            else
                save_field(f, out_path);
            std::printf("%s -> %s\n", in_path.c_str(), out_path.c_str());
            return 0;
        }
        if (*sample) {
            json fj;
            try {
                fj = json::parse(fn_json);
            } catch (const json::parse_error& e) {
                fail(ErrorKind::usage, std::string("--function: ") + e.what());
            }
            FieldFunction fn = FieldFunction::from_json(fj);
            const GridSpec g = GridSpec::standard(fgroup);
            if (fn.center.empty()) fn.center.assign(g.dim(), 0.0);
            const ScalarField f = sample_field(fn, g);
            if (ends_with(out_path, ".csv"))
                write_field_csv(f, out_path, axes.first, axes.second);
            else
                save_field(f, out_path);
            std::printf("%s -> %s\n", fn.label().c_str(), out_path.c_str());
            return 0;
        }
        if (*scalars) {
            const CalderonScalars cs = calderon_scalars(salpha, sa, sb, sc);
            const double rc = reproducing_check(cs);
            if (!spath.empty()) {
                std::ofstream out(spath);
                require(static_cast<bool>(out), ErrorKind::io, "cannot open " + spath);
                out.precision(17);
                out << "s,H,Htilde,G\n";
                for (std::size_t i = 0; i < cs.s.size(); ++i)
                    out << cs.s[i] << ',' << cs.H[i] << ',' << cs.Ht[i] << ',' << cs.G[i] << '\n';
                require(static_cast<bool>(out), ErrorKind::io, "write failed for " + spath);
            }
            std::printf("alpha %.6g  c_alpha %.6g  eta integral %.10g  reproducing check %.12f\n", cs.alpha, cs.c_alpha,
                        cs.eta_integral, rc);
            const bool ok = std::abs(rc - 1) <= 1e-6;
            std::printf("%s\n", ok ? "PASS" : "FAIL");
            return ok ? 0 : 2;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
