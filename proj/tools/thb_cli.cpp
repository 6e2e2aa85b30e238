// Command-line front end: project, converge, adapt, check-mesh, render-mesh.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "thb/adaptive.hpp"
#include "thb/bezier_projection.hpp"
#include "thb/harness.hpp"
#include "thb/projection_elements.hpp"
#include "thb/thb_basis.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kUsage = 2;

thb::LocalSpace parse_space(const std::string& s) {
    if (s == "poly") return thb::LocalSpace::PiecewisePoly;
    if (s == "thb") return thb::LocalSpace::ThbDirect;
    throw thb::InvalidInput("local space must be 'poly' or 'thb'");
}

thb::MultiIndex to_index(const std::vector<int>& v) {
    thb::MultiIndex m(static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m[static_cast<int>(i)] = v[i];
    return m;
}

double finest_width(const thb::DomainHierarchy& h) {
    double w = 0.0;
    const auto cells = thb::all_active_elements(h);
    int top = 0;
    for (const auto& c : cells) top = std::max(top, c.level);
    for (const auto& c : cells)
        if (c.level == top) w = std::max(w, thb::cell_box(h, c).max_width());
    return w;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else thb::write_text_file(path, text);
}

struct ProjectArgs {
    std::string mesh, target = "sinsin", space = "poly", coeffs_out, csv_out;
    int quadrature = 0;
    bool timing = false;
};

int run_project(const ProjectArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const thb::DomainHierarchy h = thb::load_hierarchy(a.mesh);
    const thb::TargetFunction f = thb::make_target(a.target, h.dim());
    const thb::ThbBasis basis = thb::build_thb_basis(h);
    thb::ProjectorOptions opts;
    opts.space = parse_space(a.space);
    opts.quadrature = a.quadrature;
    const thb::GlobalProjection g = thb::BezierProjector(basis, opts).project(f.value);
    const thb::ErrorNorms e = thb::error_norms(f, basis, g.coeffs, 1);
    const auto ee = thb::elem_error(f.value, basis, g.coeffs, a.quadrature);

    nlohmann::json out;
    out["target"] = f.name;
    out["space"] = thb::to_string(opts.space);
    out["dof"] = basis.size();
    out["coefficients"] = nlohmann::json::array();
    for (int j = 0; j < basis.size(); ++j) {
        const auto& fn = basis.function(j);
        nlohmann::json idx = nlohmann::json::array();
        for (int i = 0; i < fn.index.size(); ++i) idx.push_back(fn.index[i]);
        out["coefficients"].push_back({{"level", fn.level}, {"index", idx}, {"value", g.coeffs[j]}});
    }
    emit(a.coeffs_out, out.dump(1) + "\n");

    thb::ConvergenceRow row;
    row.degree = h.degrees()[0];
    row.h = finest_width(h);
    row.dof = basis.size();
    row.l2_error = e.l2;
    row.h1_seminorm = e.seminorms[0];
    row.max_elem_error = ee.empty() ? 0.0 : *std::max_element(ee.begin(), ee.end());
    if (a.timing) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!a.csv_out.empty()) emit(a.csv_out, thb::results_csv({row}));
    return kOk;
}

struct ConvergeArgs {
    std::vector<int> degrees{1, 2, 3, 4, 5};
    int rounds = 5;
    int dim = 2;
    std::string target = "sinsin", out;
    bool timing = false;
};

int run_converge(const ConvergeArgs& a) {
    const thb::TargetFunction f = thb::make_target(a.target, a.dim);
    const auto rows = thb::convergence_study(f, a.degrees, a.rounds, a.dim, a.timing);
    emit(a.out, thb::results_csv(rows));
    if (!a.out.empty() && a.out != "-") {
        for (int p : a.degrees) {
            std::vector<double> hs, l2, h1;
            for (const auto& r : rows)
                if (r.degree == p) {
                    hs.push_back(r.h);
                    l2.push_back(r.l2_error);
                    h1.push_back(r.h1_seminorm);
                }
            if (hs.size() < 2) continue;
            const auto fl = thb::fit_rate(hs, l2);
            const auto fh = thb::fit_rate(hs, h1);
            std::printf("p=%d  L2 slope %.3f (residual %.2e)  H1 slope %.3f (residual %.2e)\n", p, fl.slope, fl.residual,
                        fh.slope, fh.residual);
        }
    }
    return kOk;
}

struct AdaptArgs {
    std::string target = "tanh-ring", out_dir = "adapt_out", mesh;
    std::vector<int> degrees{2, 2};
    int coarse = 8;
    double theta = 0.5;
    double tolerance = 1e-3;
    int max_levels = 5;
    int max_iterations = 100;
    int quadrature = 0;
    bool timing = false;
};

int run_adapt(const AdaptArgs& a) {
    thb::DomainHierarchy h = a.mesh.empty()
                                 ? thb::DomainHierarchy(thb::uniform_tensor_basis(to_index(a.degrees),
                                                                                  thb::MultiIndex(static_cast<int>(a.degrees.size()), a.coarse)),
                                                        1)
                                 : thb::load_hierarchy(a.mesh);
    if (h.dim() != 2) throw thb::InvalidInput("adaptive refinement is implemented in two dimensions");
    for (int i = 0; i < 2; ++i)
        if (h.degrees()[i] != 2 && h.degrees()[i] != 3)
            throw thb::InvalidInput("adaptive refinement supports degrees 2 and 3");
    const thb::TargetFunction f = thb::make_target(a.target, h.dim());
    thb::AdaptOptions opt;
    opt.theta = a.theta;
    opt.tolerance = a.tolerance;
    opt.max_levels = a.max_levels;
    opt.max_iterations = a.max_iterations;
    opt.timing = a.timing;
    int qmax = 0;
    for (int i = 0; i < h.dim(); ++i) qmax = std::max(qmax, 2 * (h.degrees()[i] + 1));
    opt.projector.quadrature = a.quadrature > 0 ? a.quadrature : qmax;
    const thb::AdaptResult res = thb::adapt(f.value, h, opt);

    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    nlohmann::json cfg;
    cfg["target"] = f.name;
    cfg["degrees"] = a.degrees;
    cfg["theta"] = a.theta;
    cfg["tolerance"] = a.tolerance;
    cfg["max_levels"] = a.max_levels;
    cfg["quadrature"] = opt.projector.quadrature;
    cfg["space"] = thb::to_string(opt.projector.space);
    cfg["converged"] = res.report.converged;
    std::vector<thb::ConvergenceRow> rows;
    bool valid = true;
    for (const auto& it : res.report.iterations) {
        const thb::ThbBasis basis = thb::build_thb_basis(it.mesh);
        const thb::GlobalProjection g = thb::BezierProjector(basis, opt.projector).project(f.value);
        const thb::ErrorNorms e = thb::error_norms(f, basis, g.coeffs, 1);
        thb::ConvergenceRow row;
        row.degree = it.mesh.degrees()[0];
        row.round = it.iteration;
        row.h = finest_width(it.mesh);
        row.dof = it.dofs;
        row.l2_error = e.l2;
        row.h1_seminorm = e.seminorms[0];
        row.max_elem_error = it.max_error;
        row.seconds = it.seconds;
        rows.push_back(row);
        thb::write_text_file((dir / ("mesh_" + std::to_string(it.iteration) + ".json")).string(), thb::emit_hierarchy(it.mesh));
        if (!it.valid) {
            valid = false;
            for (const auto& n : it.failed) std::cerr << "iteration " << it.iteration << ": " << n << " violated\n";
        }
    }
    thb::write_text_file((dir / "run.csv").string(), thb::results_csv(rows));
    thb::write_text_file((dir / "config.json").string(), cfg.dump(1) + "\n");
    thb::write_text_file((dir / "final.svg").string(), thb::render_svg(res.mesh));
    thb::write_text_file((dir / "final.json").string(), thb::emit_hierarchy(res.mesh));
    const auto& last = res.report.iterations.back();
    std::printf("iterations %zu  levels %d  dof %d  max element error %.3e -> %.3e\n", res.report.iterations.size(),
                last.levels, last.dofs, res.report.iterations.front().max_error, last.max_error);
    return valid ? kOk : kValidationFailure;
}

int run_check(const std::string& path) {
    const thb::DomainHierarchy h = thb::load_hierarchy(path);
    const thb::ThbBasis basis = thb::build_thb_basis(h);
    bool ok = true;
    for (const auto& r : thb::validate_mesh(basis)) {
        std::printf("assumption %d (%s): %s\n", r.assumption, r.name.c_str(), r.ok() ? "ok" : "VIOLATED");
        for (const auto& v : r.violations) std::printf("  %s\n", v.c_str());
        ok = ok && r.ok();
    }
    if (!ok) return kValidationFailure;
    const thb::Partition part = thb::build_partition(basis);
    int border = 0;
    for (const auto& pe : part.elements)
        if (pe.kind == thb::ElementKind::Border) ++border;
    std::printf("levels %d  functions %d  projection elements %zu  border projection elements %d\n", h.num_levels(),
                basis.size(), part.elements.size(), border);
    return kOk;
}

int run_render(const std::string& mesh, const std::string& out, bool outlines) {
    const thb::DomainHierarchy h = thb::load_hierarchy(mesh);
    if (!outlines) {
        emit(out, thb::render_svg(h));
        return kOk;
    }
    const thb::ThbBasis basis = thb::build_thb_basis(h);
    const thb::Partition part = thb::build_partition(basis);
    emit(out, thb::render_svg(h, &part));
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bezier projection on truncated hierarchical B-splines"};
    app.require_subcommand(1);

    ProjectArgs pa;
    auto* project = app.add_subcommand("project", "project a target onto the THB space of a mesh");
    project->add_option("--mesh", pa.mesh, "hierarchy JSON")->required();
    project->add_option("--target", pa.target, "sinsin, tanh-ring or monomial:a,b");
    project->add_option("--space", pa.space, "local space: poly or thb");
    project->add_option("--quadrature", pa.quadrature, "Gauss points per direction (0: p+1)");
    project->add_option("--coeffs", pa.coeffs_out, "coefficient JSON output (default stdout)");
    project->add_option("--csv", pa.csv_out, "norms CSV output");
    project->add_flag("--timing", pa.timing, "record wall-clock seconds");

    ConvergeArgs ca;
    auto* converge = app.add_subcommand("converge", "uniform bisection study on the two-level fixture");
    converge->add_option("--degrees", ca.degrees, "degrees to study")->delimiter(',');
    converge->add_option("--rounds", ca.rounds, "bisection rounds")->check(CLI::PositiveNumber);
    converge->add_option("--dim", ca.dim, "dimension")->check(CLI::Range(1, 3));
    converge->add_option("--target", ca.target, "target name");
    converge->add_option("--out", ca.out, "CSV output (default stdout)");
    converge->add_flag("--timing", ca.timing, "record wall-clock seconds");

    AdaptArgs aa;
    auto* adapt = app.add_subcommand("adapt", "adaptive refinement driven by the max element error");
    adapt->add_option("--target", aa.target, "target name");
    adapt->add_option("--degrees", aa.degrees, "degrees per direction")->delimiter(',')->expected(2);
    adapt->add_option("--coarse", aa.coarse, "coarse elements per direction")->check(CLI::PositiveNumber);
    adapt->add_option("--mesh", aa.mesh, "initial hierarchy JSON instead of a uniform coarse mesh");
    adapt->add_option("--theta", aa.theta, "marking fraction")->check(CLI::Range(0.0, 1.0));
    adapt->add_option("--tol", aa.tolerance, "target max element error");
    adapt->add_option("--max-level", aa.max_levels, "number of levels allowed")->check(CLI::PositiveNumber);
    adapt->add_option("--max-iterations", aa.max_iterations, "iteration limit")->check(CLI::NonNegativeNumber);
    adapt->add_option("--quadrature", aa.quadrature, "Gauss points per direction (0: 2(p+1))");
    adapt->add_option("--out-dir", aa.out_dir, "output directory");
    adapt->add_flag("--timing", aa.timing, "record wall-clock seconds");

    std::string check_mesh;
    auto* check = app.add_subcommand("check-mesh", "run the mesh validators");
    check->add_option("mesh", check_mesh, "hierarchy JSON")->required();

    std::string render_in, render_out;
    bool outlines = false;
    auto* render = app.add_subcommand("render-mesh", "draw the active elements as SVG");
    render->add_option("mesh", render_in, "hierarchy JSON")->required();
    render->add_option("--out", render_out, "SVG output (default stdout)");
    render->add_flag("--projection-elements", outlines, "outline projection elements");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*project) return run_project(pa);
        if (*converge) return run_converge(ca);
        if (*adapt) return run_adapt(aa);
        if (*check) return run_check(check_mesh);
        if (*render) return run_render(render_in, render_out, outlines);
    } catch (const thb::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const thb::MeshAssumptionError& e) {
        std::cerr << e.what() << "\n";
        return kValidationFailure;
    } catch (const thb::InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidationFailure;
    }
    return kUsage;
}
