#pragma once

// Targets, error norms, convergence studies and file formats (hierarchy JSON,
// results CSV, SVG mesh drawings).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "thb/adaptive.hpp"
#include "thb/bezier_projection.hpp"
#include "thb/element_ops.hpp"
#include "thb/errors.hpp"
#include "thb/hierarchy.hpp"
#include "thb/projection_elements.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// Mixed partial derivative of a target; `orders` has one entry per direction.
using TargetDerivative = std::function<double(const Point&, const MultiIndex&)>;

struct TargetFunction {
    std::string name;
    int dim = 2;
    Target value;
    TargetDerivative derivative;  ///< exact derivatives; empty means finite differences
    int exact_order = 0;          ///< highest total order covered by `derivative`

    double operator()(const Point& x) const { return value(x); }
};

namespace detail {

/// k-th derivative of sin at t.
inline double sin_derivative(double t, int k) {
    switch (k % 4) {
        case 0: return std::sin(t);
        case 1: return std::cos(t);
        case 2: return -std::sin(t);
        default: return -std::cos(t);
    }
}

/// Fourth-order central differences, applied direction by direction.
inline double finite_difference(const Target& f, Point x, const MultiIndex& orders, int from = 0) {
    int i = from;
    while (i < orders.size() && orders[i] == 0) ++i;
    if (i >= orders.size()) return f(x);
    MultiIndex rest = orders;
    rest[i] -= 1;
    const double h = 1e-3;
    const auto ii = static_cast<std::size_t>(i);
    const double x0 = x[ii];
    auto at = [&](double s) {
        x[ii] = x0 + s * h;
        return finite_difference(f, x, rest, i);
    };
    const double d = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    return d;
}

inline int total_order(const MultiIndex& a) {
    int s = 0;
    for (int i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

} // namespace detail

/// Derivative of a target: exact where provided, otherwise finite differences.
inline double target_derivative(const TargetFunction& f, const Point& x, const MultiIndex& orders) {
    if (detail::total_order(orders) == 0) return f.value(x);
    if (f.derivative && detail::total_order(orders) <= f.exact_order) return f.derivative(x, orders);
    return detail::finite_difference(f.value, x, orders);
}

inline TargetFunction sinsin_target(int dim) {
    TargetFunction t;
    t.name = "sinsin";
    t.dim = dim;
    t.value = [dim](const Point& x) {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= std::sin(std::numbers::pi * x[static_cast<std::size_t>(i)]);
        return v;
    };
    t.derivative = [dim](const Point& x, const MultiIndex& a) {
        double v = 1.0;
        for (int i = 0; i < dim; ++i)
            v *= std::pow(std::numbers::pi, a[i]) * detail::sin_derivative(std::numbers::pi * x[static_cast<std::size_t>(i)], a[i]);
        return v;
    };
    t.exact_order = 1000;
    return t;
}

/// 1 - tanh((r - 0.3) / (0.05 sqrt 2)) with r = |2x - 1| (Euclidean).
inline TargetFunction tanh_ring_target(int dim) {
    if (dim != 2) throw InvalidInput("tanh-ring is defined in two dimensions");
    TargetFunction t;
    t.name = "tanh-ring";
    t.dim = 2;
    const double s = 0.05 * std::numbers::sqrt2;
    t.value = [s](const Point& x) {
        const double r = std::hypot(2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0);
        return 1.0 - std::tanh((r - 0.3) / s);
    };
    t.derivative = [s](const Point& x, const MultiIndex& a) {
        const double X = 2.0 * x[0] - 1.0;
        const double Y = 2.0 * x[1] - 1.0;
        const double r = std::hypot(X, Y);
        if (r == 0.0) throw DomainError("tanh-ring is not differentiable at the centre");
        const double c = std::cosh((r - 0.3) / s);
        const double g = -1.0 / (s * c * c);  // d/dr of the profile
        return g * 2.0 * (a[0] == 1 ? X : Y) / r;
    };
    t.exact_order = 1;
    return t;
}

/// prod_i x_i^{e_i}.
inline TargetFunction monomial_target(std::vector<int> exps) {
    if (exps.empty() || exps.size() > static_cast<std::size_t>(kMaxDim))
        throw InvalidInput("monomial needs one exponent per direction");
    for (int e : exps)
        if (e < 0) throw InvalidInput("monomial exponents must be non-negative");
    TargetFunction t;
    t.dim = static_cast<int>(exps.size());
    t.name = "monomial:";
    for (std::size_t i = 0; i < exps.size(); ++i) t.name += (i ? "," : "") + std::to_string(exps[i]);
    t.value = [exps](const Point& x) {
        double v = 1.0;
        for (std::size_t i = 0; i < exps.size(); ++i) v *= std::pow(x[i], exps[i]);
        return v;
    };
    t.derivative = [exps](const Point& x, const MultiIndex& a) {
        double v = 1.0;
        for (std::size_t i = 0; i < exps.size(); ++i) {
            const int e = exps[i];
            const int k = a[static_cast<int>(i)];
            if (k > e) return 0.0;
            double fall = 1.0;
            for (int r = 0; r < k; ++r) fall *= e - r;
            v *= fall * std::pow(x[i], e - k);
        }
        return v;
    };
    t.exact_order = 1000;
    return t;
}

inline std::vector<std::string> target_names() { return {"sinsin", "tanh-ring", "monomial:<a,b>"}; }

/// Looks up a target by name for the given dimension.
inline TargetFunction make_target(const std::string& name, int dim) {
    if (name == "sinsin") return sinsin_target(dim);
    if (name == "tanh-ring") return tanh_ring_target(dim);
    if (name.rfind("monomial:", 0) == 0) {
        std::vector<int> e;
        std::stringstream ss(name.substr(9));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(tok, &used);
            } catch (const std::exception&) {
                throw InvalidInput("bad monomial exponent '" + tok + "'");
            }
            if (used != tok.size()) throw InvalidInput("bad monomial exponent '" + tok + "'");
            e.push_back(v);
        }
        if (static_cast<int>(e.size()) != dim)
            throw InvalidInput("monomial '" + name + "' does not match dimension " + std::to_string(dim));
        return monomial_target(e);
    }
    throw InvalidInput("unknown target '" + name + "'");
}

// ---------------------------------------------------------------------------
// norms

struct ErrorNorms {
    double l2 = 0.0;
    std::vector<double> seminorms;  ///< seminorms[k-1] is the H^k seminorm
};

/// L2 error and H^k seminorms (k <= k_max) of f - sum c_j T_j over the active
/// elements, with p+2 Gauss points per direction.
inline ErrorNorms error_norms(const TargetFunction& f, const ThbBasis& basis, const Eigen::VectorXd& coeffs, int k_max) {
    const DomainHierarchy& h = basis.hierarchy();
    const MultiIndex p = h.degrees();
    const int n = h.dim();
    int pmin = p[0];
    for (int i = 1; i < n; ++i) pmin = std::min(pmin, p[i]);
    if (k_max < 0 || k_max > pmin) throw InvalidInput("seminorm order exceeds the smallest degree");
    std::vector<std::vector<MultiIndex>> alphas(static_cast<std::size_t>(k_max + 1));
    for_each_in_box({MultiIndex(n, 0), MultiIndex(n, k_max)}, [&](const MultiIndex& a) {
        const int k = detail::total_order(a);
        if (k <= k_max) alphas[static_cast<std::size_t>(k)].push_back(a);
    });
    MultiIndex q = p;
    for (int i = 0; i < n; ++i) q[i] += 2;
    std::vector<double> sums(static_cast<std::size_t>(k_max + 1), 0.0);
    for (const auto& c : all_active_elements(h)) {
        const Box box = cell_box(h, c);
        const Eigen::VectorXd be = element_bernstein(basis, coeffs, c);
        const BoxQuadrature rule = box_quadrature(box, q);
        for (std::size_t r = 0; r < rule.points.size(); ++r)
            for (int k = 0; k <= k_max; ++k)
                for (const auto& a : alphas[static_cast<std::size_t>(k)]) {
                    const double d = target_derivative(f, rule.points[r], a) - eval_bernstein_poly(be, p, box, rule.points[r], a);
                    sums[static_cast<std::size_t>(k)] += rule.weights[r] * d * d;
                }
    }
    ErrorNorms out;
    out.l2 = std::sqrt(sums[0]);
    for (int k = 1; k <= k_max; ++k) out.seminorms.push_back(std::sqrt(sums[static_cast<std::size_t>(k)]));
    return out;
}

// ---------------------------------------------------------------------------
// convergence study

struct ConvergenceRow {
    int degree = 0;
    int round = 0;
    double h = 0.0;
    int dof = 0;
    double l2_error = 0.0;
    double h1_seminorm = 0.0;
    double max_elem_error = 0.0;
    double seconds = 0.0;
    int rank_deficient = 0;
};

struct RateFit {
    double slope = 0.0;
    double residual = 0.0;  ///< root mean square of the log-log fit residuals
};

/// Least-squares slope of log(err) against log(h) over the last `last` samples.
inline RateFit fit_rate(const std::vector<double>& h, const std::vector<double>& err, int last = 3) {
    if (h.size() != err.size()) throw InvalidInput("rate fit needs matching samples");
    const int n = static_cast<int>(h.size());
    const int m = std::min(last, n);
    if (m < 2) throw InvalidInput("rate fit needs at least two samples");
    Eigen::MatrixXd a(m, 2);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        const auto s = static_cast<std::size_t>(n - m + i);
        if (!(h[s] > 0.0 && err[s] > 0.0)) throw DomainError("rate fit needs positive samples");
        a(i, 0) = std::log(h[s]);
        a(i, 1) = 1.0;
        b[i] = std::log(err[s]);
    }
    const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
    RateFit r;
    r.slope = x[0];
    r.residual = std::sqrt((a * x - b).squaredNorm() / m);
    return r;
}

/// Two-level hierarchy on a (2^{r+1})^n coarse grid with the upper half of
/// every direction refined.
inline DomainHierarchy convergence_hierarchy(const MultiIndex& degrees, int round) {
    const int n = degrees.size();
    const int N = 2 << round;
    DomainHierarchy h(uniform_tensor_basis(degrees, MultiIndex(n, N)), 2);
    cover_box(h, 0, IndexBox{MultiIndex(n, N / 2), MultiIndex(n, N - 1)});
    return h;
}

/// Projector settings for the study: the pseudo-inverse handles the poorly
/// conditioned high-degree local systems.
inline ProjectorOptions convergence_projector_options() {
    return ProjectorOptions{LocalSpace::PiecewisePoly, 0, 1e-15, false};
}

inline std::vector<ConvergenceRow> convergence_study(const TargetFunction& f, const std::vector<int>& degrees, int rounds,
                                                     int dim = 2, bool timing = false,
                                                     ProjectorOptions opts = convergence_projector_options()) {
    if (rounds < 1) throw InvalidInput("at least one round required");
    if (dim < 1 || dim > kMaxDim) throw InvalidInput("dimension must be 1..3");
    std::vector<ConvergenceRow> rows;
    for (int p : degrees) {
        if (p < 1) throw InvalidInput("degrees must be positive");
        for (int r = 0; r < rounds; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const DomainHierarchy h = convergence_hierarchy(MultiIndex(dim, p), r);
            const ThbBasis basis = build_thb_basis(h);
            const BezierProjector proj(basis, opts);
            const GlobalProjection g = proj.project(f.value);
            const ErrorNorms e = error_norms(f, basis, g.coeffs, 1);
            const auto ee = elem_error(f.value, basis, g.coeffs);
            ConvergenceRow row;
            row.degree = p;
            row.round = r;
            row.h = 1.0 / (2 << r);
            row.dof = basis.size();
            row.l2_error = e.l2;
            row.h1_seminorm = e.seminorms[0];
            row.max_elem_error = ee.empty() ? 0.0 : *std::max_element(ee.begin(), ee.end());
            row.rank_deficient = g.rank_deficient;
            if (timing) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* kResultsHeader = "degree,round,h,dof,l2_error,h1_seminorm,max_elem_error,seconds";

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

inline std::string results_csv(const std::vector<ConvergenceRow>& rows) {
    std::string s = std::string(kResultsHeader) + "\n";
    for (const auto& r : rows)
        s += std::to_string(r.degree) + "," + std::to_string(r.round) + "," + format_double(r.h) + "," +
             std::to_string(r.dof) + "," + format_double(r.l2_error) + "," + format_double(r.h1_seminorm) + "," +
             format_double(r.max_elem_error) + "," + format_double(r.seconds) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// hierarchy JSON
//
// {"dim": n, "degrees": [...], "coarse_breaks": [[...], ...], "levels": L,
//  "refined": [[], [cells of Omega_1 at level 1], ..., [cells of Omega_{L-1}]]}
// with cells as index tuples in lexicographic order.

inline nlohmann::json hierarchy_to_json(const DomainHierarchy& h) {
    nlohmann::json j;
    j["dim"] = h.dim();
    const MultiIndex p = h.degrees();
    j["degrees"] = nlohmann::json::array();
    j["coarse_breaks"] = nlohmann::json::array();
    for (int i = 0; i < h.dim(); ++i) {
        j["degrees"].push_back(p[i]);
        j["coarse_breaks"].push_back(h.coarse().direction(i).breaks());
    }
    j["levels"] = h.num_levels();
    j["refined"] = nlohmann::json::array();
    j["refined"].push_back(nlohmann::json::array());
    for (int l = 1; l < h.num_levels(); ++l) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& k : h.domain_cells(l)) {
            nlohmann::json t = nlohmann::json::array();
            for (int i = 0; i < k.size(); ++i) t.push_back(k[i]);
            cells.push_back(t);
        }
        j["refined"].push_back(cells);
    }
    return j;
}

inline std::string emit_hierarchy(const DomainHierarchy& h) { return hierarchy_to_json(h).dump(1) + "\n"; }

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline const nlohmann::json& member(const nlohmann::json& j, const char* key) {
    if (!j.is_object()) throw ParseError("hierarchy must be a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'");
    return *it;
}

inline int as_int(const nlohmann::json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ParseError(what + " must be an integer");
    return j.get<int>();
}

} // namespace detail

inline DomainHierarchy hierarchy_from_json(const nlohmann::json& j) {
    const int dim = detail::as_int(detail::member(j, "dim"), "dim");
    if (dim < 1 || dim > kMaxDim) throw ParseError("dim must be 1..3");
    const auto& deg = detail::member(j, "degrees");
    const auto& brk = detail::member(j, "coarse_breaks");
    if (!deg.is_array() || static_cast<int>(deg.size()) != dim) throw ParseError("degrees must list one degree per direction");
    if (!brk.is_array() || static_cast<int>(brk.size()) != dim) throw ParseError("coarse_breaks must list one array per direction");
    std::vector<KnotVector> dirs;
    for (int i = 0; i < dim; ++i) {
        const int p = detail::as_int(deg[static_cast<std::size_t>(i)], "degree");
        const auto& b = brk[static_cast<std::size_t>(i)];
        if (!b.is_array()) throw ParseError("coarse breaks must be arrays of numbers");
        std::vector<double> v;
        for (const auto& x : b) {
            if (!x.is_number()) throw ParseError("coarse breaks must be numbers");
            v.push_back(x.get<double>());
        }
        try {
            dirs.emplace_back(p, std::move(v));
        } catch (const InvalidInput& e) {
            throw ParseError(std::string("direction ") + std::to_string(i) + ": " + e.what());
        }
    }
    const int levels = detail::as_int(detail::member(j, "levels"), "levels");
    if (levels < 1) throw ParseError("levels must be at least 1");
    const auto& ref = detail::member(j, "refined");
    if (!ref.is_array() || static_cast<int>(ref.size()) != levels) throw ParseError("refined must have one list per level");
    if (!ref[0].is_array() || !ref[0].empty()) throw ParseError("refined[0] must be empty");
    DomainHierarchy h(TensorBasis(std::move(dirs)), levels);
    for (int l = 1; l < levels; ++l) {
        const auto& cells = ref[static_cast<std::size_t>(l)];
        if (!cells.is_array()) throw ParseError("refined[" + std::to_string(l) + "] must be an array");
        std::vector<MultiIndex> list;
        for (const auto& t : cells) {
            if (!t.is_array() || static_cast<int>(t.size()) != dim) throw ParseError("cells must be index tuples of length dim");
            MultiIndex k(dim);
            for (int i = 0; i < dim; ++i) k[i] = detail::as_int(t[static_cast<std::size_t>(i)], "cell index");
            if (!h.basis(l).valid_element(k))
                throw ParseError("level-" + std::to_string(l) + " cell " + to_string(k) + " outside the grid");
            if (!list.empty() && !(list.back() < k))
                throw ParseError("refined[" + std::to_string(l) + "] is not strictly sorted");
            list.push_back(k);
        }
        for (const auto& k : list) {
            const MultiIndex par = parent_of(k);
            if (!h.in_domain(l - 1, par))
                throw ParseError("level-" + std::to_string(l) + " cell " + to_string(k) + " is outside Omega_" + std::to_string(l - 1));
            h.cover(l - 1, par);
        }
        if (h.domain_cells(l) != list)
            throw ParseError("refined[" + std::to_string(l) + "] is not a union of complete sibling groups");
    }
    return h;
}

inline DomainHierarchy parse_hierarchy(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("malformed JSON", line, col);
    }
    return hierarchy_from_json(j);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
}

inline DomainHierarchy load_hierarchy(const std::string& path) { return parse_hierarchy(read_text_file(path)); }

// ---------------------------------------------------------------------------
// SVG

inline const std::array<const char*, 8> kLevelPalette = {"#f7fbff", "#c6dbef", "#6baed6", "#2171b5",
                                                         "#fdd49e", "#fc8d59", "#d7301f", "#7f0000"};

/// Active elements coloured by level; optional thick outlines of projection elements.
inline std::string render_svg(const DomainHierarchy& h, const Partition* part = nullptr, int pixels = 800) {
    if (h.dim() > 2) throw InvalidInput("only 1D and 2D meshes can be drawn");
    const TensorBasis& c = h.coarse();
    const double x0 = c.direction(0).lower();
    const double x1 = c.direction(0).upper();
    const bool two = h.dim() == 2;
    const double y0 = two ? c.direction(1).lower() : 0.0;
    const double y1 = two ? c.direction(1).upper() : 1.0;
    const double w = pixels;
    const double hgt = two ? pixels * (y1 - y0) / (x1 - x0) : 40.0;
    auto px = [&](double x) { return (x - x0) / (x1 - x0) * w; };
    auto py = [&](double y) { return two ? (y1 - y) / (y1 - y0) * hgt : 0.0; };
    auto ph = [&](double lo, double hi) { return two ? (hi - lo) / (y1 - y0) * hgt : hgt; };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.4f", v);
        return std::string(b);
    };
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w) + "\" height=\"" + num(hgt) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(hgt) + "\">\n";
    for (const auto& cell : all_active_elements(h)) {
        const Box b = cell_box(h, cell);
        const double ylo = two ? b.lo[1] : 0.0;
        const double yhi = two ? b.hi[1] : 1.0;
        s += "<rect class=\"level" + std::to_string(cell.level) + "\" x=\"" + num(px(b.lo[0])) + "\" y=\"" + num(py(yhi)) +
             "\" width=\"" + num(px(b.hi[0]) - px(b.lo[0])) + "\" height=\"" + num(ph(ylo, yhi)) + "\" fill=\"" +
             kLevelPalette[static_cast<std::size_t>(cell.level) % kLevelPalette.size()] +
             "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
    }
    if (part)
        for (const auto& pe : part->elements) {
            const Box b = index_box_extent(h.basis(pe.level()), pe.box);
            const double ylo = two ? b.lo[1] : 0.0;
            const double yhi = two ? b.hi[1] : 1.0;
            s += "<rect class=\"pe\" x=\"" + num(px(b.lo[0])) + "\" y=\"" + num(py(yhi)) + "\" width=\"" +
                 num(px(b.hi[0]) - px(b.lo[0])) + "\" height=\"" + num(ph(ylo, yhi)) +
                 "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2.5\"/>\n";
        }
    s += "</svg>\n";
    return s;
}

} // namespace thb
