#include "chg/group.hpp"

#include <cmath>

#include "chg/error.hpp"
#include "chg/numerics.hpp"

namespace chg {

int GroupSpec::dim() const {
    int n = 0;
    for (int m : layer_dims) n += m;
    return n;
}

void GroupSpec::validate() const {
    require(!layer_dims.empty(), ErrorKind::data, "group has no layers");
    for (int m : layer_dims) require(m > 0, ErrorKind::data, "layer dimension must be positive");
    require(step == static_cast<int>(layer_dims.size()), ErrorKind::data, "step must equal number of layers");
    int q = 0;
    for (std::size_t i = 0; i < layer_dims.size(); ++i) q += static_cast<int>(i + 1) * layer_dims[i];
    require(q == Q, ErrorKind::data, "Q must equal sum of i*dim(V_i)");
    if (step >= 2) {
        const int m1 = layer_dims[0], m2 = layer_dims[1];
        require(static_cast<int>(bracket.size()) == m1 * m1 * m2, ErrorKind::data, "bracket table size");
        for (int i = 0; i < m1; ++i)
            for (int j = 0; j < m1; ++j)
                for (int k = 0; k < m2; ++k)
                    require(bracket[(i * m1 + j) * m2 + k] == -bracket[(j * m1 + i) * m2 + k],
                            ErrorKind::data, "bracket table must be antisymmetric");
    }
}

nlohmann::json GroupSpec::to_json() const {
    return {{"name", name},
            {"layer_dims", layer_dims},
            {"step", step},
            {"norm_kind", norm_kind == NormKind::euclidean ? "euclidean" : "koranyi"}};
}

GroupSpec GroupSpec::from_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        require(k == "name" || k == "layer_dims" || k == "step" || k == "norm_kind", ErrorKind::data,
                "unknown GroupSpec key '" + k + "'");
    }
    GroupSpec g = by_name(j.at("name").get<std::string>());
    if (j.contains("layer_dims"))
        require(j["layer_dims"].get<std::vector<int>>() == g.layer_dims, ErrorKind::data,
                "layer_dims do not match built-in group " + g.name);
    if (j.contains("step"))
        require(j["step"].get<int>() == g.step, ErrorKind::data, "step does not match built-in group");
    if (j.contains("norm_kind")) {
        const auto nk = j["norm_kind"].get<std::string>();
        require(nk == "euclidean" || nk == "koranyi", ErrorKind::data, "unknown norm_kind " + nk);
        require((nk == "koranyi") == (g.norm_kind == NormKind::koranyi), ErrorKind::data,
                "norm_kind not available for " + g.name);
    }
    return g;
}

GroupSpec GroupSpec::euclidean(int n) {
    require(n >= 1 && n <= 3, ErrorKind::capability, "Euclidean backends exist for n = 1, 2, 3");
    GroupSpec g;
    g.name = "R" + std::to_string(n);
    g.layer_dims = {n};
    g.step = 1;
    g.Q = n;
    g.norm_kind = NormKind::euclidean;
    return g;
}

GroupSpec GroupSpec::heisenberg() {
    GroupSpec g;
    g.name = "H1";
    g.layer_dims = {2, 1};
    g.step = 2;
    g.Q = 4;
    g.norm_kind = NormKind::koranyi;
    g.bracket = {0.0, 1.0, -1.0, 0.0};
    return g;
}

GroupSpec GroupSpec::by_name(const std::string& name) {
    if (name == "R1") return euclidean(1);
    if (name == "R2") return euclidean(2);
    if (name == "R3") return euclidean(3);
    if (name == "H1") return heisenberg();
    fail(ErrorKind::capability, "no built-in group named '" + name + "'");
}

GroupPtr make_group(const std::string& name) { return std::make_shared<const GroupSpec>(GroupSpec::by_name(name)); }

GroupElement::GroupElement(GroupPtr s, std::vector<double> c) : spec(std::move(s)), coords(std::move(c)) {
    require(spec != nullptr, ErrorKind::data, "group element without spec");
    require(static_cast<int>(coords.size()) == spec->dim(), ErrorKind::data,
            "coordinate length does not match layer dims");
}

GroupElement GroupElement::zero(GroupPtr s) {
    const int n = s->dim();
    return GroupElement(std::move(s), std::vector<double>(n, 0.0));
}

void product_raw(const GroupSpec& g, const double* x, const double* y, double* out) {
    const int n = g.dim();
    if (g.step == 1) {
        for (int i = 0; i < n; ++i) out[i] = x[i] + y[i];
        return;
    }
    const int m1 = g.layer_dims[0], m2 = g.layer_dims[1];
    double tmp[16];
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + y[i];
    for (int k = 0; k < m2; ++k) {
        double s = 0;
        for (int i = 0; i < m1; ++i)
            for (int j = 0; j < m1; ++j) s += g.bracket[(i * m1 + j) * m2 + k] * x[i] * y[j];
        tmp[m1 + k] += 0.5 * s;
    }
    for (int i = 0; i < n; ++i) out[i] = tmp[i];
}

double norm_raw(const GroupSpec& g, const double* x) {
    const int m1 = g.horizontal_dim();
    double h2 = 0;
    for (int i = 0; i < m1; ++i) h2 += x[i] * x[i];
    if (g.norm_kind == NormKind::euclidean || g.step == 1) return std::sqrt(h2);
    double v2 = 0;
    for (int k = 0; k < g.vertical_dim(); ++k) v2 += x[m1 + k] * x[m1 + k];
    return std::sqrt(std::sqrt(h2 * h2 + 16.0 * v2));
}

void dilate_raw(const GroupSpec& g, double lambda, const double* x, double* out) {
    const int n = g.dim(), m1 = g.horizontal_dim();
    for (int i = 0; i < n; ++i) out[i] = (i < m1 ? lambda : lambda * lambda) * x[i];
}

static void same_spec(const GroupElement& x, const GroupElement& y) {
    require(x.spec && y.spec && (x.spec == y.spec || *x.spec == *y.spec), ErrorKind::spec_mismatch,
            "group elements belong to different groups");
}

GroupElement group_product(const GroupElement& x, const GroupElement& y) {
    same_spec(x, y);
    std::vector<double> out(x.coords.size());
    product_raw(*x.spec, x.coords.data(), y.coords.data(), out.data());
    return GroupElement(x.spec, std::move(out));
}

GroupElement group_inverse(const GroupElement& x) {
    std::vector<double> out(x.coords.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -x.coords[i];
    return GroupElement(x.spec, std::move(out));
}

GroupElement dilate(double lambda, const GroupElement& x) {
    require(lambda > 0, ErrorKind::domain, "dilation factor must be positive");
    std::vector<double> out(x.coords.size());
    dilate_raw(*x.spec, lambda, x.coords.data(), out.data());
    return GroupElement(x.spec, std::move(out));
}

double homogeneous_norm(const GroupElement& x) { return norm_raw(*x.spec, x.coords.data()); }

std::vector<double> horizontal_vector_coeffs(int i, const GroupElement& x) {
    const GroupSpec& g = *x.spec;
    const int m1 = g.horizontal_dim();
    require(i >= 1 && i <= m1, ErrorKind::domain, "horizontal index out of range");
    std::vector<double> c(g.dim(), 0.0);
    c[i - 1] = 1.0;
    if (g.step >= 2) {
        const int m2 = g.vertical_dim();
        // d/ds of x·(s e_i): second layer picks up ½ Σ_j B^k_{ji} x_j.
        for (int k = 0; k < m2; ++k) {
            double s = 0;
            for (int j = 0; j < m1; ++j) s += g.bracket[(j * m1 + (i - 1)) * m2 + k] * x.coords[j];
            c[m1 + k] = 0.5 * s;
        }
    }
    return c;
}

std::vector<GroupElement> sphere_sample(const GroupPtr& spec, int count, std::uint64_t seed) {
    require(count >= 1, ErrorKind::domain, "sphere_sample needs count >= 1");
    const int n = spec->dim();
    CounterRng rng(seed, 0x5eed5eedULL);
    std::vector<GroupElement> out;
    out.reserve(count);
    std::uint64_t ctr = 0;
    std::vector<double> x(n), w(n);
    while (static_cast<int>(out.size()) < count) {
        double r2 = 0;
        for (int i = 0; i < n; ++i) {
            x[i] = 2.0 * rng.uniform(ctr++) - 1.0;
            r2 += x[i] * x[i];
        }
        if (r2 > 1.0 || r2 < 0.0025) continue;
        const double nr = norm_raw(*spec, x.data());
        dilate_raw(*spec, 1.0 / nr, x.data(), w.data());
        out.emplace_back(spec, w);
    }
    return out;
}

SphereRule sphere_rule(const GroupSpec& g, int res) {
    require(res >= 2, ErrorKind::domain, "sphere rule resolution must be >= 2");
    SphereRule r;
    if (g.name == "R1") {
        r.points = {{1.0}, {-1.0}};
        r.weights = {1.0, 1.0};
    } else if (g.name == "R2") {
        const int m = 2 * res;
        for (int k = 0; k < m; ++k) {
            const double a = 2 * kPi * (k + 0.5) / m;
            r.points.push_back({std::cos(a), std::sin(a)});
            r.weights.push_back(2 * kPi / m);
        }
    } else if (g.name == "R3") {
        const GaussRule& gl = gauss_legendre(res);
        const int m = 2 * res;
        for (int i = 0; i < res; ++i) {
            const double z = gl.x[i], s = std::sqrt(1 - z * z);
            for (int k = 0; k < m; ++k) {
                const double a = 2 * kPi * (k + 0.5) / m;
                r.points.push_back({s * std::cos(a), s * std::sin(a), z});
                r.weights.push_back(gl.w[i] * 2 * kPi / m);
            }
        }
    } else if (g.is_heisenberg()) {
        // ω(θ,ψ) = (√cosθ cosψ, √cosθ sinψ, sinθ/4) and dy = r³/4 dr dθ dψ.
        // θ = (π/2)·v(3−v²)/2 smooths the √cosθ endpoint behaviour.
        const GaussRule& gl = gauss_legendre(res);
        const int m = 2 * res;
        for (int i = 0; i < res; ++i) {
            const double v = gl.x[i];
            const double th = 0.5 * kPi * v * (3 - v * v) / 2;
            const double dth = 0.5 * kPi * 1.5 * (1 - v * v);
            const double rc = std::sqrt(std::max(0.0, std::cos(th)));
            for (int k = 0; k < m; ++k) {
                const double p = 2 * kPi * (k + 0.5) / m;
                r.points.push_back({rc * std::cos(p), rc * std::sin(p), std::sin(th) / 4});
                r.weights.push_back(0.25 * gl.w[i] * dth * 2 * kPi / m);
            }
        }
    } else {
        fail(ErrorKind::capability, "no sphere rule for group " + g.name);
    }
    return r;
}

}  // namespace chg
