#include "orca/analysis.hpp"

#include "orca/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>

namespace orca {

namespace {

double sample_abs2(const SimulationRecord& rec, std::size_t i) {
    double f = 0;
    for (int q = 0; q < rec.n_q; ++q)
        f += std::norm(rec.field_out(static_cast<Eigen::Index>(i), q));
    return f;
}

} // namespace

double window_energy(const SimulationRecord& rec, double t0, double t1) {
    if (!(t1 > t0))
        throw validation_error("window must have positive width");
    double acc = 0;
    for (std::size_t i = 0; i + 1 < rec.tau_ns.size(); ++i) {
        const double a = rec.tau_ns[i], b = rec.tau_ns[i + 1];
        if (b <= t0 || a >= t1) continue;
        const double fa = sample_abs2(rec, i), fb = sample_abs2(rec, i + 1);
        const double c = std::max(a, t0), d = std::min(b, t1);
        // linear interpolation of |E|^2 keeps the quadrature additive over
        // any partition of the span
        const double fc = fa + (fb - fa) * (c - a) / (b - a);
        const double fd = fa + (fb - fa) * (d - a) / (b - a);
        acc += 0.5 * (fc + fd) * (d - c);
    }
    return acc;
}

double window_efficiency(const SimulationRecord& rec, double t0, double t1,
                         double reference) {
    if (!(reference > 0))
        throw validation_error("window reference energy must be positive");
    if (rec.tau_ns.empty() || t1 <= rec.tau_ns.front() ||
        t0 >= rec.tau_ns.back()) {
        std::cerr << "warning: window [" << t0 << ", " << t1
                  << "] ns does not overlap the recorded span\n";
        return 0;
    }
    return window_energy(rec, t0, t1) / reference;
}

std::vector<double> mode_weights(
    const SimulationRecord& rec,
    const std::vector<std::pair<double, double>>& spans) {
    if (spans.empty())
        throw validation_error("mode_weights needs at least one window");
    std::vector<double> out;
    for (const auto& s : spans)
        out.push_back(window_energy(rec, s.first, s.second));
    if (!(out.front() > 0))
        throw validation_error("first window holds no energy; cannot "
                               "normalize mode weights");
    for (std::size_t i = out.size(); i-- > 0;) out[i] /= out.front();
    return out;
}

void EfficiencyTrace::require_valid() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (i > 0 && !(p.t_ns > points[i - 1].t_ns))
            throw validation_error("trace times must be strictly increasing");
        if (!(p.efficiency >= 0) || !(p.efficiency <= 1.0 + 1e-6))
            throw validation_error("trace efficiencies must lie in [0, 1]");
        if (p.sigma < 0)
            throw validation_error("trace uncertainties must be >= 0");
    }
}

double FitResult::param(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params[i];
    throw lookup_error("no fit parameter named " + name);
}

double FitResult::sigma(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return sigmas[i];
    throw lookup_error("no fit parameter named " + name);
}

namespace {

// model value and gradient at one abscissa
using ModelFn = std::function<double(const Eigen::VectorXd&, double,
                                     Eigen::VectorXd&)>;

struct FitData {
    std::vector<double> x, y, w; // w = 1/sigma, 1 where sigma = 0
};

double lm_cost(const ModelFn& f, const FitData& d, const Eigen::VectorXd& p) {
    Eigen::VectorXd g(p.size());
    double c = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double r = d.w[i] * (f(p, d.x[i], g) - d.y[i]);
        c += r * r;
    }
    return c;
}

// damped least squares; returns true when the step tolerance was reached
bool lm_minimize(const ModelFn& f, const FitData& d, Eigen::VectorXd& p) {
    const int np = static_cast<int>(p.size());
    const int n = static_cast<int>(d.x.size());
    double lambda = 1e-3;
    double cost = lm_cost(f, d, p);
    if (!std::isfinite(cost)) return false;

    Eigen::MatrixXd J(n, np);
    Eigen::VectorXd r(n), g(np);
    for (int it = 0; it < 300; ++it) {
        for (int i = 0; i < n; ++i) {
            const double v = f(p, d.x[i], g);
            r(i) = d.w[i] * (v - d.y[i]);
            J.row(i) = d.w[i] * g.transpose();
        }
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd grad = J.transpose() * r;

        bool stepped = false;
        for (int tries = 0; tries < 12 && !stepped; ++tries) {
            Eigen::MatrixXd M = A;
            for (int k = 0; k < np; ++k)
                M(k, k) += lambda * (A(k, k) > 0 ? A(k, k) : 1.0);
            const Eigen::VectorXd step = M.ldlt().solve(-grad);
            const Eigen::VectorXd q = p + step;
            const double c2 = lm_cost(f, d, q);
            if (std::isfinite(c2) && c2 <= cost) {
                const double rel =
                    (step.cwiseAbs().array() /
                     (p.cwiseAbs().array() + 1e-12)).maxCoeff();
                const double drop = cost - c2;
                p = q;
                cost = c2;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                if (rel < 1e-13 || drop < 1e-30 + 1e-15 * cost) return true;
            } else {
                lambda *= 10;
            }
        }
        if (!stepped) return cost < 1e-28; // stuck; fine only at zero residual
    }
    return false;
}

std::mt19937_64 replica_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
}

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// eta0 (1 - V cos^2(a sqrt(E) + phi))
double rabi_model(const Eigen::VectorXd& p, double e, Eigen::VectorXd& g) {
    const double rt = std::sqrt(e);
    const double x = p(2) * rt + p(3);
    const double c = std::cos(x);
    const double s2x = std::sin(2.0 * x);
    g.resize(4);
    g(0) = 1.0 - p(1) * c * c;
    g(1) = -p(0) * c * c;
    g(2) = p(0) * p(1) * s2x * rt;
    g(3) = p(0) * p(1) * s2x;
    return p(0) * (1.0 - p(1) * c * c);
}

// fold the cos^2 parameters into V >= 0, a > 0, phi in [0, pi)
void canonicalize_rabi(Eigen::VectorXd& p) {
    if (p(2) < 0) {
        p(2) = -p(2);
        p(3) = -p(3);
    }
    if (p(1) < 0) {
        const double u = -p(1);
        p(0) *= 1.0 + u;
        p(1) = u / (1.0 + u);
        p(3) -= M_PI / 2.0;
    }
    p(3) = std::fmod(p(3), M_PI);
    if (p(3) < 0) p(3) += M_PI;
}

double pi_energy_of(const Eigen::VectorXd& p) {
    if (p(2) <= 0) return 0;
    double v = (M_PI / 2.0 - p(3)) / p(2);
    if (v <= 0) v = (1.5 * M_PI - p(3)) / p(2);
    return v * v;
}

} // namespace

FitResult fit_rabi(const std::vector<RabiPoint>& points, std::uint64_t seed,
                   int n_boot) {
    if (points.size() < 4)
        throw fit_error("Rabi fit needs at least 4 points");
    FitData d;
    for (const auto& pt : points) {
        d.x.push_back(pt.energy_nj);
        d.y.push_back(pt.efficiency);
        d.w.push_back(pt.sigma > 0 ? 1.0 / pt.sigma : 1.0);
    }
    const double ymax = *std::max_element(d.y.begin(), d.y.end());
    const double ymin = *std::min_element(d.y.begin(), d.y.end());
    if (!(ymax > 0) || ymax - ymin < 1e-12 * std::max(1.0, std::abs(ymax)))
        throw fit_error("degenerate Rabi data: no oscillation contrast");
    const double rt_lo = std::sqrt(*std::min_element(d.x.begin(), d.x.end()));
    const double rt_hi = std::sqrt(*std::max_element(d.x.begin(), d.x.end()));
    if (!(rt_hi > rt_lo))
        throw fit_error("Rabi fit needs a spread of pulse energies");

    // the data should span roughly half a period or more; scan around that
    const double a0 = M_PI / (rt_hi - rt_lo);
    const double v0 =
        std::clamp(ymax > 0 ? 1.0 - ymin / ymax : 0.5, 0.05, 0.999);

    bool found = false;
    double best_cost = 0;
    Eigen::VectorXd best(4);
    for (double af : {0.5, 1.0, 2.0}) {
        for (double phi : {0.0, M_PI / 2.0, M_PI, 1.5 * M_PI}) {
            Eigen::VectorXd p(4);
            p << ymax, v0, af * a0, phi;
            if (!lm_minimize(rabi_model, d, p)) continue;
            const double c = lm_cost(rabi_model, d, p);
            if (!found || c < best_cost) {
                found = true;
                best_cost = c;
                best = p;
            }
        }
    }
    if (!found) throw fit_error("Rabi fit did not converge from any start");
    canonicalize_rabi(best);

    FitResult out;
    out.names = {"eta0", "V", "a", "phi"};
    out.params = {best(0), best(1), best(2), best(3)};
    out.sigmas = {0, 0, 0, 0};
    out.residual_norm = std::sqrt(best_cost);
    out.n_boot = n_boot;
    out.seed = seed;
    out.pi_energy_nj = pi_energy_of(best);
    out.pi_fidelity = best(1);

    if (n_boot > 0) {
        std::vector<std::vector<double>> samples(4);
        std::vector<double> epis, vs;
        int failed = 0;
        for (int b = 0; b < n_boot; ++b) {
            auto rng = replica_rng(seed, static_cast<std::uint64_t>(b));
            std::normal_distribution<double> nd;
            FitData rd = d;
            for (std::size_t i = 0; i < points.size(); ++i)
                if (points[i].sigma > 0)
                    rd.y[i] = points[i].efficiency + points[i].sigma * nd(rng);
            Eigen::VectorXd p = best;
            if (!lm_minimize(rabi_model, rd, p)) {
                ++failed;
                continue;
            }
            canonicalize_rabi(p);
            for (int k = 0; k < 4; ++k) samples[static_cast<std::size_t>(k)].push_back(p(k));
            epis.push_back(pi_energy_of(p));
            vs.push_back(p(1));
        }
        if (failed * 2 > n_boot)
            throw fit_error("bootstrap refits mostly diverged");
        for (int k = 0; k < 4; ++k)
            out.sigmas[static_cast<std::size_t>(k)] =
                stddev(samples[static_cast<std::size_t>(k)]);
        out.pi_energy_sigma = stddev(epis);
        out.pi_fidelity_sigma = stddev(vs);
    }
    return out;
}

FitResult fit_lifetime(const EfficiencyTrace& trace, LifetimeModel model,
                       std::uint64_t seed, int n_boot) {
    trace.require_valid();
    if (trace.points.size() < 3)
        throw fit_error("lifetime fit needs at least 3 points");
    FitData d;
    for (const auto& pt : trace.points) {
        d.x.push_back(pt.t_ns);
        d.y.push_back(pt.efficiency);
        d.w.push_back(pt.sigma > 0 ? 1.0 / pt.sigma : 1.0);
    }
    const double ymax = *std::max_element(d.y.begin(), d.y.end());
    const double ymin = *std::min_element(d.y.begin(), d.y.end());
    if (!(ymax > 0) || ymax - ymin < 1e-12 * std::max(1.0, ymax))
        throw fit_error("degenerate lifetime data: trace is flat");

    const bool gauss = model == LifetimeModel::gaussian;
    ModelFn f = [gauss](const Eigen::VectorXd& p, double t,
                        Eigen::VectorXd& g) {
        g.resize(2);
        if (gauss) {
            const double u = t / p(1);
            const double e = std::exp(-u * u);
            g(0) = e;
            g(1) = p(0) * e * 2.0 * u * u / p(1);
            return p(0) * e;
        }
        const double e = std::exp(-t / p(1));
        g(0) = e;
        g(1) = p(0) * e * t / (p(1) * p(1));
        return p(0) * e;
    };

    // crude 1/e crossing for the initial decay constant
    double tc0 = d.x.back() - d.x.front();
    for (std::size_t i = 0; i < d.x.size(); ++i)
        if (d.y[i] < ymax * std::exp(-1.0)) {
            tc0 = std::max(d.x[i] - d.x.front(), 1e-6);
            break;
        }
    bool found = false;
    double best_cost = 0;
    Eigen::VectorXd best(2);
    for (double tf : {0.5, 1.0, 2.0, 4.0}) {
        Eigen::VectorXd p(2);
        p << ymax, tf * tc0;
        if (!lm_minimize(f, d, p)) continue;
        const double c = lm_cost(f, d, p);
        if (!found || c < best_cost) {
            found = true;
            best_cost = c;
            best = p;
        }
    }
    if (!found) throw fit_error("lifetime fit did not converge");
    if (best(1) < 0) best(1) = -best(1); // t_c enters squared in the Gaussian

    FitResult out;
    out.names = {"eta0", "t_c"};
    out.params = {best(0), best(1)};
    out.sigmas = {0, 0};
    out.residual_norm = std::sqrt(best_cost);
    out.n_boot = n_boot;
    out.seed = seed;

    if (n_boot > 0) {
        std::vector<double> e0s, tcs;
        int failed = 0;
        for (int b = 0; b < n_boot; ++b) {
            auto rng = replica_rng(seed, static_cast<std::uint64_t>(b));
            std::normal_distribution<double> nd;
            FitData rd = d;
            for (std::size_t i = 0; i < trace.points.size(); ++i)
                if (trace.points[i].sigma > 0)
                    rd.y[i] = trace.points[i].efficiency +
                              trace.points[i].sigma * nd(rng);
            Eigen::VectorXd p = best;
            if (!lm_minimize(f, rd, p)) {
                ++failed;
                continue;
            }
            e0s.push_back(p(0));
            tcs.push_back(std::abs(p(1)));
        }
        if (failed * 2 > n_boot)
            throw fit_error("bootstrap refits mostly diverged");
        out.sigmas[0] = stddev(e0s);
        out.sigmas[1] = stddev(tcs);
    }
    return out;
}

namespace {

// Catmull-Rom interpolation of the residual surface in index space; the
// fractional index is mapped back through the (possibly non-uniform) axes.
double cr_weighted(double fm1, double f0, double f1, double f2, double u) {
    return 0.5 * ((2.0 * f0) + (-fm1 + f1) * u +
                  (2.0 * fm1 - 5.0 * f0 + 4.0 * f1 - f2) * u * u +
                  (-fm1 + 3.0 * f0 - 3.0 * f1 + f2) * u * u * u);
}

double bicubic_at(const Eigen::MatrixXd& m, double xi, double yi) {
    const int nx = static_cast<int>(m.rows());
    const int ny = static_cast<int>(m.cols());
    const auto clampi = [](int v, int n) { return std::min(std::max(v, 0), n - 1); };
    const int i0 = clampi(static_cast<int>(std::floor(xi)), nx - 1 > 0 ? nx - 1 : 1);
    const int j0 = clampi(static_cast<int>(std::floor(yi)), ny - 1 > 0 ? ny - 1 : 1);
    const double u = xi - i0, v = yi - j0;
    double col[4];
    for (int a = -1; a <= 2; ++a) {
        const int i = clampi(i0 + a, nx);
        col[a + 1] = cr_weighted(m(i, clampi(j0 - 1, ny)), m(i, clampi(j0, ny)),
                                 m(i, clampi(j0 + 1, ny)), m(i, clampi(j0 + 2, ny)), v);
    }
    return cr_weighted(col[0], col[1], col[2], col[3], u);
}

double axis_value(const std::vector<double>& ax, double idx) {
    const int n = static_cast<int>(ax.size());
    if (idx <= 0) return ax.front();
    if (idx >= n - 1) return ax.back();
    const int i = static_cast<int>(std::floor(idx));
    const double u = idx - i;
    return ax[static_cast<std::size_t>(i)] * (1.0 - u) +
           ax[static_cast<std::size_t>(i) + 1] * u;
}

struct GridMin {
    double xi = 0, yi = 0, value = 0;
};

// best node (ties toward smaller |A|, then |B|) plus a damped Newton polish
// on the bicubic surface, clamped to the hull
GridMin locate_minimum(const Eigen::MatrixXd& m,
                       const std::vector<double>& A,
                       const std::vector<double>& B) {
    const int nx = static_cast<int>(m.rows());
    const int ny = static_cast<int>(m.cols());
    int bi = 0, bj = 0;
    bool have = false;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            if (!std::isfinite(m(i, j))) continue;
            if (!have) {
                bi = i; bj = j; have = true;
                continue;
            }
            const double cur = m(i, j), bst = m(bi, bj);
            const double tie = 1e-15 * std::max(1.0, std::abs(bst));
            if (cur < bst - tie ||
                (std::abs(cur - bst) <= tie &&
                 (std::abs(A[static_cast<std::size_t>(i)]) < std::abs(A[static_cast<std::size_t>(bi)]) ||
                  (std::abs(A[static_cast<std::size_t>(i)]) == std::abs(A[static_cast<std::size_t>(bi)]) &&
                   std::abs(B[static_cast<std::size_t>(j)]) < std::abs(B[static_cast<std::size_t>(bj)]))))) {
                bi = i;
                bj = j;
            }
        }
    if (!have) throw fit_error("no valid nodes on the residual grid");

    // failed nodes poison the interpolation stencil; wall them off
    Eigen::MatrixXd s = m;
    double mx = 0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            if (std::isfinite(s(i, j))) mx = std::max(mx, std::abs(s(i, j)));
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            if (!std::isfinite(s(i, j))) s(i, j) = 10.0 * mx + 1.0;

    double xi = bi, yi = bj;
    double val = bicubic_at(s, xi, yi);
    const double h = 1e-3;
    for (int it = 0; it < 60; ++it) {
        const double fx = (bicubic_at(s, xi + h, yi) - bicubic_at(s, xi - h, yi)) / (2 * h);
        const double fy = (bicubic_at(s, xi, yi + h) - bicubic_at(s, xi, yi - h)) / (2 * h);
        const double fxx = (bicubic_at(s, xi + h, yi) - 2 * val + bicubic_at(s, xi - h, yi)) / (h * h);
        const double fyy = (bicubic_at(s, xi, yi + h) - 2 * val + bicubic_at(s, xi, yi - h)) / (h * h);
        const double fxy = (bicubic_at(s, xi + h, yi + h) - bicubic_at(s, xi + h, yi - h) -
                            bicubic_at(s, xi - h, yi + h) + bicubic_at(s, xi - h, yi - h)) /
                           (4 * h * h);
        double dx, dy;
        const double det = fxx * fyy - fxy * fxy;
        if (det > 0 && fxx > 0) {
            dx = -(fyy * fx - fxy * fy) / det;
            dy = -(fxx * fy - fxy * fx) / det;
        } else { // not convex here; fall back to a gradient step
            dx = -0.25 * fx;
            dy = -0.25 * fy;
        }
        const double lim = 1.0; // never jump past a full cell
        const double mg = std::max(std::abs(dx), std::abs(dy));
        if (mg > lim) {
            dx *= lim / mg;
            dy *= lim / mg;
        }
        double step = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 8 && !moved; ++bt, step *= 0.5) {
            const double x2 = std::clamp(xi + step * dx, 0.0, nx - 1.0);
            const double y2 = std::clamp(yi + step * dy, 0.0, ny - 1.0);
            const double v2 = bicubic_at(s, x2, y2);
            if (v2 <= val) {
                if (std::abs(x2 - xi) + std::abs(y2 - yi) < 1e-10) {
                    xi = x2; yi = y2; val = v2;
                    return {xi, yi, val};
                }
                xi = x2;
                yi = y2;
                val = v2;
                moved = true;
            }
        }
        if (!moved) break;
    }
    return {xi, yi, val};
}

} // namespace

ResidualGrid hyperfine_grid_search(const EfficiencyTrace& data,
                                   const std::vector<double>& A_MHz,
                                   const std::vector<double>& B_MHz,
                                   const GridSearchSetup& setup,
                                   std::uint64_t seed, int n_resample) {
    data.require_valid();
    if (data.points.empty())
        throw validation_error("grid search needs a non-empty trace");
    if (A_MHz.size() < 3 || B_MHz.size() < 3)
        throw validation_error("grid search needs at least 3 points per axis");
    for (std::size_t i = 1; i < A_MHz.size(); ++i)
        if (!(A_MHz[i] > A_MHz[i - 1]))
            throw validation_error("A axis must be strictly increasing");
    for (std::size_t i = 1; i < B_MHz.size(); ++i)
        if (!(B_MHz[i] > B_MHz[i - 1]))
            throw validation_error("B axis must be strictly increasing");
    if (!setup.sequence_for || !setup.efficiency_of)
        throw validation_error("grid search setup is missing its sequence or "
                               "efficiency callback");

    const int na = static_cast<int>(A_MHz.size());
    const int nb = static_cast<int>(B_MHz.size());
    const int nt = static_cast<int>(data.points.size());

    ResidualGrid out;
    out.A_MHz = A_MHz;
    out.B_MHz = B_MHz;
    out.residual.setConstant(na, nb, std::numeric_limits<double>::quiet_NaN());
    out.n_resample = n_resample;
    out.seed = seed;

    {
        const PulseSequence probe = setup.sequence_for(data.points.front().t_ns);
        out.polarizations.push_back("signal:" + probe.signal_template.pol.label);
        for (Channel ch : {Channel::control, Channel::transfer}) {
            const auto evs = probe.on_channel(ch);
            if (!evs.empty())
                out.polarizations.push_back(channel_name(ch) + ":" +
                                            evs.front()->pulse.pol.label);
        }
    }

    // one simulated trace per node, reused across all data resamples
    std::vector<Eigen::VectorXd> sim(static_cast<std::size_t>(na * nb));
    int failed = 0;
    for (int ia = 0; ia < na; ++ia) {
        for (int ib = 0; ib < nb; ++ib) {
            SpeciesData sp = setup.species;
            auto& lv = sp.levels[static_cast<std::size_t>(setup.target)];
            lv.A_MHz = A_MHz[static_cast<std::size_t>(ia)];
            lv.B_MHz = B_MHz[static_cast<std::size_t>(ib)];
            SolverConfig cfg = setup.cfg;
            cfg.tier = ModelTier::hyperfine;
            Eigen::VectorXd node(nt);
            try {
                cfg.scheme = build_level_scheme(sp);
                for (int it = 0; it < nt; ++it) {
                    const PulseSequence seq = setup.sequence_for(
                        data.points[static_cast<std::size_t>(it)].t_ns);
                    node(it) = setup.efficiency_of(run_hyperfine(cfg, seq));
                }
            } catch (const std::exception& ex) {
                ++failed;
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "node (A=%.3f, B=%.3f) failed: %s",
                              A_MHz[static_cast<std::size_t>(ia)],
                              B_MHz[static_cast<std::size_t>(ib)], ex.what());
                out.notes.emplace_back(buf);
                continue;
            }
            sim[static_cast<std::size_t>(ia * nb + ib)] = node;
            double s = 0;
            for (int it = 0; it < nt; ++it) {
                const double r =
                    node(it) -
                    data.points[static_cast<std::size_t>(it)].efficiency;
                s += r * r;
            }
            out.residual(ia, ib) = s;
        }
    }
    if (failed * 5 > na * nb)
        throw fit_error("more than 20% of grid nodes failed to simulate");

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int ia = 0; ia < na; ++ia)
        for (int ib = 0; ib < nb; ++ib)
            if (std::isfinite(out.residual(ia, ib))) {
                lo = std::min(lo, out.residual(ia, ib));
                hi = std::max(hi, out.residual(ia, ib));
            }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi)))
        out.notes.emplace_back("flat residual surface; minimum ill-defined");

    const GridMin base = locate_minimum(out.residual, A_MHz, B_MHz);
    out.A_min = axis_value(A_MHz, base.xi);
    out.B_min = axis_value(B_MHz, base.yi);
    out.value_min = base.value;

    if (n_resample > 0) {
        std::vector<double> as, bs;
        for (int rchain = 0; rchain < n_resample; ++rchain) {
            auto rng = replica_rng(seed, static_cast<std::uint64_t>(rchain));
            std::normal_distribution<double> nd;
            Eigen::VectorXd y(nt);
            for (int it = 0; it < nt; ++it) {
                const auto& p = data.points[static_cast<std::size_t>(it)];
                y(it) = p.efficiency + (p.sigma > 0 ? p.sigma * nd(rng) : 0.0);
            }
            Eigen::MatrixXd res(na, nb);
            res.setConstant(std::numeric_limits<double>::quiet_NaN());
            for (int ia = 0; ia < na; ++ia)
                for (int ib = 0; ib < nb; ++ib) {
                    const auto& node = sim[static_cast<std::size_t>(ia * nb + ib)];
                    if (node.size() != nt) continue;
                    res(ia, ib) = (node - y).squaredNorm();
                }
            const GridMin g = locate_minimum(res, A_MHz, B_MHz);
            as.push_back(axis_value(A_MHz, g.xi));
            bs.push_back(axis_value(B_MHz, g.yi));
        }
        out.A_sigma = stddev(as);
        out.B_sigma = stddev(bs);
    }
    return out;
}

} // namespace orca
