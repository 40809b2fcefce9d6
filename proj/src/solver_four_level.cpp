#include "solver_internal.hpp"

#include <algorithm>
#include <cmath>

// Reduced tier: the intermediate manifold is folded into the complex
// denominator L_v, leaving one (S_gs, S_gd) pair per (z, velocity class).
// The signal is slaved to the coherences, so each RK4 stage performs one
// spectral boundary-value solve in z and the coherences advance under
//
//   dS_gs = -(gamma_s + i D2_v + |C|^2 / L_v) S_gs
//           - i conj(C) sqrt(d w_v) E / L_v - i T S_gd
//   dS_gd = -(gamma_d + i D3_v) S_gd - i conj(T) S_gs
//
// with C the control and T the transfer drive. Outside every pulse and
// window the right-hand side is diagonal and the state is advanced by exact
// phase/decay factors instead of steps.

namespace orca {

namespace {

using detail::Drives;
using detail::Rates;

constexpr std::complex<double> kI{0.0, 1.0};

struct ClassCoefs {
    Eigen::ArrayXcd inv_L;     // 1 / (gamma_e + i(Delta_e + k_ge v))
    Eigen::ArrayXcd a_gs;      // -(gamma_s + i D2_v)
    Eigen::ArrayXcd a_gd;      // -(gamma_d + i D3_v)
    Eigen::VectorXcd src_col;  // i c_v / L_v, contracted against S_gs rows
    Eigen::RowVectorXcd drive_row; // c_v / L_v, outer product with E
    std::complex<double> m0 = 0;   // field operator (0 unless populated leg)
};

ClassCoefs build_coefs(const SolverConfig& cfg, const Rates& R) {
    const int nv = cfg.vgrid.n();
    ClassCoefs c;
    c.inv_L.resize(nv);
    c.a_gs.resize(nv);
    c.a_gd.resize(nv);
    c.src_col.resize(nv);
    c.drive_row.resize(nv);
    for (int v = 0; v < nv; ++v) {
        const std::complex<double> L(R.gamma_e, R.delta_e + R.kv_ge(v));
        c.inv_L(v) = 1.0 / L;
        c.a_gs(v) = {-R.gamma_s, -(R.delta_two + R.kv_gs(v))};
        c.a_gd(v) = {-R.gamma_d, -(R.delta_three + R.kv_gd(v))};
        c.src_col(v) = kI * R.cv(v) * c.inv_L(v);
        c.drive_row(v) = R.cv(v) * c.inv_L(v);
        // linear absorption exists only when the signal drives the populated
        // leg; with the signal on the upper leg there is no ground-state dipole
        // for it to burn against
        if (cfg.populated_term && cfg.signal_on_ge) c.m0 -= R.dv(v) * c.inv_L(v);
    }
    return c;
}

struct Engine {
    const SolverConfig& cfg;
    const Drives& drv;
    const ClassCoefs& cc;
    const ChebyshevGrid& grid;
    FieldPropagator& prop;
    int nz, nv;

    Eigen::MatrixXcd Sgs, Sgd;
    Eigen::MatrixXcd k1g, k1d, k2g, k2d, k3g, k3d, k4g, k4d, tg, td;
    Eigen::VectorXcd src, E;
    bool field_on = false;

    Engine(const SolverConfig& c, const Drives& d, const ClassCoefs& k,
           const ChebyshevGrid& g, FieldPropagator& p)
        : cfg(c), drv(d), cc(k), grid(g), prop(p), nz(c.n_z),
          nv(c.vgrid.n()) {
        Sgs.setZero(nz, nv);
        Sgd.setZero(nz, nv);
        for (auto* m : {&k1g, &k1d, &k2g, &k2d, &k3g, &k3d, &k4g, &k4d, &tg,
                        &td})
            m->setZero(nz, nv);
        src.setZero(nz);
        E.setZero(nz);
    }

    void solve_field(double t, const Eigen::MatrixXcd& gs,
                     std::complex<double> control) {
        if (!field_on) {
            E.setZero();
            return;
        }
        const std::complex<double> ein = drv.input_at(t);
        if (control != 0.0) {
            src.noalias() = gs * cc.src_col;
            src *= control;
        } else {
            src.setZero();
        }
        E = prop.solve(ein, src);
    }

    // derivative of (gs, gd) at stage time t into (dg, dd); E is refreshed
    void stage(double t, const Eigen::MatrixXcd& gs,
               const Eigen::MatrixXcd& gd, Eigen::MatrixXcd& dg,
               Eigen::MatrixXcd& dd) {
        // envelopes carry the physical Rabi frequency; the coherences couple
        // through half of it, so a pi-area transfer is a complete swap
        const std::complex<double> C = 0.5 * drv.control_at(t);
        const std::complex<double> T = 0.5 * drv.transfer_at(t);
        solve_field(t, gs, C);

        const double c2 = std::norm(C);
        detail::parallel_ranges(nv, cfg.workers, [&](int b, int e) {
            const int n = e - b;
            const Eigen::Array<std::complex<double>, 1, Eigen::Dynamic> coef =
                (cc.a_gs.segment(b, n) - c2 * cc.inv_L.segment(b, n))
                    .transpose();
            dg.middleCols(b, n) =
                (gs.middleCols(b, n).array().rowwise() * coef).matrix();
            if (field_on && C != 0.0)
                dg.middleCols(b, n).noalias() +=
                    (-kI * std::conj(C)) * E * cc.drive_row.segment(b, n);
            dd.middleCols(b, n) =
                (gd.middleCols(b, n).array().rowwise() *
                 cc.a_gd.segment(b, n).transpose())
                    .matrix();
            if (T != 0.0) {
                dg.middleCols(b, n) -= (kI * T) * gd.middleCols(b, n);
                dd.middleCols(b, n) -=
                    (kI * std::conj(T)) * gs.middleCols(b, n);
            }
        });
    }

    void rk4_step(double t, double h) {
        stage(t, Sgs, Sgd, k1g, k1d);
        tg = Sgs + (0.5 * h) * k1g;
        td = Sgd + (0.5 * h) * k1d;
        stage(t + 0.5 * h, tg, td, k2g, k2d);
        tg = Sgs + (0.5 * h) * k2g;
        td = Sgd + (0.5 * h) * k2d;
        stage(t + 0.5 * h, tg, td, k3g, k3d);
        tg = Sgs + h * k3g;
        td = Sgd + h * k3d;
        stage(t + h, tg, td, k4g, k4d);
        Sgs += (h / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        Sgd += (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    }

    // exact inter-pulse evolution: diagonal per class, no field
    void drift(double dt) {
        if (dt <= 0) return;
        for (int v = 0; v < nv; ++v) {
            Sgs.col(v) *= std::exp(cc.a_gs(v) * dt);
            Sgd.col(v) *= std::exp(cc.a_gd(v) * dt);
        }
    }

    Eigen::ArrayXd excitation_per_class() const {
        Eigen::VectorXd exc = Sgs.cwiseAbs2().transpose() * grid.w;
        exc.noalias() += Sgd.cwiseAbs2().transpose() * grid.w;
        return exc.array();
    }
};

} // namespace

SimulationRecord run_four_level(const SolverConfig& cfg,
                                const PulseSequence& seq) {
    const Rates R = detail::resolve_rates(cfg);
    detail::check_config(cfg, seq, R, 0.0);
    const Drives drv = detail::gather_drives(seq);
    const detail::StepPlan plan = detail::plan_steps(cfg, seq);

    const int nz = cfg.n_z, nv = cfg.vgrid.n();
    const ChebyshevGrid grid = chebyshev_grid(nz);
    const ClassCoefs cc = build_coefs(cfg, R);
    FieldPropagator prop(grid, Eigen::VectorXcd::Constant(nz, cc.m0));

    Engine eng(cfg, drv, cc, grid, prop);
    if (cfg.initial_gs.size()) {
        if (cfg.initial_gs.rows() != nz || cfg.initial_gs.cols() != nv)
            throw validation_error("initial_gs must be n_z x n_classes");
        eng.Sgs = cfg.initial_gs;
    }
    if (cfg.initial_gd.size()) {
        if (cfg.initial_gd.rows() != nz || cfg.initial_gd.cols() != nv)
            throw validation_error("initial_gd must be n_z x n_classes");
        eng.Sgd = cfg.initial_gd;
    }

    detail::Recorder rec(cfg, seq, 1);

    std::vector<double> snaps = cfg.snapshot_times_ns;
    std::sort(snaps.begin(), snaps.end());
    std::size_t isnap = 0;
    const Eigen::RowVectorXd wz = grid.w.transpose();

    double t = plan.t_begin;
    auto observe = [&](double tau) {
        eng.solve_field(tau, eng.Sgs, 0.5 * drv.control_at(tau));
        Eigen::VectorXcd ein(1), eout(1);
        ein(0) = drv.input_at(tau);
        eout(0) = eng.E(nz - 1);
        const double exc = detail::class_sum(eng.excitation_per_class());
        if (!std::isfinite(exc))
            throw divergence_error("excitation is no longer finite", tau);
        rec.sample(tau, ein, eout, exc);
        while (isnap < snaps.size() && std::abs(snaps[isnap] - tau) < 1e-9) {
            CoherenceSnapshot s;
            s.tau_ns = snaps[isnap];
            s.gs = wz * eng.Sgs;
            s.gd = wz * eng.Sgd;
            rec.rec.snapshots.push_back(std::move(s));
            ++isnap;
        }
    };

    for (const auto& sg : plan.segments) {
        eng.drift(sg.t0 - t);
        t = sg.t0;
        eng.field_on =
            drv.input_in(sg.t0, sg.t1) || drv.control_in(sg.t0, sg.t1);
        rec.begin_segment();
        observe(t);
        if (sg.steps > 0) {
            const double h = (sg.t1 - sg.t0) / sg.steps;
            for (int k = 1; k <= sg.steps; ++k) {
                eng.rk4_step(t, h);
                t = sg.t0 + k * h;
                observe(t);
            }
        }
        rec.end_segment();
    }
    if (plan.t_end > t) {
        eng.drift(plan.t_end - t);
        t = plan.t_end;
    }

    return rec.finish(seq);
}

namespace detail {

Eigen::MatrixXcd propagate_slice_four_level(const SolverConfig& cfg,
                                            const Eigen::MatrixXcd& s_gs,
                                            const Eigen::VectorXcd& e_in,
                                            std::complex<double> control_env) {
    const Rates R = resolve_rates(cfg);
    if (s_gs.rows() != cfg.n_z || s_gs.cols() != cfg.vgrid.n())
        throw validation_error("coherence slice must be n_z x n_classes");
    if (e_in.size() != 1)
        throw validation_error("four-level inlet field has one component");
    const ChebyshevGrid grid = chebyshev_grid(cfg.n_z);
    const ClassCoefs cc = build_coefs(cfg, R);
    FieldPropagator prop(grid, Eigen::VectorXcd::Constant(cfg.n_z, cc.m0));
    Eigen::VectorXcd src = (0.5 * control_env) * (s_gs * cc.src_col);
    return prop.solve(e_in(0), src);
}

} // namespace detail

} // namespace orca
