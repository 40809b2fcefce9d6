#include "solver_internal.hpp"

#include <algorithm>
#include <cmath>

// Full-multiplet tier. The storage coherence is a (storage x ground)
// sublevel block per (z, velocity class) and the shelved coherence a
// (shelf x ground) block; the signal field carries the three spherical
// components. All drive terms contract the LevelScheme coupling tables:
//
//   * two-photon source: per intermediate hyperfine manifold F the pair
//     (signal CG, control CG) collapses to one (storage x ground) matrix
//     M_F^Q divided by that manifold's denominator L_{F,v}; the same matrix
//     conjugated (but with the same 1/L_{F,v}) feeds the field source, which
//     keeps the exchange term exactly energy-conserving at zero decay.
//   * control light shift: K_v = sum_F (CTL_F' CTL_F) / L_{F,v}, acting on
//     the index of the leg the control touches.
//   * transfer: one polarization-contracted (shelf x storage) matrix; the
//     pair (TRF^T, conj(TRF)) conserves excitation like the scalar model.
//
// Per class everything is precomputed once, so an RK4 stage is a handful of
// small dense products per velocity class. The field solve couples the
// three components through the populated-leg absorption matrix and is one
// LU backsolve on the (3 n_z) stacked system.

namespace orca {

namespace {

using detail::Drives;
using detail::Rates;

constexpr std::complex<double> kI{0.0, 1.0};

double mhz_to_rad_ns(double mhz) { return 2.0 * M_PI * 1e-3 * mhz; }

// consecutive runs of equal F in the sublevel list
struct FBlock {
    double F = 0;
    int begin = 0, count = 0;
};

std::vector<FBlock> f_blocks(const std::vector<HyperfineLevel>& subs) {
    std::vector<FBlock> out;
    for (int i = 0; i < static_cast<int>(subs.size()); ++i) {
        if (out.empty() || subs[i].F != out.back().F)
            out.push_back({subs[i].F, i, 0});
        ++out.back().count;
    }
    return out;
}

// complex storage so polarization contractions stay single-scalar-type;
// the entries themselves are real
Eigen::MatrixXcd coupling_table(const LevelScheme& sc, Leg leg, int q,
                                int n_up, int n_lo) {
    Eigen::MatrixXcd t(n_up, n_lo);
    for (int k = 0; k < n_up; ++k)
        for (int i = 0; i < n_lo; ++i) t(k, i) = sc.coupling(leg, q, k, i);
    return t;
}

Polarization event_pol(const std::vector<PulseEnvelope>& evs,
                       const char* what) {
    if (evs.empty()) return Polarization::sigma_plus();
    for (const auto& p : evs)
        if ((p.pol.q - evs.front().pol.q).norm() > 1e-12)
            throw validation_error(std::string("all ") + what +
                               " pulses must share one polarization");
    return evs.front().pol;
}

struct HfOps {
    int G = 0, Pe = 0, Ps = 0, Pd = 0, nz = 0, nv = 0;

    Eigen::MatrixXcd coef_s;  // (Ps x nv) free coefficient per storage row
    Eigen::MatrixXcd coef_d;  // (Pd x nv)

    // per class, flattened (Ps*G x 3): two-photon contractions with the
    // intermediate denominators folded in
    std::vector<Eigen::MatrixXcd> W, Wb;
    std::vector<Eigen::MatrixXcd> K;  // (Ps x Ps) or (G x G) light shift
    bool stark_on_storage = true;     // which index K acts on

    Eigen::MatrixXcd TRFt;  // (Ps x Pd)
    Eigen::MatrixXcd TRFc;  // (Pd x Ps)

    Eigen::Vector3cd pol_sig;
    Eigen::Matrix3cd absorb;  // populated-leg absorption, zero otherwise
    Eigen::PartialPivLU<Eigen::MatrixXcd> flu;  // (3 nz) field system

    double max_offset = 0;  // largest |eps| entering a rotation rate
};

HfOps build_ops(const SolverConfig& cfg, const Rates& R,
                const ChebyshevGrid& grid, const Polarization& pol_ctl,
                const Polarization& pol_trf, const Polarization& pol_sig) {
    const LevelScheme& sc = cfg.scheme;
    HfOps o;
    o.G = sc.n_sub(Level::g);
    o.Pe = sc.n_sub(Level::e);
    o.Ps = sc.n_sub(Level::s);
    o.Pd = sc.n_sub(Level::d);
    o.nz = cfg.n_z;
    o.nv = cfg.vgrid.n();
    o.pol_sig = pol_sig.q;

    // Hyperfine offsets are taken relative to each excited manifold's own
    // centroid; the configured detunings are quoted from the transition that
    // connects the (single-F) ground manifold to that centroid.  The ground
    // hyperfine shift is therefore absorbed into the detuning definition and
    // never appears here, so collapsing the excited splittings reproduces the
    // plain four-level response at identical settings.
    auto offsets = [&](Level l) {
        const auto& subs = sc.sublevels(l);
        Eigen::ArrayXd e(subs.size());
        for (std::size_t i = 0; i < subs.size(); ++i)
            e[static_cast<Eigen::Index>(i)] = mhz_to_rad_ns(subs[i].energy_MHz);
        return e;
    };
    const Eigen::ArrayXd eps_s = offsets(Level::s);
    const Eigen::ArrayXd eps_d = offsets(Level::d);
    const Eigen::ArrayXd eps_e = offsets(Level::e);
    o.max_offset =
        std::max(eps_s.abs().maxCoeff(), eps_d.abs().maxCoeff());

    o.coef_s.resize(o.Ps, o.nv);
    for (int q = 0; q < o.Ps; ++q)
        for (int v = 0; v < o.nv; ++v)
            o.coef_s(q, v) = {-R.gamma_s,
                              -(R.delta_two - eps_s(q) + R.kv_gs(v))};
    o.coef_d.resize(o.Pd, o.nv);
    for (int b = 0; b < o.Pd; ++b)
        for (int v = 0; v < o.nv; ++v)
            o.coef_d(b, v) = {-R.gamma_d,
                              -(R.delta_three - eps_d(b) + R.kv_gd(v))};

    // raw tables per spherical component
    std::array<Eigen::MatrixXcd, 3> t_ge, t_es, t_sd;
    for (int qi = 0; qi < 3; ++qi) {
        t_ge[qi] = coupling_table(sc, Leg::ge, qi - 1, o.Pe, o.G);
        t_es[qi] = coupling_table(sc, Leg::es, qi - 1, o.Ps, o.Pe);
        t_sd[qi] = coupling_table(sc, Leg::sd, qi - 1, o.Pd, o.Ps);
    }

    const Eigen::MatrixXcd trf =
        pol_trf.q(0) * t_sd[0] + pol_trf.q(1) * t_sd[1] +
        pol_trf.q(2) * t_sd[2];
    o.TRFt = trf.transpose();
    o.TRFc = trf.conjugate();

    const Eigen::VectorXcd sqrt_rho =
        sc.ground_population().cwiseSqrt().cast<std::complex<double>>();
    const auto eblocks = f_blocks(sc.sublevels(Level::e));

    o.stark_on_storage = cfg.signal_on_ge;
    o.W.resize(o.nv);
    o.Wb.resize(o.nv);
    o.K.resize(o.nv);

    // per intermediate manifold: two-photon matrices and light-shift blocks
    std::vector<std::array<Eigen::MatrixXcd, 3>> M_F(eblocks.size());
    std::vector<Eigen::MatrixXcd> K_F(eblocks.size());
    std::vector<Eigen::Matrix3cd> A_F(eblocks.size());
    for (std::size_t fi = 0; fi < eblocks.size(); ++fi) {
        const auto& fb = eblocks[fi];
        if (cfg.signal_on_ge) {
            // weak field g-e, control e-s
            const Eigen::MatrixXcd ctl =
                pol_ctl.q(0) * t_es[0].middleCols(fb.begin, fb.count) +
                pol_ctl.q(1) * t_es[1].middleCols(fb.begin, fb.count) +
                pol_ctl.q(2) * t_es[2].middleCols(fb.begin, fb.count);
            for (int qi = 0; qi < 3; ++qi)
                M_F[fi][qi] = ctl.conjugate() *
                              t_ge[qi].middleRows(fb.begin, fb.count) *
                              sqrt_rho.asDiagonal();
            K_F[fi] = ctl.conjugate() * ctl.transpose();
        } else {
            // weak field e-s, control g-e
            const Eigen::MatrixXcd ctl =
                pol_ctl.q(0) * t_ge[0].middleRows(fb.begin, fb.count) +
                pol_ctl.q(1) * t_ge[1].middleRows(fb.begin, fb.count) +
                pol_ctl.q(2) * t_ge[2].middleRows(fb.begin, fb.count);
            for (int qi = 0; qi < 3; ++qi)
                M_F[fi][qi] = t_es[qi].middleCols(fb.begin, fb.count) *
                              ctl.conjugate() * sqrt_rho.asDiagonal();
            K_F[fi] = ctl.adjoint() * ctl;
        }
        A_F[fi].setZero();
        if (cfg.signal_on_ge && cfg.populated_term) {
            const auto& rho = sc.ground_population();
            for (int qa = 0; qa < 3; ++qa)
                for (int qb = 0; qb < 3; ++qb) {
                    double acc = 0;
                    for (int g = 0; g < o.G; ++g)
                        for (int j = 0; j < fb.count; ++j)
                            acc += rho(g) *
                                   t_ge[qa](fb.begin + j, g).real() *
                                   t_ge[qb](fb.begin + j, g).real();
                    A_F[fi](qa, qb) = acc;
                }
        }
    }

    const int pg = o.Ps * o.G;
    Eigen::Matrix3cd absorb = Eigen::Matrix3cd::Zero();
    for (int v = 0; v < o.nv; ++v) {
        o.W[v].setZero(pg, 3);
        o.Wb[v].setZero(pg, 3);
        o.K[v].setZero(K_F[0].rows(), K_F[0].cols());
        for (std::size_t fi = 0; fi < eblocks.size(); ++fi) {
            const std::complex<double> invL =
                1.0 /
                std::complex<double>(R.gamma_e,
                                     R.delta_e - eps_e(eblocks[fi].begin) +
                                         R.kv_ge(v));
            for (int qi = 0; qi < 3; ++qi) {
                o.W[v].col(qi) += invL * M_F[fi][qi].reshaped();
                o.Wb[v].col(qi) +=
                    invL * M_F[fi][qi].conjugate().reshaped();
            }
            o.K[v] += invL * K_F[fi];
            absorb += (R.dv(v) * invL) * A_F[fi];
        }
        // the ground-side shift right-multiplies the state; store it
        // pre-transposed
        if (!o.stark_on_storage) o.K[v].transposeInPlace();
    }
    o.absorb = absorb;

    // field system: d/dz stacked over (z, Q) plus the absorption blocks,
    // inlet rows replaced by the boundary condition
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(3 * o.nz, 3 * o.nz);
    for (int iz = 0; iz < o.nz; ++iz)
        for (int jz = 0; jz < o.nz; ++jz)
            for (int q = 0; q < 3; ++q)
                m(3 * iz + q, 3 * jz + q) = grid.D(iz, jz);
    for (int iz = 0; iz < o.nz; ++iz)
        m.block<3, 3>(3 * iz, 3 * iz) += absorb;
    for (int q = 0; q < 3; ++q) {
        m.row(q).setZero();
        m(q, q) = 1.0;
    }
    o.flu.compute(m);
    return o;
}

struct HfEngine {
    const SolverConfig& cfg;
    const Drives& drv;
    const HfOps& ops;
    const ChebyshevGrid& grid;
    Eigen::ArrayXd cv;
    int cols_v;  // G * nz, state columns per class

    Eigen::MatrixXcd Sgs, Sgd;
    Eigen::MatrixXcd k1g, k1d, k2g, k2d, k3g, k3d, k4g, k4d, tg, td;
    Eigen::MatrixXcd E3;  // (3 x nz)
    Eigen::MatrixXcd src3;
    Eigen::VectorXcd rhs;
    bool field_on = false;

    HfEngine(const SolverConfig& c, const Drives& d, const HfOps& o,
             const ChebyshevGrid& g, const Rates& R)
        : cfg(c), drv(d), ops(o), grid(g), cv(R.cv),
          cols_v(o.G * o.nz) {
        const int cols = cols_v * o.nv;
        Sgs.setZero(o.Ps, cols);
        Sgd.setZero(o.Pd, cols);
        for (auto* m : {&k1g, &k2g, &k3g, &k4g, &tg}) m->setZero(o.Ps, cols);
        for (auto* m : {&k1d, &k2d, &k3d, &k4d, &td}) m->setZero(o.Pd, cols);
        E3.setZero(3, o.nz);
        src3.setZero(3, o.nz);
        rhs.setZero(3 * o.nz);
    }

    void solve_field(double t, const Eigen::MatrixXcd& gs,
                     std::complex<double> C) {
        if (!field_on) {
            E3.setZero();
            return;
        }
        src3.setZero();
        if (C != 0.0) {
            const int pg = ops.Ps * ops.G;
            for (int v = 0; v < ops.nv; ++v) {
                Eigen::Map<const Eigen::MatrixXcd> sm(
                    gs.data() +
                        static_cast<std::ptrdiff_t>(ops.Ps) * cols_v * v,
                    pg, ops.nz);
                src3.noalias() +=
                    (kI * C * cv(v)) * (ops.Wb[v].transpose() * sm);
            }
        }
        const std::complex<double> ein = drv.input_at(t);
        for (int iz = 0; iz < ops.nz; ++iz)
            rhs.segment<3>(3 * iz) = src3.col(iz);
        rhs.head<3>() = ein * ops.pol_sig;
        const Eigen::VectorXcd x = ops.flu.solve(rhs);
        E3 = Eigen::Map<const Eigen::MatrixXcd>(x.data(), 3, ops.nz);
    }

    void stage(double t, const Eigen::MatrixXcd& gs,
               const Eigen::MatrixXcd& gd, Eigen::MatrixXcd& dg,
               Eigen::MatrixXcd& dd) {
        // half-Rabi coupling convention, as in the scalar tier
        const std::complex<double> C = 0.5 * drv.control_at(t);
        const std::complex<double> T = 0.5 * drv.transfer_at(t);
        solve_field(t, gs, C);
        const double c2 = std::norm(C);
        const int pg = ops.Ps * ops.G;

        detail::parallel_ranges(ops.nv, cfg.workers, [&](int vb, int ve) {
            for (int v = vb; v < ve; ++v) {
                auto gsb = gs.middleCols(cols_v * v, cols_v);
                auto gdb = gd.middleCols(cols_v * v, cols_v);
                auto dgb = dg.middleCols(cols_v * v, cols_v);
                auto ddb = dd.middleCols(cols_v * v, cols_v);

                dgb = (gsb.array().colwise() *
                       ops.coef_s.col(v).array()).matrix();
                ddb = (gdb.array().colwise() *
                       ops.coef_d.col(v).array()).matrix();
                if (c2 != 0.0) {
                    if (ops.stark_on_storage) {
                        dgb.noalias() += (-c2) * (ops.K[v] * gsb);
                    } else {
                        // shift acts on the ground index, z block by block
                        for (int iz = 0; iz < ops.nz; ++iz)
                            dgb.middleCols(iz * ops.G, ops.G).noalias() +=
                                (-c2) * (gsb.middleCols(iz * ops.G, ops.G) *
                                         ops.K[v]);
                    }
                }
                if (field_on && C != 0.0) {
                    Eigen::Map<Eigen::MatrixXcd> dflat(
                        dg.data() +
                            static_cast<std::ptrdiff_t>(ops.Ps) * cols_v * v,
                        pg, ops.nz);
                    dflat.noalias() +=
                        ops.W[v] * ((-kI * std::conj(C) * cv(v)) * E3);
                }
                if (T != 0.0) {
                    dgb.noalias() += (-kI * T) * (ops.TRFt * gdb);
                    ddb.noalias() += (-kI * std::conj(T)) * (ops.TRFc * gsb);
                }
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

    void drift(double dt) {
        if (dt <= 0) return;
        for (int v = 0; v < ops.nv; ++v) {
            const Eigen::ArrayXcd fs = (ops.coef_s.col(v).array() * dt).exp();
            const Eigen::ArrayXcd fd = (ops.coef_d.col(v).array() * dt).exp();
            auto gsb = Sgs.middleCols(cols_v * v, cols_v);
            auto gdb = Sgd.middleCols(cols_v * v, cols_v);
            gsb = (gsb.array().colwise() * fs).matrix();
            gdb = (gdb.array().colwise() * fd).matrix();
        }
    }

    Eigen::ArrayXd excitation_per_class() const {
        Eigen::ArrayXd exc(ops.nv);
        for (int v = 0; v < ops.nv; ++v) {
            double acc = 0;
            for (int iz = 0; iz < ops.nz; ++iz) {
                const int c0 = cols_v * v + iz * ops.G;
                acc += grid.w(iz) *
                       (Sgs.middleCols(c0, ops.G).squaredNorm() +
                        Sgd.middleCols(c0, ops.G).squaredNorm());
            }
            exc(v) = acc;
        }
        return exc;
    }

    // z-averaged class columns of the flattened blocks
    void snapshot(double t, std::vector<CoherenceSnapshot>& out) const {
        CoherenceSnapshot s;
        s.tau_ns = t;
        s.gs.resize(ops.Ps * ops.G, ops.nv);
        s.gd.resize(ops.Pd * ops.G, ops.nv);
        for (int v = 0; v < ops.nv; ++v) {
            Eigen::Map<const Eigen::MatrixXcd> gsm(
                Sgs.data() + static_cast<std::ptrdiff_t>(ops.Ps) * cols_v * v,
                ops.Ps * ops.G, ops.nz);
            Eigen::Map<const Eigen::MatrixXcd> gdm(
                Sgd.data() + static_cast<std::ptrdiff_t>(ops.Pd) * cols_v * v,
                ops.Pd * ops.G, ops.nz);
            s.gs.col(v) = gsm * grid.w;
            s.gd.col(v) = gdm * grid.w;
        }
        out.push_back(std::move(s));
    }
};

} // namespace

SimulationRecord run_hyperfine(const SolverConfig& cfg,
                               const PulseSequence& seq) {
    const Rates R = detail::resolve_rates(cfg);
    const Drives drv = detail::gather_drives(seq);

    const ChebyshevGrid grid = chebyshev_grid(cfg.n_z);
    const Polarization pol_c = event_pol(drv.control, "control");
    const Polarization pol_t = event_pol(drv.transfer, "transfer");
    const HfOps ops =
        build_ops(cfg, R, grid, pol_c, pol_t, seq.signal_template.pol);
    detail::check_config(cfg, seq, R, ops.max_offset);
    const detail::StepPlan plan = detail::plan_steps(cfg, seq);

    HfEngine eng(cfg, drv, ops, grid, R);
    const int cols = eng.cols_v * ops.nv;
    if (cfg.initial_gs.size()) {
        if (cfg.initial_gs.rows() != ops.Ps || cfg.initial_gs.cols() != cols)
            throw validation_error(
                "initial_gs must be storage-sublevels x ground*n_z*n_classes");
        eng.Sgs = cfg.initial_gs;
    }
    if (cfg.initial_gd.size()) {
        if (cfg.initial_gd.rows() != ops.Pd || cfg.initial_gd.cols() != cols)
            throw validation_error(
                "initial_gd must be shelf-sublevels x ground*n_z*n_classes");
        eng.Sgd = cfg.initial_gd;
    }

    detail::Recorder rec(cfg, seq, 3);

    std::vector<double> snaps = cfg.snapshot_times_ns;
    std::sort(snaps.begin(), snaps.end());
    std::size_t isnap = 0;

    double t = plan.t_begin;
    auto observe = [&](double tau) {
        eng.solve_field(tau, eng.Sgs, 0.5 * drv.control_at(tau));
        Eigen::VectorXcd ein = drv.input_at(tau) * ops.pol_sig;
        Eigen::VectorXcd eout = eng.E3.col(ops.nz - 1);
        const double exc = detail::class_sum(eng.excitation_per_class());
        if (!std::isfinite(exc))
            throw divergence_error("excitation is no longer finite", tau);
        rec.sample(tau, ein, eout, exc);
        while (isnap < snaps.size() && std::abs(snaps[isnap] - tau) < 1e-9) {
            eng.snapshot(snaps[isnap], rec.rec.snapshots);
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
    if (plan.t_end > t) eng.drift(plan.t_end - t);

    return rec.finish(seq);
}

namespace detail {

Eigen::MatrixXcd propagate_slice_hyperfine(const SolverConfig& cfg,
                                           const Eigen::MatrixXcd& s_gs,
                                           const Eigen::VectorXcd& e_in,
                                           std::complex<double> control_env) {
    const Rates R = resolve_rates(cfg);
    const ChebyshevGrid grid = chebyshev_grid(cfg.n_z);
    // the slice fixes sigma+ control and transfer polarization
    const HfOps ops = build_ops(cfg, R, grid, Polarization::sigma_plus(),
                                Polarization::sigma_plus(),
                                Polarization::sigma_plus());
    const int cols = ops.G * ops.nz * ops.nv;
    if (s_gs.rows() != ops.Ps || s_gs.cols() != cols)
        throw validation_error(
            "coherence slice must be storage-sublevels x ground*n_z*n_classes");
    if (e_in.size() != 3)
        throw validation_error("hyperfine inlet field has three components");

    Eigen::MatrixXcd src3 = Eigen::MatrixXcd::Zero(3, ops.nz);
    if (control_env != 0.0) {
        const int pg = ops.Ps * ops.G;
        for (int v = 0; v < ops.nv; ++v) {
            Eigen::Map<const Eigen::MatrixXcd> sm(
                s_gs.data() +
                    static_cast<std::ptrdiff_t>(ops.Ps) * ops.G * ops.nz * v,
                pg, ops.nz);
            src3.noalias() += (kI * (0.5 * control_env) * R.cv(v)) *
                              (ops.Wb[v].transpose() * sm);
        }
    }
    Eigen::VectorXcd rhs(3 * ops.nz);
    for (int iz = 0; iz < ops.nz; ++iz)
        rhs.segment<3>(3 * iz) = src3.col(iz);
    rhs.head<3>() = e_in;
    const Eigen::VectorXcd x = ops.flu.solve(rhs);
    Eigen::MatrixXcd out(ops.nz, 3);
    for (int iz = 0; iz < ops.nz; ++iz)
        out.row(iz) = x.segment<3>(3 * iz).transpose();
    return out;
}

} // namespace detail

} // namespace orca
