//! Boundary controllability via the Hilbert Uniqueness Method.
//!
//! The control is h = (x·ν)∂v/∂ν on Γ₀ with v an adjoint solution. The
//! controllability Gramian maps adjoint initial data to the initial-time
//! pairings of a backward controlled solve, and is made exactly symmetric
//! at the discrete level by (i) recording the adjoint flux at step
//! midpoints, (ii) lifting the control into the load as −Fᵀ(∫(x·ν)·) g and
//! (iii) stepping both systems with the same midpoint scheme. Conjugate
//! gradient on the filtered modal subspace then produces the minimizer of
//! the HUM functional.
//!
//! Spectral filtering (lowest ρ·n modes of (K−λW, M)) restores uniform
//! discrete observability, which fails for unfiltered P1 wave
//! discretizations; the controlled dynamics projects its load onto the
//! filtered span, so the verification runs live in the same Galerkin
//! subspace the Gramian acts on.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::{lift_control, SchrodingerStepper, WaveStepper};
use crate::linalg::{cg_solve, cg_solve_complex, SkylineFactor};
use crate::operator::OperatorSet;
use crate::spectral::{modal_basis, ModalBasis};

#[derive(Clone, Debug)]
pub struct HumOptions {
    /// fraction of lowest modes retained
    pub rho: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// smallest sampled Gramian Rayleigh quotient admitted before the
    /// subspace is declared unobservable at this (h, dt, ρ, T)
    pub gram_floor: f64,
    pub seed: u64,
    /// lift the wave-time requirement T > 2R_Ω (T-scans)
    pub allow_short_time: bool,
}

impl Default for HumOptions {
    fn default() -> Self {
        HumOptions {
            rho: 0.3,
            cg_tol: 1e-8,
            cg_max_iter: 200,
            gram_floor: 1e-10,
            seed: 0x5EED,
            allow_short_time: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateNorms {
    /// ‖u(T)‖_{L²}
    pub l2: f64,
    /// dual surrogate ‖M u_t(T)‖_{(H_λ)'} = (rᵀ S⁻¹ r)^{1/2}
    pub dual: f64,
    /// ½(u_tᵀMu_t + uᵀSu)
    pub energy: f64,
}

/// Control trace: per-step midpoint values of the normal derivative per
/// facet; the physical trace on Γ₀ is (x·ν)·value at the facet points.
#[derive(Clone, Debug)]
pub struct ControlTrace {
    pub times: Vec<f64>,
    /// facet indices in Γ₀
    pub gamma0_facets: Vec<usize>,
    /// values[step][facet] over all facets (Γ₀ weighting applied by the lift)
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct HumResult {
    pub minimizer_v0: Vec<f64>,
    pub minimizer_v1: Vec<f64>,
    pub control: ControlTrace,
    pub cg_history: Vec<f64>,
    pub iterations: usize,
    pub cg_residual: f64,
    pub gram_min_quotient: f64,
    pub final_norms: StateNorms,
    pub uncontrolled_norms: StateNorms,
    pub modes: usize,
}

pub struct WaveHum<'a> {
    pub ops: &'a OperatorSet,
    pub lambda: f64,
    pub t_final: f64,
    pub dt: f64,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub opts: HumOptions,
    pub basis: ModalBasis,
    stepper: WaveStepper<'a>,
    n_steps: usize,
    gamma_w: Vec<f64>,
}

fn filter_size(rho: f64, n: usize) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("filter fraction rho = {rho} outside (0, 1]")));
    }
    Ok(((rho * n as f64).floor() as usize).clamp(1, n))
}

impl<'a> WaveHum<'a> {
    pub fn new(
        ops: &'a OperatorSet,
        lambda: f64,
        t_final: f64,
        dt: f64,
        u0: Vec<f64>,
        u1: Vec<f64>,
        opts: HumOptions,
    ) -> Result<Self> {
        let two_r = 2.0 * ops.mesh.domain.r_omega;
        if t_final <= two_r && !opts.allow_short_time {
            return Err(Error::Hum(format!(
                "control time T = {t_final} must exceed 2 R_Omega = {two_r} (override available for scans)"
            )));
        }
        let n_steps = (t_final / dt).round() as usize;
        if n_steps == 0 || ((n_steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidArgument("T must be an integer multiple of dt".into()));
        }
        let m = filter_size(opts.rho, ops.n_dofs())?;
        let basis = modal_basis(ops, lambda, m)?;
        let stepper = WaveStepper::new(ops, lambda, dt)?;
        let gamma_w = ops.gamma0_xdotnu_weights();
        Ok(WaveHum { ops, lambda, t_final, dt, u0, u1, opts, basis, stepper, n_steps, gamma_w })
    }

    pub fn modes(&self) -> usize {
        self.basis.m()
    }

    /// Forward homogeneous adjoint from modal data; returns the per-step
    /// midpoint normal-derivative values per facet.
    fn adjoint_midpoint_fluxes(&self, c0: &[f64], c1: &[f64]) -> Vec<Vec<f64>> {
        let mut v = self.basis.synthesize(c0);
        let mut p = self.basis.synthesize(c1);
        let mut out = Vec::with_capacity(self.n_steps);
        let mut v_prev = v.clone();
        for _ in 0..self.n_steps {
            self.stepper.step(&mut v, &mut p, None);
            let v_mid: Vec<f64> =
                v_prev.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            out.push(self.ops.boundary_flux(&v_mid));
            v_prev.copy_from_slice(&v);
        }
        out
    }

    /// Backward controlled solve from zero final data; the load is the
    /// modal projection of the control lift. Returns (w(0), w_t(0)).
    fn backward_controlled(&self, g: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.ops.n_dofs();
        let mut w = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut lift = vec![0.0; n];
        for step in (0..self.n_steps).rev() {
            lift_control(self.ops, &self.gamma_w, &g[step], &mut lift);
            let proj = self.basis.project_load(&self.ops.m, &lift);
            self.stepper.step_back(&mut w, &mut q, Some(&proj));
        }
        (w, q)
    }

    /// One Gramian application in modal coefficients (c0 ‖ c1, length 2m):
    /// forward adjoint, record h = (x·ν)∂v/∂ν on Γ₀, backward controlled
    /// solve, return the initial-time pairings (ΦᵀM w_t(0), −ΦᵀM w(0)).
    pub fn gramian_apply(&self, c: &[f64]) -> Vec<f64> {
        let m = self.basis.m();
        let g = self.adjoint_midpoint_fluxes(&c[..m], &c[m..]);
        let (w0, q0) = self.backward_controlled(&g);
        let mut out = self.basis.analyze_dual(&self.ops.m.matvec_alloc(&q0));
        let neg = self.basis.analyze_dual(&self.ops.m.matvec_alloc(&w0));
        out.extend(neg.into_iter().map(|x| -x));
        out
    }

    /// ⟨Λc, c⟩ should equal the observation integral by construction; both
    /// are exposed for the cross-check battery.
    pub fn observation_integral(&self, c: &[f64]) -> f64 {
        let m = self.basis.m();
        let g = self.adjoint_midpoint_fluxes(&c[..m], &c[m..]);
        let mut total = 0.0;
        for step_vals in &g {
            let mut s = 0.0;
            for (fi, &val) in step_vals.iter().enumerate() {
                s += self.gamma_w[fi] * val * val;
            }
            total += self.dt * s;
        }
        total
    }

    /// energy of modal data: ½(Σ θ c0² + Σ c1²) = E(0)
    pub fn modal_energy(&self, c: &[f64]) -> f64 {
        let m = self.basis.m();
        let mut e = 0.0;
        for k in 0..m {
            e += self.basis.eigenvalues[k] * c[k] * c[k] + c[m + k] * c[m + k];
        }
        0.5 * e
    }

    fn sampled_gram_floor(&self) -> (f64, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ 0x9E3779B97F4A7C15);
        let m = self.basis.m();
        let mut min_q = f64::INFINITY;
        for _ in 0..6 {
            let c: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = self.modal_energy(&c);
            if e <= 0.0 {
                continue;
            }
            let lc = self.gramian_apply(&c);
            let q: f64 = lc.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / (2.0 * e);
            min_q = min_q.min(q);
        }
        (min_q, min_q > self.opts.gram_floor)
    }

    fn state_norms(&self, v: &[f64], vt: &[f64], s_factor: &SkylineFactor<f64>) -> StateNorms {
        let l2 = self.ops.m.quadratic_form(v).max(0.0).sqrt();
        let r = self.ops.m.matvec_alloc(vt);
        let sr = s_factor.solve(&r);
        let dual = r.iter().zip(&sr).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        let energy =
            0.5 * (self.ops.m.quadratic_form(vt) + self.stepper.s.quadratic_form(v));
        StateNorms { l2, dual, energy }
    }

    /// Forward controlled run from the target data with the computed
    /// control; `g` empty runs the homogeneous (uncontrolled) system.
    fn forward_run(&self, g: Option<&[Vec<f64>]>) -> (Vec<f64>, Vec<f64>) {
        let n = self.ops.n_dofs();
        let mut v = self.u0.clone();
        let mut p = self.u1.clone();
        let mut lift = vec![0.0; n];
        for step in 0..self.n_steps {
            let load = g.map(|g| {
                lift_control(self.ops, &self.gamma_w, &g[step], &mut lift);
                self.basis.project_load(&self.ops.m, &lift)
            });
            self.stepper.step(&mut v, &mut p, load.as_deref());
        }
        (v, p)
    }

    pub fn solve(&self) -> Result<HumResult> {
        let m = self.basis.m();
        let (gram_min_quotient, observable) = self.sampled_gram_floor();
        if !observable {
            return Err(Error::Hum(format!(
                "filtered subspace unobservable: sampled Gramian quotient {gram_min_quotient:.3e} <= floor {:.1e} at (h, dt, rho, T) = ({}, {}, {}, {})",
                self.opts.gram_floor,
                self.ops.h(),
                self.dt,
                self.opts.rho,
                self.t_final
            )));
        }
        // rhs pairing: ⟨Λ(ṽ), (c0, c1)⟩ = u1ᵀMΦc0 − u0ᵀMΦc1
        let mut rhs = self.basis.analyze_dual(&self.ops.m.matvec_alloc(&self.u1));
        rhs.extend(
            self.basis
                .analyze_dual(&self.ops.m.matvec_alloc(&self.u0))
                .into_iter()
                .map(|x| -x),
        );
        let out = cg_solve(
            |c, y| {
                let r = self.gramian_apply(c);
                y.copy_from_slice(&r);
            },
            &rhs,
            self.opts.cg_tol,
            self.opts.cg_max_iter,
            None,
        );
        if !out.converged && out.rel_residual > self.opts.cg_tol {
            return Err(Error::Hum(format!(
                "HUM conjugate gradient stalled at relative residual {:.3e} after {} iterations; smallest sampled Gramian quotient {gram_min_quotient:.3e}",
                out.rel_residual, out.iterations
            )));
        }
        let c = out.x;
        let g = self.adjoint_midpoint_fluxes(&c[..m], &c[m..]);

        // Verification: uncontrolled vs controlled final data.
        let s_factor = SkylineFactor::factor_spd(&self.stepper.s)?;
        let (vu, pu) = self.forward_run(None);
        let uncontrolled_norms = self.state_norms(&vu, &pu, &s_factor);
        let (vc, pc) = self.forward_run(Some(&g));
        let final_norms = self.state_norms(&vc, &pc, &s_factor);

        let gamma0_facets: Vec<usize> = self
            .ops
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.classification.gamma0)
            .map(|(i, _)| i)
            .collect();
        let times: Vec<f64> = (0..self.n_steps).map(|i| (i as f64 + 0.5) * self.dt).collect();
        Ok(HumResult {
            minimizer_v0: self.basis.synthesize(&c[..m]),
            minimizer_v1: self.basis.synthesize(&c[m..]),
            control: ControlTrace { times, gamma0_facets, values: g },
            cg_history: out.history,
            iterations: out.iterations,
            cg_residual: out.rel_residual,
            gram_min_quotient,
            final_norms,
            uncontrolled_norms,
            modes: m,
        })
    }
}

/// Deterministic unit-scale random pair for the Gramian batteries.
pub fn seeded_unit_pair(len: usize, seed: u64, index: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9)));
    let a = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (a, b)
}

#[derive(Clone, Debug)]
pub struct ScanRow {
    pub t: f64,
    pub min_quotient: f64,
}

/// Minimal sampled observability quotient
/// ∫₀ᵀ∫_{Γ₀}(x·ν)(∂v/∂ν)² dσ dt / E(0) per horizon T, over `sample_count`
/// random filtered data normalized to E(0) = 1. One trajectory per sample
/// serves all horizons, so rows are non-decreasing in T by construction.
pub fn observability_scan(
    ops: &OperatorSet,
    lambda: f64,
    t_list: &[f64],
    dt: f64,
    sample_count: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    if t_list.is_empty() {
        return Err(Error::InvalidArgument("empty T list".into()));
    }
    let t_max = t_list.iter().cloned().fold(0.0, f64::max);
    let steps: Vec<usize> = t_list
        .iter()
        .map(|&t| {
            let k = (t / dt).round() as usize;
            if ((k as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
                Err(Error::InvalidArgument(format!("T = {t} not a multiple of dt = {dt}")))
            } else {
                Ok(k)
            }
        })
        .collect::<Result<_>>()?;
    let n_steps = (t_max / dt).round() as usize;
    let m = filter_size(rho, ops.n_dofs())?;
    let basis = modal_basis(ops, lambda, m)?;
    let stepper = WaveStepper::new(ops, lambda, dt)?;
    let gamma_w = ops.gamma0_xdotnu_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut minima = vec![f64::INFINITY; t_list.len()];
    for _ in 0..sample_count {
        let mut c: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut e0 = 0.0;
        for k in 0..m {
            e0 += basis.eigenvalues[k] * c[k] * c[k] + c[m + k] * c[m + k];
        }
        e0 *= 0.5;
        let scale = 1.0 / e0.sqrt();
        for x in c.iter_mut() {
            *x *= scale;
        }
        let mut v = basis.synthesize(&c[..m]);
        let mut p = basis.synthesize(&c[m..]);
        // integrand at step times over Γ₀
        let eval = |v: &[f64]| -> f64 {
            let flux = ops.boundary_flux(v);
            let mut s = 0.0;
            for (fi, &fx) in flux.iter().enumerate() {
                s += gamma_w[fi] * fx * fx;
            }
            s
        };
        let mut series = Vec::with_capacity(n_steps + 1);
        series.push(eval(&v));
        for _ in 0..n_steps {
            stepper.step(&mut v, &mut p, None);
            series.push(eval(&v));
        }
        let mut running = vec![0.0; n_steps + 1];
        for i in 1..=n_steps {
            running[i] = running[i - 1] + 0.5 * dt * (series[i - 1] + series[i]);
        }
        for (row, &k) in steps.iter().enumerate() {
            minima[row] = minima[row].min(running[k]);
        }
    }
    Ok(t_list.iter().zip(minima).map(|(&t, q)| ScanRow { t, min_quotient: q }).collect())
}

// ---------------------------------------------------------------------------
// Schrödinger control
// ---------------------------------------------------------------------------

/// Complex lift ℓ = −Fᵀ(∫(x·ν)·) g over Γ₀ facets.
fn lift_control_complex(
    ops: &OperatorSet,
    gamma_w: &[f64],
    g: &[Complex64],
    out: &mut [Complex64],
) {
    for o in out.iter_mut() {
        *o = Complex64::new(0.0, 0.0);
    }
    for (fi, facet) in ops.facets.iter().enumerate() {
        let w = g[fi] * gamma_w[fi];
        if w.norm_sqr() == 0.0 {
            continue;
        }
        for &(dof, c) in &facet.flux_row {
            out[dof] -= w * c;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchrodingerHumResult {
    pub minimizer: Vec<Complex64>,
    pub control_times: Vec<f64>,
    pub control_values: Vec<Vec<Complex64>>,
    pub gamma0_facets: Vec<usize>,
    pub cg_history: Vec<f64>,
    pub iterations: usize,
    pub cg_residual: f64,
    pub gram_min_quotient: f64,
    /// ‖u(T)‖_{L²} and dual surrogate, controlled vs uncontrolled
    pub final_l2: f64,
    pub final_dual: f64,
    pub uncontrolled_l2: f64,
    pub uncontrolled_dual: f64,
    pub modes: usize,
}

pub struct SchrodingerHum<'a> {
    pub ops: &'a OperatorSet,
    pub lambda: f64,
    pub t_final: f64,
    pub dt: f64,
    /// target initial state (driven to zero at T)
    pub u0: Vec<Complex64>,
    pub opts: HumOptions,
    pub basis: ModalBasis,
    stepper: SchrodingerStepper<'a>,
    n_steps: usize,
    gamma_w: Vec<f64>,
}

impl<'a> SchrodingerHum<'a> {
    pub fn new(
        ops: &'a OperatorSet,
        lambda: f64,
        t_final: f64,
        dt: f64,
        u0: Vec<Complex64>,
        opts: HumOptions,
    ) -> Result<Self> {
        // any T > 0 admissible for the Schrödinger flow
        if !(t_final > 0.0) {
            return Err(Error::InvalidArgument("T must be positive".into()));
        }
        let n_steps = (t_final / dt).round() as usize;
        if n_steps == 0 || ((n_steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidArgument("T must be an integer multiple of dt".into()));
        }
        let m = filter_size(opts.rho, ops.n_dofs())?;
        let basis = modal_basis(ops, lambda, m)?;
        let stepper = SchrodingerStepper::new(ops, lambda, dt)?;
        let gamma_w = ops.gamma0_xdotnu_weights();
        Ok(SchrodingerHum { ops, lambda, t_final, dt, u0, opts, basis, stepper, n_steps, gamma_w })
    }

    pub fn modes(&self) -> usize {
        self.basis.m()
    }

    fn synthesize(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = self.ops.n_dofs();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (ck, v) in c.iter().zip(&self.basis.vectors) {
            for i in 0..n {
                out[i] += ck * v[i];
            }
        }
        out
    }

    fn analyze_dual(&self, r: &[Complex64]) -> Vec<Complex64> {
        self.basis
            .vectors
            .iter()
            .map(|v| v.iter().zip(r).map(|(&a, &b)| b * a).sum())
            .collect()
    }

    fn project_load(&self, l: &[Complex64]) -> Vec<Complex64> {
        let coeffs = self.analyze_dual(l);
        let synth = self.synthesize(&coeffs);
        let mut out = vec![Complex64::new(0.0, 0.0); synth.len()];
        self.ops.m.matvec_complex(&synth, &mut out);
        out
    }

    /// Forward homogeneous conjugate flow (i M ż = −S z) from modal data;
    /// returns the control g = i·(flux of z midpoint) per step per facet.
    fn adjoint_midpoint_controls(&self, c: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut z = self.synthesize(c);
        let mut z_prev = z.clone();
        let mut out = Vec::with_capacity(self.n_steps);
        for _ in 0..self.n_steps {
            self.stepper.step_conj_flow(&mut z, None);
            let z_mid: Vec<Complex64> =
                z_prev.iter().zip(&z).map(|(a, b)| (a + b) * 0.5).collect();
            let flux = crate::evolution::complex_boundary_flux(self.ops, &z_mid);
            out.push(flux.into_iter().map(|f| f * Complex64::new(0.0, 1.0)).collect());
            z_prev.copy_from_slice(&z);
        }
        out
    }

    fn backward_controlled(&self, g: &[Vec<Complex64>]) -> Vec<Complex64> {
        let n = self.ops.n_dofs();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        let mut lift = vec![Complex64::new(0.0, 0.0); n];
        for step in (0..self.n_steps).rev() {
            lift_control_complex(self.ops, &self.gamma_w, &g[step], &mut lift);
            let proj = self.project_load(&lift);
            self.stepper.step_conj_flow_back(&mut w, Some(&proj));
        }
        w
    }

    /// Hermitian Gramian application in modal coefficients.
    pub fn gramian_apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        let g = self.adjoint_midpoint_controls(c);
        let w0 = self.backward_controlled(&g);
        let mut mw = vec![Complex64::new(0.0, 0.0); w0.len()];
        self.ops.m.matvec_complex(&w0, &mut mw);
        self.analyze_dual(&mw)
    }

    pub fn modal_energy(&self, c: &[Complex64]) -> f64 {
        c.iter()
            .zip(&self.basis.eigenvalues)
            .map(|(ck, &th)| th * ck.norm_sqr())
            .sum()
    }

    pub fn solve(&self) -> Result<SchrodingerHumResult> {
        let m = self.basis.m();
        // sampled observability floor
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ 0xA5A5_5A5A);
        let mut gram_min = f64::INFINITY;
        for _ in 0..6 {
            let c: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let e = self.modal_energy(&c);
            if e <= 0.0 {
                continue;
            }
            let lc = self.gramian_apply(&c);
            let q: f64 =
                lc.iter().zip(&c).map(|(a, b)| (b.conj() * a).re).sum::<f64>() / e;
            gram_min = gram_min.min(q);
        }
        if gram_min <= self.opts.gram_floor {
            return Err(Error::Hum(format!(
                "filtered subspace unobservable: sampled quotient {gram_min:.3e} below floor"
            )));
        }
        // G c = ΦᵀM u0
        let mut mu0 = vec![Complex64::new(0.0, 0.0); self.u0.len()];
        self.ops.m.matvec_complex(&self.u0, &mut mu0);
        let rhs = self.analyze_dual(&mu0);
        let out = cg_solve_complex(
            |c, y| {
                let r = self.gramian_apply(c);
                y.copy_from_slice(&r);
            },
            &rhs,
            self.opts.cg_tol,
            self.opts.cg_max_iter,
        );
        if !out.converged && out.rel_residual > self.opts.cg_tol {
            return Err(Error::Hum(format!(
                "Schrödinger HUM CG stalled at {:.3e} after {} iterations",
                out.rel_residual, out.iterations
            )));
        }
        let c = out.x;
        let g = self.adjoint_midpoint_controls(&c);

        // verification: forward controlled run of i M u̇ = −S u + ℓ
        let s_factor = SkylineFactor::factor_spd(&self.stepper.s)?;
        let norms = |u: &[Complex64]| -> (f64, f64) {
            let l2 = self.ops.m.sesquilinear(u, u).re.max(0.0).sqrt();
            let mut r = vec![Complex64::new(0.0, 0.0); u.len()];
            self.ops.m.matvec_complex(u, &mut r);
            let re: Vec<f64> = r.iter().map(|z| z.re).collect();
            let im: Vec<f64> = r.iter().map(|z| z.im).collect();
            let sre = s_factor.solve(&re);
            let sim = s_factor.solve(&im);
            let dual = (re.iter().zip(&sre).map(|(a, b)| a * b).sum::<f64>()
                + im.iter().zip(&sim).map(|(a, b)| a * b).sum::<f64>())
            .max(0.0)
            .sqrt();
            (l2, dual)
        };
        let mut u = self.u0.clone();
        for _ in 0..self.n_steps {
            self.stepper.step_conj_flow(&mut u, None);
        }
        let (u_l2, u_dual) = norms(&u);
        let mut uc = self.u0.clone();
        let mut lift = vec![Complex64::new(0.0, 0.0); uc.len()];
        for step in 0..self.n_steps {
            lift_control_complex(self.ops, &self.gamma_w, &g[step], &mut lift);
            let proj = self.project_load(&lift);
            self.stepper.step_conj_flow(&mut uc, Some(&proj));
        }
        let (c_l2, c_dual) = norms(&uc);

        let gamma0_facets: Vec<usize> = self
            .ops
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.classification.gamma0)
            .map(|(i, _)| i)
            .collect();
        Ok(SchrodingerHumResult {
            minimizer: self.synthesize(&c),
            control_times: (0..self.n_steps).map(|i| (i as f64 + 0.5) * self.dt).collect(),
            control_values: g,
            gamma0_facets,
            cg_history: out.history,
            iterations: out.iterations,
            cg_residual: out.rel_residual,
            gram_min_quotient: gram_min,
            final_l2: c_l2,
            final_dual: c_dual,
            uncontrolled_l2: u_l2,
            uncontrolled_dual: u_dual,
            modes: m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_domain, generate_mesh, DomainKind, MeshOptions};
    use crate::operator::AssemblyOptions;
    use std::sync::Arc;

    fn disk_ops(h: f64) -> OperatorSet {
        let d = build_domain(DomainKind::TangentDisk { radius: 1.0 }).unwrap();
        let m = generate_mesh(&d, h, &MeshOptions::default()).unwrap();
        OperatorSet::assemble(Arc::new(m), AssemblyOptions::default()).unwrap()
    }

    fn interval_ops(h: f64) -> OperatorSet {
        let d = build_domain(DomainKind::Interval { length: 1.0 }).unwrap();
        let m = generate_mesh(&d, h, &MeshOptions::default()).unwrap();
        OperatorSet::assemble(Arc::new(m), AssemblyOptions::default()).unwrap()
    }

    fn wave_hum(ops: &OperatorSet) -> WaveHum<'_> {
        let n = ops.n_dofs();
        WaveHum::new(
            ops,
            0.9,
            4.5,
            0.15,
            vec![0.0; n],
            vec![0.0; n],
            HumOptions { rho: 0.25, ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn gramian_zero_maps_to_zero() {
        let ops = disk_ops(0.18);
        let hum = wave_hum(&ops);
        let m = hum.modes();
        let out = hum.gramian_apply(&vec![0.0; 2 * m]);
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gramian_symmetric_positive_and_matches_observation() {
        let ops = disk_ops(0.18);
        let hum = wave_hum(&ops);
        let m = hum.modes();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..4 {
            let a: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let la = hum.gramian_apply(&a);
            let lb = hum.gramian_apply(&b);
            let ab: f64 = la.iter().zip(&b).map(|(x, y)| x * y).sum();
            let ba: f64 = lb.iter().zip(&a).map(|(x, y)| x * y).sum();
            let scale = ab.abs().max(ba.abs()).max(1e-300);
            assert!((ab - ba).abs() / scale < 1e-8, "symmetry {ab} vs {ba}");
            let aa: f64 = la.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!(aa >= 0.0, "positivity {aa}");
            // duality identity: ⟨Λa, a⟩ equals the Γ₀ observation integral
            let obs = hum.observation_integral(&a);
            assert!((aa - obs).abs() / obs.max(1e-300) < 0.05, "{aa} vs {obs}");
        }
    }

    #[test]
    fn wave_control_kills_first_mode() {
        let ops = disk_ops(0.18);
        let base = wave_hum(&ops);
        // target = first filtered mode as displacement, zero velocity
        let u0 = base.basis.vectors[0].clone();
        let n = ops.n_dofs();
        let hum = WaveHum::new(
            &ops,
            0.9,
            4.5,
            0.15,
            u0,
            vec![0.0; n],
            HumOptions { rho: 0.25, cg_tol: 1e-8, ..Default::default() },
        )
        .unwrap();
        let res = hum.solve().unwrap();
        assert!(res.cg_residual <= 1e-8);
        assert!(
            res.final_norms.energy <= 1e-4 * res.uncontrolled_norms.energy,
            "energy reduction {} vs {}",
            res.final_norms.energy,
            res.uncontrolled_norms.energy
        );
        // control supported on Γ₀ only (whole boundary for the disk)
        assert_eq!(res.control.gamma0_facets.len(), ops.facets.len());
    }

    #[test]
    fn hum_zero_target_zero_control() {
        let ops = disk_ops(0.18);
        let hum = wave_hum(&ops);
        let res = hum.solve().unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.control.values.iter().all(|step| step.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn hum_map_is_linear() {
        let ops = disk_ops(0.18);
        let base = wave_hum(&ops);
        let u0 = base.basis.vectors[1].clone();
        let n = ops.n_dofs();
        let mk = |scale: f64| {
            let u0s: Vec<f64> = u0.iter().map(|x| scale * x).collect();
            WaveHum::new(
                &ops,
                0.9,
                4.5,
                0.15,
                u0s,
                vec![0.0; n],
                HumOptions { rho: 0.25, cg_tol: 1e-10, ..Default::default() },
            )
            .unwrap()
            .solve()
            .unwrap()
        };
        let r1 = mk(1.0);
        let r2 = mk(2.0);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in r1.control.values.iter().flatten().zip(r2.control.values.iter().flatten()) {
            worst = worst.max((2.0 * a - b).abs());
            scale = scale.max(b.abs());
        }
        assert!(worst <= 1e-8 * scale.max(1e-300), "linearity defect {worst} at scale {scale}");
    }

    #[test]
    fn short_time_rejected_without_override() {
        let ops = disk_ops(0.18);
        let n = ops.n_dofs();
        let err = WaveHum::new(&ops, 0.9, 3.0, 0.15, vec![0.0; n], vec![0.0; n], HumOptions::default());
        assert!(err.is_err());
        let ok = WaveHum::new(
            &ops,
            0.9,
            3.0,
            0.15,
            vec![0.0; n],
            vec![0.0; n],
            HumOptions { allow_short_time: true, ..Default::default() },
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn scan_monotone_and_positive_beyond_threshold() {
        let ops = interval_ops(0.02);
        let rows = observability_scan(&ops, 0.25, &[1.0, 2.5, 5.0], 0.025, 16, 0.3, 7).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].min_quotient >= w[0].min_quotient, "{rows:?}");
        }
        // T = 2.5 > 2R_Ω = 2: strictly positive
        assert!(rows[1].min_quotient > 1e-10, "{rows:?}");
    }

    #[test]
    fn schrodinger_gramian_hermitian_and_control_reduces_norm() {
        let ops = interval_ops(0.02);
        let hum = SchrodingerHum::new(
            &ops,
            0.2,
            0.5,
            0.0125,
            vec![Complex64::new(0.0, 0.0); ops.n_dofs()],
            HumOptions { rho: 0.3, ..Default::default() },
        )
        .unwrap();
        let m = hum.modes();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let a: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let b: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let la = hum.gramian_apply(&a);
            let lb = hum.gramian_apply(&b);
            let ab: Complex64 = b.iter().zip(&la).map(|(x, y)| x.conj() * y).sum();
            let ba: Complex64 = a.iter().zip(&lb).map(|(x, y)| x.conj() * y).sum();
            let scale = ab.norm().max(ba.norm()).max(1e-300);
            assert!((ab - ba.conj()).norm() / scale < 1e-8, "hermitian: {ab} vs {ba}");
            let aa: Complex64 = a.iter().zip(&la).map(|(x, y)| x.conj() * y).sum();
            assert!(aa.re >= 0.0 && aa.im.abs() <= 1e-10 * aa.re.max(1e-300));
        }
        // control run on the first mode
        let u0: Vec<Complex64> =
            hum.basis.vectors[0].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let hum2 = SchrodingerHum::new(
            &ops,
            0.2,
            0.5,
            0.0125,
            u0,
            HumOptions { rho: 0.3, ..Default::default() },
        )
        .unwrap();
        let res = hum2.solve().unwrap();
        assert!(
            res.final_l2 <= 1e-4 * res.uncontrolled_l2,
            "reduction {} vs {}",
            res.final_l2,
            res.uncontrolled_l2
        );
    }
}
