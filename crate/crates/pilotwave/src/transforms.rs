//! Log-density phase transformations and their residual identities.
//!
//! The forward transform `S' = S + (k/2) log rho` trades the deterministic
//! guidance picture for a drift-diffusion one: continuity becomes a
//! Fokker-Planck equation with diffusion `+k/2m`, and the phase equation picks
//! up `+(hbar/2m) lap S'` and a doubled quantum potential. The retro transform
//! `S' = S - (k/2) log rho` mirrors every sign. Averaging the two pictures
//! cancels the added terms exactly (linear stencils), which is the discrete
//! version of recovering the deterministic equations from two
//! counter-propagating diffusions.
//!
//! The same two transforms applied to a *classical* pair `(S, rho)` produce
//! quantum-like equations with a single quantum potential; the four cases
//! differ in which side of the pair carries the diffusion:
//!
//! | case | input flow        | transform | target phase eq   | target flow eq    |
//! |------|-------------------|-----------|-------------------|-------------------|
//! | 1    | retro diffusion   | + k/2 log | retro, single Q   | continuity        |
//! | 2    | forward diffusion | - k/2 log | forward, single Q | continuity        |
//! | 3    | continuity        | + k/2 log | retro, single Q   | forward diffusion |
//! | 4    | continuity        | - k/2 log | forward, single Q | retro diffusion   |

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::Constants;
use crate::lattice::{divergence, gradient, laplacian, Grid, Mask, ScalarField, VectorField};
use crate::madelung::{
    density_flux, log_masked, quantum_potential, window_mask, PhaseDensitySnapshot, QForm,
    ResidualReport, EDGE_BAND,
};

/// Guard band for residuals built from quantum-force gradients: the stencil
/// nesting grad(div(grad(.)))/sqrt(.) reaches three sites, and near a mask or
/// grid edge the one-sided/central error jump would be amplified by 1/h in
/// the outer gradient.
pub const ACCEL_BAND: usize = 4;

/// Direction of the phase transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDirection {
    /// `S' = S + (k/2) log rho`
    Forward,
    /// `S' = S - (k/2) log rho`
    Retro,
}

impl TransformDirection {
    pub fn sign(self) -> f64 {
        match self {
            TransformDirection::Forward => 1.0,
            TransformDirection::Retro => -1.0,
        }
    }

    /// The stochastic material derivative paired with this transform: the
    /// forward transform makes the phase equation retrocausal and vice versa.
    pub fn paired_derivative(self) -> DerivativeKind {
        match self {
            TransformDirection::Forward => DerivativeKind::Retrocausal,
            TransformDirection::Retro => DerivativeKind::ForwardCausal,
        }
    }
}

/// Which phase transformation to apply and with what diffusion constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransformSpec {
    pub direction: TransformDirection,
    /// Diffusion constant, units of action; must be positive.
    pub k: f64,
}

impl TransformSpec {
    pub fn forward(k: f64) -> Self {
        TransformSpec {
            direction: TransformDirection::Forward,
            k,
        }
    }

    pub fn retro(k: f64) -> Self {
        TransformSpec {
            direction: TransformDirection::Retro,
            k,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::Transform(format!(
                "diffusion constant must be positive, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Stochastic material derivative kinds: the sign of the `(k/2m) lap` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    /// `d/dt + v . grad + (k/2m) lap`
    Retrocausal,
    /// `d/dt + v . grad - (k/2m) lap`
    ForwardCausal,
}

impl DerivativeKind {
    pub fn laplacian_sign(self) -> f64 {
        match self {
            DerivativeKind::Retrocausal => 1.0,
            DerivativeKind::ForwardCausal => -1.0,
        }
    }
}

/// `S +- (k/2) log rho` per the requested direction; masked-out sites carry 0.
pub fn transform_phase(
    s: &ScalarField,
    rho: &ScalarField,
    mask: &Mask,
    spec: TransformSpec,
) -> Result<ScalarField> {
    spec.validate()?;
    for idx in 0..rho.grid().len() {
        if mask.is_on(idx) && rho.get(idx) <= 0.0 {
            return Err(Error::Transform(format!(
                "density is non-positive at masked-in site {idx}"
            )));
        }
    }
    let log_rho = log_masked(rho, mask);
    let half_k = 0.5 * spec.k * spec.direction.sign();
    let mut out = s.zip_with(&log_rho, |sv, lv| sv + half_k * lv);
    for (v, &m) in out.values_mut().iter_mut().zip(mask.values()) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// A snapshot carried into the transformed picture.
#[derive(Clone, Debug)]
pub struct TransformedSnapshot {
    pub time: f64,
    pub rho: ScalarField,
    pub s_prime: ScalarField,
    /// `grad S' = grad S + (k/2) grad log rho`, built from the single-valued
    /// momentum field so no branch cut enters.
    pub grad_s_prime: VectorField,
}

/// A transformed snapshot window with its combined support mask.
#[derive(Clone, Debug)]
pub struct TransformedWindow {
    pub spec: TransformSpec,
    pub snaps: Vec<TransformedSnapshot>,
    pub mask: Mask,
}

/// Transform every snapshot of a window.
pub fn transform_window(
    window: &[PhaseDensitySnapshot],
    spec: TransformSpec,
) -> Result<TransformedWindow> {
    spec.validate()?;
    let mask = window_mask(window);
    let snaps = window
        .iter()
        .map(|snap| {
            let s_prime = transform_phase(&snap.phase, &snap.rho, &mask, spec)?;
            let log_rho = log_masked(&snap.rho, &mask);
            let grad_log = gradient(&log_rho);
            let grad_s_prime = snap
                .phase_gradient()
                .add(&grad_log.scale(0.5 * spec.k * spec.direction.sign()));
            Ok(TransformedSnapshot {
                time: snap.time,
                rho: snap.rho.clone(),
                s_prime,
                grad_s_prime,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformedWindow { spec, snaps, mask })
}

fn centered_dt(snaps: &[TransformedSnapshot]) -> f64 {
    snaps[2].time - snaps[0].time
}

fn zero_masked_out(field: &mut ScalarField, mask: &Mask) {
    for (v, &m) in field.values_mut().iter_mut().zip(mask.values()) {
        if !m {
            *v = 0.0;
        }
    }
}

/// Residual of the transformed phase equation
/// `dS'/dt + |grad S'|^2 / 2m +- (hbar/2m) lap S' + V + 2Q = 0`
/// (`+` for the forward transform, `-` for retro). `2Q` uses the third
/// quantum-potential form, the combination the transformation algebra lands
/// on. Mean-corrected like the untransformed phase residual.
pub fn transformed_hj_residual(
    window: &TransformedWindow,
    potential: &ScalarField,
    constants: Constants,
) -> Result<ResidualReport> {
    assert_eq!(window.snaps.len(), 3, "need (t - dt, t, t + dt) snapshots");
    let mask = &window.mask;
    let snaps = &window.snaps;
    let m0 = mask.masked_mean(&snaps[0].s_prime);
    let m2 = mask.masked_mean(&snaps[2].s_prime);
    let denom = centered_dt(snaps);
    let ds_dt = snaps[2]
        .s_prime
        .map(|v| v - m2)
        .zip_with(&snaps[0].s_prime.map(|v| v - m0), |a, b| (a - b) / denom);
    let kinetic = snaps[1]
        .grad_s_prime
        .magnitude_sqr()
        .scale(0.5 / constants.mass);
    let lap_sp = divergence(&snaps[1].grad_s_prime);
    let coef = window.spec.direction.sign() * 0.5 * constants.hbar / constants.mass;
    let q = quantum_potential(&snaps[1].rho, QForm::Third, mask, constants)?;
    let mut r = ds_dt
        .add(&kinetic)
        .add(&lap_sp.scale(coef))
        .add(potential)
        .add(&q.scale(2.0));
    let mean = mask.interior(EDGE_BAND).masked_mean(&r);
    r = r.map(|v| v - mean);
    zero_masked_out(&mut r, mask);
    Ok(ResidualReport::new("transformed_hj", r, mask))
}

/// Residual of the drift-diffusion (Fokker-Planck) equation
/// `drho/dt + div(rho grad S' / m) -+ (k/2m) lap rho = 0`
/// (`-` for the forward transform, `+` for retro).
pub fn fokker_planck_residual(
    window: &TransformedWindow,
    constants: Constants,
) -> Result<ResidualReport> {
    assert_eq!(window.snaps.len(), 3, "need (t - dt, t, t + dt) snapshots");
    let mask = &window.mask;
    let snaps = &window.snaps;
    let denom = centered_dt(snaps);
    let drho_dt = snaps[2].rho.zip_with(&snaps[0].rho, |a, b| (a - b) / denom);
    let flux = density_flux(&snaps[1].rho, &snaps[1].grad_s_prime, constants.mass);
    let diff = laplacian(&snaps[1].rho)
        .scale(-window.spec.direction.sign() * 0.5 * window.spec.k / constants.mass);
    let mut r = drho_dt.add(&divergence(&flux)).add(&diff);
    zero_masked_out(&mut r, mask);
    Ok(ResidualReport::new("fokker_planck", r, mask))
}

/// Residual of the transformed acceleration equation, componentwise:
/// `[d/dt + (grad S'/m) . grad +- (k/2m) lap] grad S' + grad V + mult grad Q`,
/// reported as the sitewise vector magnitude. The laplacian-term sign follows
/// the paired derivative of the transform; `q_multiplier` is 2 for the
/// transformed quantum equation and 1 for the artificially halved variant.
pub fn acceleration_residual(
    window: &TransformedWindow,
    potential: &ScalarField,
    constants: Constants,
    q_multiplier: f64,
    q_form: QForm,
    name: &str,
) -> Result<ResidualReport> {
    assert_eq!(window.snaps.len(), 3, "need (t - dt, t, t + dt) snapshots");
    let mask = &window.mask;
    let snaps = &window.snaps;
    let grid = snaps[1].rho.grid().clone();
    let denom = centered_dt(snaps);
    let lap_sign = window.spec.direction.paired_derivative().laplacian_sign();
    let q = quantum_potential(&snaps[1].rho, q_form, mask, constants)?;
    let grad_q = gradient(&q);
    let grad_v = gradient(potential);
    let mid = &snaps[1].grad_s_prime;
    let mut mag = vec![0.0; grid.len()];
    for axis in 0..grid.ndim() {
        let comp = ScalarField::from_values(&grid, mid.component(axis).to_vec());
        let ddt: Vec<f64> = snaps[2]
            .grad_s_prime
            .component(axis)
            .iter()
            .zip(snaps[0].grad_s_prime.component(axis))
            .map(|(&a, &b)| (a - b) / denom)
            .collect();
        let grad_comp = gradient(&comp);
        let lap_comp = laplacian(&comp);
        for idx in 0..grid.len() {
            let mut advect = 0.0;
            for b in 0..grid.ndim() {
                advect += mid.component(b)[idx] / constants.mass * grad_comp.component(b)[idx];
            }
            let val = ddt[idx]
                + advect
                + lap_sign * 0.5 * window.spec.k / constants.mass * lap_comp.get(idx)
                + grad_v.component(axis)[idx]
                + q_multiplier * grad_q.component(axis)[idx];
            mag[idx] += val * val;
        }
    }
    let mut r = ScalarField::from_values(&grid, mag.into_iter().map(f64::sqrt).collect());
    zero_masked_out(&mut r, mask);
    Ok(ResidualReport::with_band(name, r, mask, ACCEL_BAND))
}

/// `(S'_forward + S'_retro) / 2`; the log-density halves cancel, recovering S.
pub fn nelson_average(
    forward: &TransformedWindow,
    retro: &TransformedWindow,
) -> Result<ScalarField> {
    if forward.spec.direction != TransformDirection::Forward
        || retro.spec.direction != TransformDirection::Retro
    {
        return Err(Error::Transform(
            "nelson averaging needs one forward and one retro window".into(),
        ));
    }
    if forward.spec.k != retro.spec.k {
        return Err(Error::Transform(format!(
            "mismatched diffusion constants: {} vs {}",
            forward.spec.k, retro.spec.k
        )));
    }
    Ok(forward.snaps[1]
        .s_prime
        .zip_with(&retro.snaps[1].s_prime, |a, b| 0.5 * (a + b)))
}

/// Averaged residuals of the two counter-propagating pictures plus the Bohm
/// acceleration field `-(grad Q + grad V)/m`.
#[derive(Clone, Debug)]
pub struct NelsonReport {
    /// Mean of the forward and retro Fokker-Planck residuals; equals the
    /// deterministic continuity residual at stencil precision.
    pub averaged_fp: ResidualReport,
    /// Mean of the forward and retro transformed phase residuals; recovers
    /// the untransformed phase-equation residual up to the quantum-potential
    /// form identity.
    pub averaged_hj: ResidualReport,
    /// `-(grad Q + grad V)/m`.
    pub acceleration: VectorField,
    /// Interior-masked max |acceleration|.
    pub acceleration_max_abs: f64,
}

pub fn nelson_residuals(
    forward: &TransformedWindow,
    retro: &TransformedWindow,
    potential: &ScalarField,
    constants: Constants,
) -> Result<NelsonReport> {
    nelson_average(forward, retro)?; // validates pairing
    let fp_f = fokker_planck_residual(forward, constants)?;
    let fp_r = fokker_planck_residual(retro, constants)?;
    let hj_f = transformed_hj_residual(forward, potential, constants)?;
    let hj_r = transformed_hj_residual(retro, potential, constants)?;
    let mask = &forward.mask;
    let averaged_fp = ResidualReport::new(
        "nelson_fp",
        fp_f.residual.add(&fp_r.residual).scale(0.5),
        mask,
    );
    let averaged_hj = ResidualReport::new(
        "nelson_hj",
        hj_f.residual.add(&hj_r.residual).scale(0.5),
        mask,
    );
    let q = quantum_potential(&forward.snaps[1].rho, QForm::Sqrt, mask, constants)?;
    let accel = gradient(&q.add(potential)).scale(-1.0 / constants.mass);
    let interior = mask.interior(ACCEL_BAND);
    let mag = accel.magnitude_sqr().map(f64::sqrt);
    let acceleration_max_abs = interior.masked_max_abs(&mag);
    Ok(NelsonReport {
        averaged_fp,
        averaged_hj,
        acceleration: accel,
        acceleration_max_abs,
    })
}

/// Analytic classical `(S, rho)` solution families for the transformation
/// checks. All satisfy the classical phase equation exactly; the flow side is
/// deterministic or diffusive per `FlowDiffusion`.
#[derive(Clone, Copy, Debug)]
pub enum ClassicalFamily {
    /// `S = p x - p^2 t / 2m` with a Gaussian density advected at `p/m`.
    /// With diffusion the width obeys `sigma^2(t) = sigma0^2 +- (k/m) t`.
    UniformFlow {
        momentum: f64,
        sigma0: f64,
        center0: f64,
        diffusion: FlowDiffusion,
    },
    /// Harmonic flow `V = m omega^2 x^2 / 2` built from the classical action:
    /// velocity `a(t) + b(t) x` with `b = -omega tan(omega t)`,
    /// `a = a0 / cos(omega t)`; the Gaussian width breathes as
    /// `sigma0 cos(omega t)` and the center follows the classical trajectory.
    /// Valid for `|omega t| < pi/2`.
    HarmonicFlow {
        omega: f64,
        a0: f64,
        x0: f64,
        sigma0: f64,
    },
}

/// Diffusion attached to the classical flow side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowDiffusion {
    None,
    Forward(f64),
    Retro(f64),
}

impl ClassicalFamily {
    /// Sample the pair at time `t`.
    pub fn snapshot(&self, grid: &Grid, t: f64, constants: Constants) -> PhaseDensitySnapshot {
        let m = constants.mass;
        match *self {
            ClassicalFamily::UniformFlow {
                momentum: p,
                sigma0,
                center0,
                diffusion,
            } => {
                let sigma2 = match diffusion {
                    FlowDiffusion::None => sigma0 * sigma0,
                    FlowDiffusion::Forward(k) => sigma0 * sigma0 + k / m * t,
                    FlowDiffusion::Retro(k) => sigma0 * sigma0 - k / m * t,
                };
                assert!(
                    sigma2 > 0.0,
                    "diffusive width collapsed; shrink the horizon"
                );
                let center = center0 + p / m * t;
                let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt();
                let rho = ScalarField::from_fn(grid, |x, _| {
                    norm * (-(x - center) * (x - center) / (2.0 * sigma2)).exp()
                });
                let phase = ScalarField::from_fn(grid, |x, _| p * x - 0.5 * p * p / m * t);
                PhaseDensitySnapshot::new(t, rho, phase)
            }
            ClassicalFamily::HarmonicFlow {
                omega,
                a0,
                x0,
                sigma0,
            } => {
                assert!(
                    (omega * t).abs() < 0.5 * std::f64::consts::PI,
                    "harmonic flow leaves its validity window"
                );
                let (sin, cos) = (omega * t).sin_cos();
                let b = -omega * sin / cos;
                let a = a0 / cos;
                let offset = -0.5 * m * a0 * a0 * sin / (cos * omega);
                let center = x0 * cos + a0 / omega * sin;
                let sigma = sigma0 * cos;
                let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
                let rho = ScalarField::from_fn(grid, |x, _| {
                    norm * (-(x - center) * (x - center) / (2.0 * sigma * sigma)).exp()
                });
                let phase =
                    ScalarField::from_fn(grid, |x, _| m * (a * x + 0.5 * b * x * x) + offset);
                PhaseDensitySnapshot::new(t, rho, phase)
            }
        }
    }

    /// Three-snapshot window centered at `t`.
    pub fn window(
        &self,
        grid: &Grid,
        t: f64,
        dt: f64,
        constants: Constants,
    ) -> Vec<PhaseDensitySnapshot> {
        [-dt, 0.0, dt]
            .iter()
            .map(|&off| self.snapshot(grid, t + off, constants))
            .collect()
    }

    /// The external potential this family solves against.
    pub fn potential_field(&self, grid: &Grid, constants: Constants) -> ScalarField {
        match *self {
            ClassicalFamily::UniformFlow { .. } => ScalarField::zeros(grid),
            ClassicalFamily::HarmonicFlow { omega, .. } => {
                ScalarField::from_fn(grid, |x, _| 0.5 * constants.mass * omega * omega * x * x)
            }
        }
    }
}

/// Output of one classical transformation case.
#[derive(Clone, Debug)]
pub struct ClassicalTransformOutput {
    pub case: u8,
    pub transformed_phase: ScalarField,
    /// Residual of the target quantum-like phase equation (single Q).
    pub hj_report: ResidualReport,
    /// Residual of the target flow equation (continuity or diffusion).
    pub flow_report: ResidualReport,
}

/// Apply classical transformation case 1..4 to a classical window.
///
/// The single quantum potential in the targets uses the log-Laplacian form:
/// the transformation algebra cancels exactly against that discretization, so
/// for exact classical pairs the phase-side residual is pure
/// continuity-discretization error O(h^2 + dt^2).
pub fn classical_transform(
    window: &[PhaseDensitySnapshot],
    which: u8,
    k_classical: f64,
    potential: &ScalarField,
    constants: Constants,
) -> Result<ClassicalTransformOutput> {
    if !(1..=4).contains(&which) {
        return Err(Error::Transform(format!(
            "classical case must be 1..4, got {which}"
        )));
    }
    // cases 1 and 3 add the log-density half; 2 and 4 subtract it
    let direction = if which == 1 || which == 3 {
        TransformDirection::Forward
    } else {
        TransformDirection::Retro
    };
    let spec = TransformSpec {
        direction,
        k: k_classical,
    };
    let tw = transform_window(window, spec)?;
    let mask = &tw.mask;
    let snaps = &tw.snaps;
    let denom = centered_dt(snaps);

    // phase side: dS'/dt + |grad S'|^2/2m +- (k/2m) lap S' + V + Q
    let m0 = mask.masked_mean(&snaps[0].s_prime);
    let m2 = mask.masked_mean(&snaps[2].s_prime);
    let ds_dt = snaps[2]
        .s_prime
        .map(|v| v - m2)
        .zip_with(&snaps[0].s_prime.map(|v| v - m0), |a, b| (a - b) / denom);
    let kinetic = snaps[1]
        .grad_s_prime
        .magnitude_sqr()
        .scale(0.5 / constants.mass);
    let lap_sp = divergence(&snaps[1].grad_s_prime);
    let lap_sign = spec.direction.paired_derivative().laplacian_sign();
    let q = quantum_potential(&snaps[1].rho, QForm::LogLaplacian, mask, constants)?;
    let mut hj = ds_dt
        .add(&kinetic)
        .add(&lap_sp.scale(lap_sign * 0.5 * k_classical / constants.mass))
        .add(potential)
        .add(&q);
    let mean = mask.interior(EDGE_BAND).masked_mean(&hj);
    hj = hj.map(|v| v - mean);
    zero_masked_out(&mut hj, mask);

    // flow side: continuity for cases 1/2, diffusion for 3/4
    let drho_dt = snaps[2].rho.zip_with(&snaps[0].rho, |a, b| (a - b) / denom);
    let flux = density_flux(&snaps[1].rho, &snaps[1].grad_s_prime, constants.mass);
    let mut flow = drho_dt.add(&divergence(&flux));
    if which == 3 || which == 4 {
        let sign = if which == 3 { -1.0 } else { 1.0 };
        flow = flow.add(&laplacian(&snaps[1].rho).scale(sign * 0.5 * k_classical / constants.mass));
    }
    zero_masked_out(&mut flow, mask);

    Ok(ClassicalTransformOutput {
        case: which,
        transformed_phase: snaps[1].s_prime.clone(),
        hj_report: ResidualReport::new(format!("classical_case{which}_hj"), hj, mask),
        flow_report: ResidualReport::new(format!("classical_case{which}_flow"), flow, mask),
    })
}

/// Side-by-side residual norms for the half-quantum-potential comparison.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub k: f64,
    pub hbar: f64,
    pub mass: f64,
    /// Acceleration-form residual with the doubled quantum force.
    pub full_q_max_abs: f64,
    pub full_q_l2: f64,
    /// Acceleration-form residual with the artificially halved quantum force.
    pub half_q_max_abs: f64,
    pub half_q_l2: f64,
    /// Classical phase-equation residual of the back-transformed pair,
    /// evaluated without gauge correction (the anchored phase carries the
    /// true time dependence).
    pub classical_hj_max_abs: f64,
    pub classical_hj_l2: f64,
    /// Deterministic continuity residual of the back-transformed pair.
    pub classical_continuity_max_abs: f64,
    pub classical_continuity_l2: f64,
    /// Interior-masked norms of Q itself: the predicted classical-side gap
    /// for genuine quantum input.
    pub q_max_abs: f64,
    pub q_l2: f64,
}

/// Measure how far a trajectory window is from the half-Q classical duality.
///
/// Builds `S' = S + (hbar/2) log rho`, reports the acceleration-form residual
/// with the full (2 grad Q) and halved (grad Q) quantum force, then reverses
/// the transformation and reports the classical phase-equation and continuity
/// residuals of `(S, rho)`. For genuine quantum input the classical residual
/// equals `-Q` up to discretization, so its norm tracks the norm of Q; for a
/// manufactured classically-transformed pair the classical side vanishes
/// instead. This is a measurement, not a pass/fail identity.
pub fn half_q_duality_check(
    window: &[PhaseDensitySnapshot],
    potential: &ScalarField,
    constants: Constants,
) -> Result<DualityReport> {
    let spec = TransformSpec::forward(constants.hbar);
    let tw = transform_window(window, spec)?;
    let mask = tw.mask.clone();
    let full = acceleration_residual(&tw, potential, constants, 2.0, QForm::Sqrt, "full_q")?;
    let half = acceleration_residual(&tw, potential, constants, 1.0, QForm::Sqrt, "half_q")?;

    let denom = centered_dt(&tw.snaps);
    let ds_dt = window[2]
        .phase
        .zip_with(&window[0].phase, |a, b| (a - b) / denom);
    let grad_s = window[1].phase_gradient();
    let kinetic = grad_s.magnitude_sqr().scale(0.5 / constants.mass);
    let mut class_hj = ds_dt.add(&kinetic).add(potential);
    zero_masked_out(&mut class_hj, &mask);
    let drho_dt = window[2]
        .rho
        .zip_with(&window[0].rho, |a, b| (a - b) / denom);
    let flux = density_flux(&window[1].rho, &grad_s, constants.mass);
    let mut class_cont = drho_dt.add(&divergence(&flux));
    zero_masked_out(&mut class_cont, &mask);
    let hj_report = ResidualReport::new("half_q_classical_hj", class_hj, &mask);
    let cont_report = ResidualReport::new("half_q_classical_continuity", class_cont, &mask);

    let q = quantum_potential(&window[1].rho, QForm::Sqrt, &mask, constants)?;
    let interior = mask.interior(EDGE_BAND);
    Ok(DualityReport {
        k: spec.k,
        hbar: constants.hbar,
        mass: constants.mass,
        full_q_max_abs: full.interior_masked_max_abs,
        full_q_l2: full.interior_masked_l2,
        half_q_max_abs: half.interior_masked_max_abs,
        half_q_l2: half.interior_masked_l2,
        classical_hj_max_abs: hj_report.interior_masked_max_abs,
        classical_hj_l2: hj_report.interior_masked_l2,
        classical_continuity_max_abs: cont_report.interior_masked_max_abs,
        classical_continuity_l2: cont_report.interior_masked_l2,
        q_max_abs: interior.masked_max_abs(&q),
        q_l2: interior.masked_l2(&q),
    })
}
