//! Kinetic diagnostics: `f^±` and `χ`, dissipation ledgers for the kinetic
//! measure, and the mollified doubling-of-variables functional.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError, Mollifier, MollifierKind, TorusGrid};
use crate::model::{Modulus, ProblemSpec};
use crate::numerics::{self, pairwise_sum, MeanEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticError {
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("run has no stochastic accumulators")]
    MissingAccumulators,
    #[error("value {value} outside the xi grid [{lo}, {hi}]")]
    RangeNotCovered { value: f64, lo: f64, hi: f64 },
    #[error("snapshot sets differ: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KineticSign {
    Plus,
    Minus,
}

/// `f⁺(u, ξ) = 1_{ξ<u}`, `f⁻(u, ξ) = −1_{ξ>u}`.
pub fn kinetic_f(u: f64, xi: f64, sign: KineticSign) -> f64 {
    match sign {
        KineticSign::Plus => {
            if xi < u {
                1.0
            } else {
                0.0
            }
        }
        KineticSign::Minus => {
            if xi > u {
                -1.0
            } else {
                0.0
            }
        }
    }
}

/// `χ(u, ξ) = 1` on `0 < ξ < u`, `−1` on `u < ξ < 0`, else `0`.
pub fn chi(u: f64, xi: f64) -> f64 {
    if 0.0 < xi && xi < u {
        1.0
    } else if u < xi && xi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Uniform cells `[lo + jΔξ, lo + (j+1)Δξ]` in the kinetic variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl XiGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, KineticError> {
        if !(lo < hi) || n == 0 {
            return Err(KineticError::ResolutionTooCoarse(format!(
                "xi grid [{lo}, {hi}] with {n} cells"
            )));
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid over `spec.eval_range` with 128 cells.
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        let (lo, hi) = spec.eval_range;
        Self::new(lo, hi, 128).expect("validated range")
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.step()
    }

    /// Cell containing `u`; a value on a cell boundary goes to the lower cell.
    pub fn bin(&self, u: f64) -> usize {
        let s = ((u - self.lo) / self.step()).ceil() - 1.0;
        s.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u <= self.hi
    }
}

/// Running sums of the stochastic terms of the `L^{p+2}` energy balance for
/// `p ∈ {0, 2}` (index 0 and 1), with `η_p(v) = |v|^{p+2}/((p+1)(p+2))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StochasticAccumulators {
    /// `Σ (p+1)⁻¹ |v|^p v Δv dx` with `Δv = Σ_k g_k ΔW_k`.
    pub stochastic: [f64; 2],
    /// `Σ (η_p(v + Δv) − η_p(v) − η_p′(v) Δv) dx`, the realized Itô correction.
    pub realized_ito: [f64; 2],
    /// `Σ ½ G²(x, v) |v|^p Δt dx`, its expectation to leading order.
    pub nominal_ito: [f64; 2],
}

const WEIGHT_P: [f64; 2] = [0.0, 2.0];

fn eta_p(p: f64, v: f64) -> f64 {
    v.abs().powf(p + 2.0) / ((p + 1.0) * (p + 2.0))
}

impl StochasticAccumulators {
    pub fn record_step(&mut self, spec: &ProblemSpec, old: &Field, new: &Field, dt: f64) {
        let grid = old.grid();
        let measure = grid.cell_measure();
        for (idx, &p) in WEIGHT_P.iter().enumerate() {
            let mut stoch = Vec::with_capacity(old.values().len());
            let mut real = Vec::with_capacity(old.values().len());
            let mut nom = Vec::with_capacity(old.values().len());
            for (cell, (&v, &w)) in old.values().iter().zip(new.values()).enumerate() {
                let dv = w - v;
                let vp = v.abs().powf(p);
                let deta = vp * v / (p + 1.0);
                stoch.push(deta * dv);
                real.push(eta_p(p, w) - eta_p(p, v) - deta * dv);
                let x = grid.center(cell)[0];
                nom.push(0.5 * spec.noise.g_squared(x, v) * vp * dt);
            }
            self.stochastic[idx] += pairwise_sum(&stoch) * measure;
            self.realized_ito[idx] += pairwise_sum(&real) * measure;
            self.nominal_ito[idx] += pairwise_sum(&nom) * measure;
        }
    }
}

/// Dissipation accounting for one cell interval `[t_n, t_{n+1})` of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalDissipation {
    pub t0: f64,
    pub t1: f64,
    /// Quadratic-entropy dissipation of the deterministic step.
    pub m: f64,
    pub n1: f64,
}

/// Per-sample kinetic-measure accounting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DissipationLedger {
    pub n1_mass: f64,
    /// `Σ ‖·‖_{p+2}^{p+2}` of the initial and final states for `p ∈ {0, 2}`.
    pub initial_energy: [f64; 2],
    pub final_energy: [f64; 2],
    /// Entropy dissipation of `S` for `η_0` and `η_2`, summed from the scheme.
    pub scheme_dissipation: [f64; 2],
    pub accumulators: Option<StochasticAccumulators>,
    pub intervals: Vec<IntervalDissipation>,
    /// Parabolic dissipation binned by the value `ṽ(x, t)`.
    pub n1_bins: Vec<f64>,
    pub clamp_count: usize,
}

impl DissipationLedger {
    /// `∫ |ξ|^p dm` for `p ∈ {0, 2}` from the discrete energy balance:
    /// `(‖u₀‖^{p+2} − ‖v(T)‖^{p+2}) / ((p+1)(p+2)) + stochastic + realized Itô`.
    pub fn weighted_mass(&self, p: u32) -> Result<f64, KineticError> {
        let idx = match p {
            0 => 0,
            2 => 1,
            _ => {
                return Err(KineticError::Mismatch(format!(
                    "weighted mass recorded for p in {{0, 2}}, got {p}"
                )))
            }
        };
        let acc = self.accumulators.ok_or(KineticError::MissingAccumulators)?;
        let pf = p as f64;
        Ok((self.initial_energy[idx] - self.final_energy[idx]) / ((pf + 1.0) * (pf + 2.0))
            + acc.stochastic[idx]
            + acc.realized_ito[idx])
    }

    /// Total kinetic-measure mass (`p = 0`).
    pub fn m_mass(&self) -> Result<f64, KineticError> {
        self.weighted_mass(0)
    }

    /// Balance with the nominal Itô term `½∫G²|v|^p` in place of the realized one.
    pub fn nominal_weighted_mass(&self, p: u32) -> Result<f64, KineticError> {
        let idx = if p == 0 { 0 } else { 1 };
        let acc = self.accumulators.ok_or(KineticError::MissingAccumulators)?;
        Ok(self.weighted_mass(p)? - acc.realized_ito[idx] + acc.nominal_ito[idx])
    }
}

/// Ensemble statistics of the kinetic-measure masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticMassSummary {
    pub p: u32,
    pub mass: MeanEstimate,
    /// `E |m|²` for the total mass.
    pub mass_squared: MeanEstimate,
}

/// Per-sample weighted masses and their ensemble mean.
pub fn kinetic_measure_mass(
    ledgers: &[DissipationLedger],
    p: u32,
) -> Result<(Vec<f64>, KineticMassSummary), KineticError> {
    let per: Vec<f64> = ledgers
        .iter()
        .map(|l| l.weighted_mass(p))
        .collect::<Result<_, _>>()?;
    let sq: Vec<f64> = per.iter().map(|m| m * m).collect();
    let summary = KineticMassSummary {
        p,
        mass: MeanEstimate::from_samples(&per),
        mass_squared: MeanEstimate::from_samples(&sq),
    };
    Ok((per, summary))
}

/// `(v(t), ṽ(t), v(tᵉ))` for one sample at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticTriple {
    pub v: Field,
    pub vtilde: Field,
    pub v_left: Field,
}

impl KineticTriple {
    fn parts(&self) -> [&[f64]; 3] {
        [self.v.values(), self.vtilde.values(), self.v_left.values()]
    }
}

const TRIPLE_SIGNS: [f64; 3] = [1.0, 1.0, -1.0];

/// `Λ_δ(z) = ∫ ψ_δ(s) (z − s)⁺ ds`, tabulated on `[−δ, δ]` and evaluated by
/// cubic Hermite interpolation with `Λ′(z) = ∫_{−δ}^{z} ψ_δ`.
#[derive(Debug, Clone)]
pub struct RampTable {
    delta: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl RampTable {
    const NODES: usize = 2048;

    pub fn new(delta: f64) -> Result<Self, KineticError> {
        let psi = Mollifier::new(MollifierKind::Value, delta)?;
        let n = Self::NODES;
        let step = 2.0 * delta / n as f64;
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let z = -delta + j as f64 * step;
            values.push(Self::direct(&psi, z));
            slopes.push(numerics::integrate(-delta, z, 4, |s| psi.eval(s)));
        }
        Ok(Self {
            delta,
            step,
            values,
            slopes,
        })
    }

    /// Quadrature value of `Λ_δ(z)`.
    fn direct(psi: &Mollifier, z: f64) -> f64 {
        let d = psi.width;
        if z <= -d {
            0.0
        } else if z >= d {
            z
        } else {
            numerics::integrate(-d, z, 4, |s| psi.eval(s) * (z - s))
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        if z <= -self.delta {
            return 0.0;
        }
        if z >= self.delta {
            return z;
        }
        let s = (z + self.delta) / self.step;
        let j = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.step, self.slopes[j + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

/// `W(k) = ∫_{cell 0} ∫_{cell k} ρ_η(x − y) dy dx` on the periodic line, for
/// offsets `k = 0..N`.
pub fn cell_pair_weights(n: usize, eta: f64) -> Result<Vec<f64>, KineticError> {
    let rho = Mollifier::new(MollifierKind::Space, eta)?;
    let dx = 1.0 / n as f64;
    let images = (eta.ceil() as i64) + 1;
    Ok((0..n)
        .map(|k| {
            let mut w = 0.0;
            for m in -images..=images {
                let center = k as f64 * dx + m as f64;
                if center.abs() > eta + dx {
                    continue;
                }
                w += numerics::integrate(-dx, 0.0, 4, |r| (dx + r) * rho.eval(center + r))
                    + numerics::integrate(0.0, dx, 4, |r| (dx - r) * rho.eval(center + r));
            }
            w
        })
        .collect())
}

/// Envelope terms `η⁻¹δ`, `η⁻²δ^{2γ}`, `η²δ⁻¹` and `r(δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTerms {
    pub eta_inv_delta: f64,
    pub eta_inv2_delta_2gamma: f64,
    pub eta2_delta_inv: f64,
    pub modulus: f64,
}

impl EnvelopeTerms {
    pub fn new(eta: f64, delta: f64, gamma: f64, modulus: &Modulus) -> Self {
        Self {
            eta_inv_delta: delta / eta,
            eta_inv2_delta_2gamma: delta.powf(2.0 * gamma) / (eta * eta),
            eta2_delta_inv: eta * eta / delta,
            modulus: modulus.eval(delta),
        }
    }

    pub fn total(&self) -> f64 {
        self.eta_inv_delta + self.eta_inv2_delta_2gamma + self.eta2_delta_inv + self.modulus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub eta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    /// `−E ∫ {f⁺ triple}{f⁻ triple} α_{η,δ}`.
    pub value: MeanEstimate,
    /// `−E ∫ f⁺(vᵉ(x), ξ) f⁻(vᵉ′(y), ζ) α_{η,δ}`; nonnegative by construction.
    pub product_value: MeanEstimate,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    /// `E ∫ (vᵉ − vᵉ′)⁺ dx`.
    pub positive_part: f64,
    pub envelope: EnvelopeTerms,
    /// Computable stand-in for `I′`: `E‖vᵉ(t) − vᵉ(tᵉ)‖₁`.
    pub i_prime_surrogate: f64,
    /// Computable stand-in for `K′`: `E‖ṽᵉ(t) − vᵉ(tᵉ)‖₁`.
    pub k_prime_surrogate: f64,
}

fn check_covered(xi: &XiGrid, f: &Field) -> Result<(), KineticError> {
    for &v in f.values() {
        if !xi.contains(v) {
            return Err(KineticError::RangeNotCovered {
                value: v,
                lo: xi.lo(),
                hi: xi.hi(),
            });
        }
    }
    Ok(())
}

/// `Σ_{x,y} W(y − x) φ(a(x), b(y))` on a 1D or 2D grid (product kernel in 2D).
fn weighted_pair_sum(
    grid: &TorusGrid,
    weights: &[f64],
    a: &[f64],
    b: &[f64],
    phi: impl Fn(f64, f64) -> f64,
) -> f64 {
    let n = grid.n();
    let support: Vec<usize> = (0..n).filter(|&k| weights[k] > 0.0).collect();
    let per_x: Vec<f64> = match grid.dim() {
        1 => (0..n)
            .map(|i| {
                let terms: Vec<f64> = support
                    .iter()
                    .map(|&k| weights[k] * phi(a[i], b[(i + k) % n]))
                    .collect();
                pairwise_sum(&terms)
            })
            .collect(),
        _ => (0..n * n)
            .map(|c| {
                let (i, j) = (c % n, c / n);
                let mut terms = Vec::with_capacity(support.len() * support.len());
                for &kj in &support {
                    for &ki in &support {
                        let y = (i + ki) % n + ((j + kj) % n) * n;
                        terms.push(weights[ki] * weights[kj] * phi(a[c], b[y]));
                    }
                }
                pairwise_sum(&terms)
            })
            .collect(),
    };
    pairwise_sum(&per_x)
}

/// The mollified doubling functional between paired snapshot triples of two
/// runs (`first` at `ε`, `second` at `ε′`), averaged over sample pairs.
#[allow(clippy::too_many_arguments)]
pub fn doubling_functional(
    first: &[KineticTriple],
    second: &[KineticTriple],
    eta: f64,
    delta: f64,
    xi: &XiGrid,
    epsilon: f64,
    epsilon_prime: f64,
    spec: &ProblemSpec,
) -> Result<DoublingReport, KineticError> {
    if first.len() != second.len() || first.is_empty() {
        return Err(KineticError::Mismatch(format!(
            "{} vs {} samples",
            first.len(),
            second.len()
        )));
    }
    let grid = *first[0].v.grid();
    if eta < 2.0 * grid.dx() {
        return Err(KineticError::ResolutionTooCoarse(format!(
            "eta {eta} below 2 dx = {}",
            2.0 * grid.dx()
        )));
    }
    if delta < 2.0 * xi.step() {
        return Err(KineticError::ResolutionTooCoarse(format!(
            "delta {delta} below 2 dxi = {}",
            2.0 * xi.step()
        )));
    }
    for t in first.iter().chain(second) {
        for f in [&t.v, &t.vtilde, &t.v_left] {
            if *f.grid() != grid {
                return Err(KineticError::Mismatch("grids differ".into()));
            }
            check_covered(xi, f)?;
        }
    }
    let ramp = RampTable::new(delta)?;
    let weights = cell_pair_weights(grid.n(), eta)?;
    let measure = grid.cell_measure();

    struct PerSample {
        triple: f64,
        product: f64,
        ramp_free: f64,
        positive: f64,
        i_prime: f64,
        k_prime: f64,
    }
    let per: Vec<PerSample> = first
        .iter()
        .zip(second)
        .map(|(a, b)| {
            let (pa, pb) = (a.parts(), b.parts());
            let mut triple_terms = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let s = TRIPLE_SIGNS[i] * TRIPLE_SIGNS[j];
                    triple_terms[3 * i + j] =
                        s * weighted_pair_sum(&grid, &weights, pa[i], pb[j], |x, y| ramp.eval(x - y));
                }
            }
            let product = weighted_pair_sum(&grid, &weights, pa[0], pb[0], |x, y| ramp.eval(x - y));
            let ramp_free =
                weighted_pair_sum(&grid, &weights, pa[0], pb[0], |x, y| (x - y).max(0.0));
            let diffs: Vec<f64> = pa[0].iter().zip(pb[0]).map(|(x, y)| (x - y).max(0.0)).collect();
            PerSample {
                triple: pairwise_sum(&triple_terms),
                product,
                ramp_free,
                positive: pairwise_sum(&diffs) * measure,
                i_prime: crate::grid::l1_distance(&a.v, &a.v_left).unwrap_or(f64::NAN),
                k_prime: crate::grid::l1_distance(&a.vtilde, &a.v_left).unwrap_or(f64::NAN),
            }
        })
        .collect();

    let collect = |f: fn(&PerSample) -> f64| -> Vec<f64> { per.iter().map(f).collect() };
    let value = MeanEstimate::from_samples(&collect(|p| p.triple));
    let product_value = MeanEstimate::from_samples(&collect(|p| p.product));
    let ramp_free = MeanEstimate::from_samples(&collect(|p| p.ramp_free)).mean;
    let positive_part = MeanEstimate::from_samples(&collect(|p| p.positive)).mean;
    Ok(DoublingReport {
        eta,
        delta,
        epsilon,
        epsilon_prime,
        value,
        product_value,
        f1: (value.mean - product_value.mean).abs(),
        f2: (product_value.mean - ramp_free).abs(),
        f3: (ramp_free - positive_part).abs(),
        positive_part,
        envelope: EnvelopeTerms::new(eta, delta, spec.diffusion.gamma(), &spec.noise.modulus),
        i_prime_surrogate: MeanEstimate::from_samples(&collect(|p| p.i_prime)).mean,
        k_prime_surrogate: MeanEstimate::from_samples(&collect(|p| p.k_prime)).mean,
    })
}

/// One row of a doubling rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub eta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub value: f64,
    pub std_error: f64,
    pub product_value: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub theta: f64,
    pub gamma: f64,
    pub rows: Vec<DoublingRow>,
    /// Log-log slope of `value` against `η`.
    pub fitted_slope: Option<f64>,
    /// `min(θ − 1, 2γθ − 2, 2 − θ)`.
    pub envelope_exponent: f64,
    /// Each value at most the previous one plus 3 standard errors.
    pub nonincreasing: bool,
}

/// Envelope `T (η^{θ−1} + η^{2γθ−2} + η^{2−θ} + r(η^θ))`.
pub fn theoretical_envelope(eta: f64, theta: f64, gamma: f64, horizon: f64, modulus: &Modulus) -> f64 {
    horizon
        * (eta.powf(theta - 1.0)
            + eta.powf(2.0 * gamma * theta - 2.0)
            + eta.powf(2.0 - theta)
            + modulus.eval(eta.powf(theta)))
}

/// Assembles reports along a ladder of decreasing `η` into a rate table.
pub fn doubling_rate_table(
    reports: &[DoublingReport],
    theta: f64,
    spec: &ProblemSpec,
) -> Result<RateTable, KineticError> {
    let gamma = spec.diffusion.gamma();
    if !(theta > 1.0 / gamma && theta < 2.0) {
        return Err(KineticError::Mismatch(format!(
            "theta {theta} outside (1/gamma, 2) = ({}, 2)",
            1.0 / gamma
        )));
    }
    let rows: Vec<DoublingRow> = reports
        .iter()
        .map(|r| DoublingRow {
            eta: r.eta,
            delta: r.delta,
            epsilon: r.epsilon,
            epsilon_prime: r.epsilon_prime,
            value: r.value.mean,
            std_error: r.value.std_error,
            product_value: r.product_value.mean,
            envelope: theoretical_envelope(r.eta, theta, gamma, spec.horizon, &spec.noise.modulus),
        })
        .collect();
    let nonincreasing = rows.windows(2).all(|w| {
        w[1].value <= w[0].value + 3.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt()
    });
    let xs: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value).collect();
    Ok(RateTable {
        theta,
        gamma,
        fitted_slope: numerics::loglog_fit(&xs, &ys).map(|f| f.0),
        envelope_exponent: (theta - 1.0).min(2.0 * gamma * theta - 2.0).min(2.0 - theta),
        rows,
        nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_problem;
    use proptest::prelude::*;

    #[test]
    fn kinetic_function_values() {
        assert_eq!(kinetic_f(1.0, 0.0, KineticSign::Plus), 1.0);
        assert_eq!(kinetic_f(1.0, 0.0, KineticSign::Minus), 0.0);
        assert_eq!(kinetic_f(1.0, 2.0, KineticSign::Minus), -1.0);
        assert_eq!(chi(-1.0, -0.5), -1.0);
        assert_eq!(chi(1.0, 0.5), 1.0);
        assert_eq!(chi(1.0, -0.5), 0.0);
    }

    #[test]
    fn chi_integrates_to_value() {
        let xi = XiGrid::new(-3.0, 3.0, 600).unwrap();
        for &u in &[-2.345, -0.01, 0.0, 0.5, 2.99] {
            let s: f64 = (0..xi.n()).map(|j| chi(u, xi.center(j))).sum::<f64>() * xi.step();
            assert!((s - u).abs() <= xi.step(), "u={u} got {s}");
        }
    }

    #[test]
    fn binning_ties_go_to_lower_cell() {
        let xi = XiGrid::new(0.0, 1.0, 10).unwrap();
        assert_eq!(xi.bin(0.3), 2);
        assert_eq!(xi.bin(0.3000001), 3);
        assert_eq!(xi.bin(0.0), 0);
        assert_eq!(xi.bin(1.0), 9);
        assert_eq!(xi.bin(5.0), 9);
    }

    /// Independent 2D quadrature of `∫∫_{ξ<c<ζ} ψ_δ(ξ − ζ) dζ dξ`.
    fn overlap_oracle(delta: f64) -> f64 {
        let psi = Mollifier::new(MollifierKind::Value, delta).unwrap();
        let c = 0.3;
        numerics::integrate(c - delta, c, 16, |x| {
            numerics::integrate(c, x + delta, 16, |z| psi.eval(x - z))
        })
    }

    #[test]
    fn constant_fields_give_mollifier_overlap() {
        let spec = builtin_problem("burgers").unwrap();
        let grid = TorusGrid::one_d(32).unwrap();
        let c = Field::constant(grid, 0.3);
        let triple = KineticTriple {
            v: c.clone(),
            vtilde: c.clone(),
            v_left: c.clone(),
        };
        let xi = XiGrid::for_problem(&spec);
        for delta in [0.1, 0.2] {
            let r = doubling_functional(
                std::slice::from_ref(&triple),
                std::slice::from_ref(&triple),
                0.1,
                delta,
                &xi,
                0.1,
                0.05,
                &spec,
            )
            .unwrap();
            let oracle = overlap_oracle(delta);
            assert!((r.value.mean - oracle).abs() < 1e-8, "{} vs {oracle}", r.value.mean);
            assert!(oracle > 0.0 && oracle <= delta / 2.0);
            assert!((r.product_value.mean - oracle).abs() < 1e-8);
        }
    }

    #[test]
    fn cell_weights_sum_to_cell_width() {
        for (n, eta) in [(64, 0.05), (64, 0.2), (32, 0.7)] {
            let w = cell_pair_weights(n, eta).unwrap();
            let s: f64 = w.iter().sum();
            assert!((s - 1.0 / n as f64).abs() < 1e-12, "n={n} eta={eta} sum={s}");
            for k in 1..n {
                assert!((w[k] - w[n - k]).abs() < 1e-15);
            }
        }
    }

    /// Brute-force quadruple sum on a tiny grid: x, y on fine sub-cells,
    /// ξ, ζ on a fine uniform grid.
    #[test]
    fn product_form_matches_brute_force_quadrature() {
        let spec = builtin_problem("burgers").unwrap();
        let n = 8;
        let grid = TorusGrid::one_d(n).unwrap();
        let a = Field::new(grid, (0..n).map(|i| (i as f64 * 0.9).sin()).collect()).unwrap();
        let b = Field::new(grid, (0..n).map(|i| (i as f64 * 0.4).cos() * 0.8).collect()).unwrap();
        let (eta, delta) = (0.3, 0.2);
        let xi = XiGrid::new(-2.0, 2.0, 40).unwrap();
        let ta = KineticTriple { v: a.clone(), vtilde: a.clone(), v_left: a.clone() };
        let tb = KineticTriple { v: b.clone(), vtilde: b.clone(), v_left: b.clone() };
        let r = doubling_functional(&[ta], &[tb], eta, delta, &xi, 0.1, 0.1, &spec).unwrap();

        let rho = Mollifier::new(MollifierKind::Space, eta).unwrap();
        let psi = Mollifier::new(MollifierKind::Value, delta).unwrap();
        let sub = 40;
        let h = 1.0 / (n * sub) as f64;
        let nz = 1600;
        let (zlo, zhi) = (-2.0, 2.0);
        let hz = (zhi - zlo) / nz as f64;
        let zs: Vec<f64> = (0..nz).map(|j| zlo + (j as f64 + 0.5) * hz).collect();
        // Inner ξ-ζ integral for every (a, b) value pair.
        let inner = |u: f64, v: f64| -> f64 {
            let mut s = 0.0;
            for &x in &zs {
                if x >= u {
                    continue;
                }
                for &z in &zs {
                    if z > v {
                        s += psi.eval(x - z);
                    }
                }
            }
            s * hz * hz
        };
        let table: Vec<Vec<f64>> = a
            .values()
            .iter()
            .map(|&ai| b.values().iter().map(|&bj| inner(ai, bj)).collect())
            .collect();
        let mut total = 0.0;
        for p in 0..n * sub {
            for q in 0..n * sub {
                let x = (p as f64 + 0.5) * h;
                let y = (q as f64 + 0.5) * h;
                let d = crate::grid::torus_distance(x, y);
                let w = rho.eval(d);
                if w > 0.0 {
                    total += w * table[p / sub][q / sub] * h * h;
                }
            }
        }
        assert!((r.product_value.mean - total).abs() < 2e-3, "{} vs {total}", r.product_value.mean);
        assert!(r.f2 <= delta);
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        let spec = builtin_problem("burgers").unwrap();
        let grid = TorusGrid::one_d(32).unwrap();
        let c = Field::constant(grid, 0.0);
        let t = KineticTriple { v: c.clone(), vtilde: c.clone(), v_left: c };
        let xi = XiGrid::for_problem(&spec);
        let r = doubling_functional(std::slice::from_ref(&t), std::slice::from_ref(&t), 0.03, 0.2, &xi, 0.1, 0.1, &spec);
        assert!(matches!(r, Err(KineticError::ResolutionTooCoarse(_))));
        let r = doubling_functional(std::slice::from_ref(&t), std::slice::from_ref(&t), 0.1, 0.01, &xi, 0.1, 0.1, &spec);
        assert!(matches!(r, Err(KineticError::ResolutionTooCoarse(_))));
    }

    #[test]
    fn chebyshev_inequality_holds() {
        // μ({|f| ≥ M/λ}) ≤ λ on a unit-measure grid with M = ‖f‖₁.
        let n = 1000;
        let vals: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 - 50.0).powi(3)).collect();
        let m: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        for lambda in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let count = vals.iter().filter(|v| v.abs() >= m / lambda).count();
            assert!(count as f64 / n as f64 <= lambda);
        }
    }

    #[test]
    fn missing_accumulators_are_reported() {
        let ledger = DissipationLedger::default();
        assert_eq!(ledger.m_mass(), Err(KineticError::MissingAccumulators));
    }

    proptest! {
        #[test]
        fn kinetic_partition_identity(u in -5.0f64..5.0, xi in -5.0f64..5.0) {
            prop_assume!(xi != u);
            let s = kinetic_f(u, xi, KineticSign::Plus) - kinetic_f(u, xi, KineticSign::Minus);
            prop_assert_eq!(s, 1.0);
        }

        #[test]
        fn ramp_table_matches_quadrature(z in -0.3f64..0.3) {
            let delta = 0.2;
            let table = RampTable::new(delta).unwrap();
            let psi = Mollifier::new(MollifierKind::Value, delta).unwrap();
            let direct = RampTable::direct(&psi, z);
            prop_assert!((table.eval(z) - direct).abs() < 1e-11);
            prop_assert!(table.eval(z) >= z.max(0.0) - 1e-15);
            prop_assert!(table.eval(z) - z.max(0.0) <= delta);
        }
    }
}
