//! Two-qubit state tomography: tomographic measurement sets, count
//! simulation, linear inversion, maximum-likelihood reconstruction with a
//! positivity-enforcing triangular parameterization, and Monte-Carlo
//! uncertainty on the reconstructed fidelity.
//!
//! Single-qubit analysis kets use the conventions
//! D = (H+V)/sqrt2, A = (H-V)/sqrt2, R = (H-iV)/sqrt2, L = (H+iV)/sqrt2.

use nalgebra::{DMatrix, DVector, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::counts::{
    expected_rates_for_projectors, poisson_draw, CountRecord, CountsError, SettingId, SourceModel,
    Statistics,
};
use crate::state::{StateError, TwoQubitState};

type C = Complex64;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("projector set has rank {rank}, needs 16 for informational completeness")]
    RankDeficient { rank: usize },
    #[error("count record `{label}` does not match any projector label")]
    UnknownLabel { label: String },
    #[error("duplicate count record for projector `{label}`")]
    DuplicateLabel { label: String },
    #[error("no count record for projector `{label}`")]
    MissingLabel { label: String },
    #[error("count record carries polarizer angles; tomography needs projector labels")]
    UnlabeledRecord,
    #[error("total counts must be positive")]
    NoCounts,
    #[error("monte carlo needs at least 10 trials, got {trials}")]
    TooFewTrials { trials: usize },
}

/// One tomographic setting: a label and the two single-arm analysis kets.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub label: String,
    pub ket1: Vector2<C>,
    pub ket2: Vector2<C>,
}

impl Projector {
    pub fn joint_ket(&self) -> Vector4<C> {
        self.ket1.kronecker(&self.ket2)
    }
}

/// Ordered, informationally complete list of tomographic settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    entries: Vec<Projector>,
}

pub fn ket_h() -> Vector2<C> {
    Vector2::new(C::new(1.0, 0.0), C::new(0.0, 0.0))
}
pub fn ket_v() -> Vector2<C> {
    Vector2::new(C::new(0.0, 0.0), C::new(1.0, 0.0))
}
pub fn ket_d() -> Vector2<C> {
    Vector2::new(C::new(0.5f64.sqrt(), 0.0), C::new(0.5f64.sqrt(), 0.0))
}
pub fn ket_a() -> Vector2<C> {
    Vector2::new(C::new(0.5f64.sqrt(), 0.0), C::new(-(0.5f64.sqrt()), 0.0))
}
pub fn ket_r() -> Vector2<C> {
    Vector2::new(C::new(0.5f64.sqrt(), 0.0), C::new(0.0, -(0.5f64.sqrt())))
}
pub fn ket_l() -> Vector2<C> {
    Vector2::new(C::new(0.5f64.sqrt(), 0.0), C::new(0.0, 0.5f64.sqrt()))
}

fn named_kets(names: &[&str]) -> Vec<(String, Vector2<C>)> {
    names
        .iter()
        .map(|&n| {
            let ket = match n {
                "H" => ket_h(),
                "V" => ket_v(),
                "D" => ket_d(),
                "A" => ket_a(),
                "R" => ket_r(),
                "L" => ket_l(),
                _ => unreachable!("fixed name table"),
            };
            (n.to_string(), ket)
        })
        .collect()
}

impl ProjectorSet {
    pub fn new(entries: Vec<Projector>) -> Result<Self, TomoError> {
        let set = ProjectorSet { entries };
        let rank = set.probability_map_rank();
        if rank < 16 {
            return Err(TomoError::RankDeficient { rank });
        }
        Ok(set)
    }

    /// The 16-setting set: all ordered pairs from {H, V, D, R} per arm,
    /// row-major in that basis order.
    pub fn standard_16() -> ProjectorSet {
        Self::product_set(&["H", "V", "D", "R"])
    }

    /// The 36-setting set: all ordered pairs from {H, V, D, A, R, L}.
    pub fn full_36() -> ProjectorSet {
        Self::product_set(&["H", "V", "D", "A", "R", "L"])
    }

    pub fn by_name(name: &str) -> Option<ProjectorSet> {
        match name {
            "standard-16" => Some(Self::standard_16()),
            "full-36" => Some(Self::full_36()),
            _ => None,
        }
    }

    fn product_set(names: &[&str]) -> ProjectorSet {
        let kets = named_kets(names);
        let mut entries = Vec::with_capacity(kets.len() * kets.len());
        for (n1, k1) in &kets {
            for (n2, k2) in &kets {
                entries.push(Projector {
                    label: format!("{n1}{n2}"),
                    ket1: *k1,
                    ket2: *k2,
                });
            }
        }
        ProjectorSet { entries }
    }

    pub fn entries(&self) -> &[Projector] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rank of the linear map from the 16 real state coordinates to outcome
    /// probabilities.
    pub fn probability_map_rank(&self) -> usize {
        self.design_matrix().rank(1e-9)
    }

    /// Real design matrix A with A[k][a] = tr(E_a P_k) over the Hermitian
    /// coordinate basis used by linear inversion.
    fn design_matrix(&self) -> DMatrix<f64> {
        let basis = hermitian_basis();
        let mut a = DMatrix::<f64>::zeros(self.entries.len(), 16);
        for (k, proj) in self.entries.iter().enumerate() {
            let psi = proj.joint_ket();
            for (j, e) in basis.iter().enumerate() {
                a[(k, j)] = (psi.adjoint() * e * psi)[(0, 0)].re;
            }
        }
        a
    }
}

/// Hermitian coordinate basis: 4 diagonal projectors, then for each pair
/// r < c the symmetric and antisymmetric combinations.
fn hermitian_basis() -> Vec<Matrix4<C>> {
    let mut basis = Vec::with_capacity(16);
    for d in 0..4 {
        let mut m = Matrix4::<C>::zeros();
        m[(d, d)] = C::new(1.0, 0.0);
        basis.push(m);
    }
    for r in 0..4 {
        for c in (r + 1)..4 {
            let mut sym = Matrix4::<C>::zeros();
            sym[(r, c)] = C::new(1.0, 0.0);
            sym[(c, r)] = C::new(1.0, 0.0);
            basis.push(sym);
            let mut asym = Matrix4::<C>::zeros();
            asym[(r, c)] = C::new(0.0, 1.0);
            asym[(c, r)] = C::new(0.0, -1.0);
            basis.push(asym);
        }
    }
    basis
}

/// Simulate one tomography pass: per projector, expected rates through the
/// source model and (optionally) Poisson draws. One rng stream from `seed`,
/// draws in list order as singles 1, singles 2, coincidences.
pub fn simulate_tomography(
    state: &TwoQubitState,
    projectors: &ProjectorSet,
    source: &SourceModel,
    seed: u64,
    statistics: Statistics,
) -> Result<Vec<CountRecord>, TomoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = source.integration_time_s;
    let mut records = Vec::with_capacity(projectors.len());
    for proj in projectors.entries() {
        let rates = expected_rates_for_projectors(state, &proj.ket1, &proj.ket2, source)?;
        let (s1, s2, cc) = match statistics {
            Statistics::Poisson => (
                poisson_draw(rates.singles_1_cps * t, &mut rng) as f64,
                poisson_draw(rates.singles_2_cps * t, &mut rng) as f64,
                poisson_draw(rates.coincidence_cps * t, &mut rng) as f64,
            ),
            Statistics::Expected => {
                (rates.singles_1_cps * t, rates.singles_2_cps * t, rates.coincidence_cps * t)
            }
        };
        records.push(CountRecord {
            setting: SettingId::Projector { label: proj.label.clone() },
            singles_1: s1,
            singles_2: s2,
            coincidences: cc,
            accidentals_estimate: rates.accidental_cps * t,
            integration_time_s: t,
        });
    }
    Ok(records)
}

/// Coincidence counts aligned to the projector-set order by label.
fn align_counts(counts: &[CountRecord], projectors: &ProjectorSet) -> Result<Vec<f64>, TomoError> {
    let mut by_label = std::collections::HashMap::new();
    for rec in counts {
        let label = match &rec.setting {
            SettingId::Projector { label } => label.clone(),
            SettingId::Polarizers { .. } => return Err(TomoError::UnlabeledRecord),
        };
        if projectors.entries().iter().all(|p| p.label != label) {
            return Err(TomoError::UnknownLabel { label });
        }
        if by_label.insert(label.clone(), rec.coincidences).is_some() {
            return Err(TomoError::DuplicateLabel { label });
        }
    }
    let mut n = Vec::with_capacity(projectors.len());
    for proj in projectors.entries() {
        match by_label.get(&proj.label) {
            Some(&c) => n.push(c),
            None => return Err(TomoError::MissingLabel { label: proj.label.clone() }),
        }
    }
    if n.iter().sum::<f64>() <= 0.0 {
        return Err(TomoError::NoCounts);
    }
    Ok(n)
}

/// Least-squares inversion of the probability map. The result is Hermitian
/// by construction and trace-normalized, but not necessarily positive.
pub fn linear_inversion(
    counts: &[CountRecord],
    projectors: &ProjectorSet,
) -> Result<Matrix4<C>, TomoError> {
    let n = align_counts(counts, projectors)?;
    let a = projectors.design_matrix();
    let rank = a.rank(1e-9);
    if rank < 16 {
        return Err(TomoError::RankDeficient { rank });
    }
    let rhs = DVector::from_vec(n);
    // normal equations; the exposure scale rides along in x and cancels in
    // the trace normalization
    let ata = a.transpose() * &a;
    let atb = a.transpose() * rhs;
    let x = ata.lu().solve(&atb).ok_or(TomoError::RankDeficient { rank })?;
    let basis = hermitian_basis();
    let mut rho = Matrix4::<C>::zeros();
    for (j, e) in basis.iter().enumerate() {
        rho += e.map(|z| z * x[j]);
    }
    let tr = rho.trace().re;
    if tr.abs() < 1e-300 {
        return Err(TomoError::NoCounts);
    }
    Ok(rho.map(|z| z / tr))
}

/// Gradient evaluation mode for the likelihood ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    /// Central finite differences; slower cross-check path.
    Numerical,
}

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub ll_tolerance: f64,
    /// Stop when the accepted parameter step is shorter than this.
    pub step_tolerance: f64,
    pub gradient: GradientMode,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 10_000,
            ll_tolerance: 1e-10,
            step_tolerance: 1e-9,
            gradient: GradientMode::Analytic,
        }
    }
}

/// Reconstruction output: the physical state plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: TwoQubitState,
    /// Poisson log-likelihood at the optimum (up to the n! constant).
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Reduced log-likelihood after each accepted step, for monotonicity
    /// diagnostics.
    pub ll_trace: Vec<f64>,
    pub fidelity_vs_target: Option<f64>,
    pub fidelity_std: Option<f64>,
}

/// Lower-triangular parameter order: 4 real diagonals, then (re, im) pairs
/// for the positions below the diagonal, row by row.
const OFFDIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn t_from_params(t: &[f64; 16]) -> Matrix4<C> {
    let mut m = Matrix4::<C>::zeros();
    for d in 0..4 {
        m[(d, d)] = C::new(t[d], 0.0);
    }
    for (j, &(r, c)) in OFFDIAG.iter().enumerate() {
        m[(r, c)] = C::new(t[4 + 2 * j], t[5 + 2 * j]);
    }
    m
}

fn params_from_t(m: &Matrix4<C>) -> [f64; 16] {
    let mut t = [0.0; 16];
    for d in 0..4 {
        t[d] = m[(d, d)].re;
    }
    for (j, &(r, c)) in OFFDIAG.iter().enumerate() {
        t[4 + 2 * j] = m[(r, c)].re;
        t[5 + 2 * j] = m[(r, c)].im;
    }
    t
}

/// Density matrix of the triangular parameterization,
/// rho = T^dag T / tr(T^dag T). Positive and unit-trace for any parameters.
pub fn rho_from_params(t: &[f64; 16]) -> Matrix4<C> {
    let tm = t_from_params(t);
    let g = tm.adjoint() * tm;
    let tr = g.trace().re;
    if tr <= 0.0 {
        return Matrix4::identity().map(|z: C| z / C::new(4.0, 0.0));
    }
    g.map(|z| z / tr)
}

/// Floor applied to probabilities inside logarithms.
const P_FLOOR: f64 = 1e-30;

struct Likelihood<'a> {
    psi: Vec<Vector4<C>>,
    n: &'a [f64],
    n_tot: f64,
}

impl<'a> Likelihood<'a> {
    fn new(projectors: &ProjectorSet, n: &'a [f64]) -> Self {
        let psi = projectors.entries().iter().map(|p| p.joint_ket()).collect();
        Likelihood { psi, n, n_tot: n.iter().sum() }
    }

    /// p_k = |T psi_k|^2 / ||T||_F^2 for all settings.
    fn probabilities(&self, t: &[f64; 16]) -> (Vec<f64>, f64) {
        let tm = t_from_params(t);
        let g: f64 = tm.iter().map(|z| z.norm_sqr()).sum();
        let p: Vec<f64> =
            self.psi.iter().map(|psi| (tm * psi).norm_squared() / g).collect();
        let p_sum = p.iter().sum();
        (p, p_sum)
    }

    /// Reduced objective sum_k n_k ln p_k - n_tot ln sum_k p_k; the global
    /// exposure scale is at its closed-form optimum N = n_tot / sum p.
    fn reduced_ll(&self, t: &[f64; 16]) -> f64 {
        let (p, p_sum) = self.probabilities(t);
        let mut ll = -self.n_tot * p_sum.ln();
        for (nk, pk) in self.n.iter().zip(&p) {
            if *nk > 0.0 {
                ll += nk * pk.max(P_FLOOR).ln();
            }
        }
        ll
    }

    /// Full Poisson log-likelihood sum_k [n_k ln mu_k - mu_k] at the
    /// closed-form exposure scale, up to the n_k! constant.
    fn poisson_ll(&self, t: &[f64; 16]) -> f64 {
        let (p, p_sum) = self.probabilities(t);
        let scale = self.n_tot / p_sum;
        let mut ll = 0.0;
        for (nk, pk) in self.n.iter().zip(&p) {
            let mu = scale * pk;
            if *nk > 0.0 {
                ll += nk * mu.max(P_FLOOR).ln();
            }
            ll -= mu;
        }
        ll
    }

    fn gradient(&self, t: &[f64; 16], mode: GradientMode) -> [f64; 16] {
        match mode {
            GradientMode::Analytic => self.analytic_gradient(t),
            GradientMode::Numerical => self.numerical_gradient(t),
        }
    }

    fn analytic_gradient(&self, t: &[f64; 16]) -> [f64; 16] {
        let tm = t_from_params(t);
        let g: f64 = tm.iter().map(|z| z.norm_sqr()).sum();
        let y: Vec<Vector4<C>> = self.psi.iter().map(|psi| tm * psi).collect();
        let p: Vec<f64> = y.iter().map(|yk| yk.norm_squared() / g).collect();
        let p_sum: f64 = p.iter().sum();

        // weights w_k = n_k / p_k - n_tot / sum p; dL = sum_k w_k dp_k with
        // dp_k = (dq_k - p_k dg) / g
        let w: Vec<f64> = self
            .n
            .iter()
            .zip(&p)
            .map(|(nk, pk)| {
                let data_term = if *nk > 0.0 { nk / pk.max(P_FLOOR) } else { 0.0 };
                data_term - self.n_tot / p_sum
            })
            .collect();
        let w_dot_p: f64 = w.iter().zip(&p).map(|(wk, pk)| wk * pk).sum();

        let mut grad = [0.0; 16];
        for j in 0..16 {
            let (a, b, imag) = param_position(j);
            // dq_k = 2 Re[c conj(y_k[a]) psi_k[b]] with c = 1 or i
            let mut w_dot_dq = 0.0;
            for (k, psi) in self.psi.iter().enumerate() {
                let z = y[k][a].conj() * psi[b];
                let dq = 2.0 * if imag { -z.im } else { z.re };
                w_dot_dq += w[k] * dq;
            }
            // dg = 2 Re(T_ab) or 2 Im(T_ab), i.e. twice the parameter
            let dg = 2.0 * t[j];
            grad[j] = (w_dot_dq - w_dot_p * dg) / g;
        }
        grad
    }

    fn numerical_gradient(&self, t: &[f64; 16]) -> [f64; 16] {
        let h = 1e-6;
        let mut grad = [0.0; 16];
        let mut tp = *t;
        for j in 0..16 {
            let orig = tp[j];
            tp[j] = orig + h;
            let up = self.reduced_ll(&tp);
            tp[j] = orig - h;
            let down = self.reduced_ll(&tp);
            tp[j] = orig;
            grad[j] = (up - down) / (2.0 * h);
        }
        grad
    }
}

/// (row, col, is_imaginary_part) of parameter j in the triangular factor.
fn param_position(j: usize) -> (usize, usize, bool) {
    if j < 4 {
        (j, j, false)
    } else {
        let (r, c) = OFFDIAG[(j - 4) / 2];
        (r, c, (j - 4) % 2 == 1)
    }
}

/// Initialization: linear inversion projected onto the physical cone.
/// Negative eigenvalues are clipped, a small floor keeps the triangular
/// factorization well defined.
fn initial_params(counts: &[CountRecord], projectors: &ProjectorSet) -> Result<[f64; 16], TomoError> {
    let li = linear_inversion(counts, projectors)?;
    let herm = (li + li.adjoint()).map(|z| z / C::new(2.0, 0.0));
    let eig = herm.symmetric_eigen();
    let mut rho0 = Matrix4::<C>::zeros();
    let mut total = 0.0;
    let floors: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(1e-6)).collect();
    for f in &floors {
        total += f;
    }
    for k in 0..4 {
        let vk = eig.eigenvectors.column(k);
        rho0 += (vk * vk.adjoint()).map(|z| z * (floors[k] / total));
    }
    // lower-triangular T with T^dag T = rho0, via the antidiagonal flip of
    // the Cholesky factor
    let j = antidiagonal();
    let flipped = j * rho0 * j;
    let chol = nalgebra::Cholesky::new(flipped)
        .expect("positive definite by eigenvalue floor");
    let t = j * chol.l().adjoint() * j;
    Ok(params_from_t(&t))
}

fn antidiagonal() -> Matrix4<C> {
    let mut m = Matrix4::<C>::zeros();
    for k in 0..4 {
        m[(k, 3 - k)] = C::new(1.0, 0.0);
    }
    m
}

/// Maximum-likelihood reconstruction.
///
/// Gradient ascent on the 16 triangular parameters with a backtracking step;
/// every accepted step improves the reduced log-likelihood, so the trace is
/// monotone by construction. Stops on log-likelihood improvement below
/// `ll_tolerance`, step below `step_tolerance`, or the iteration cap
/// (`converged = false` in the last case).
pub fn mle_reconstruct(
    counts: &[CountRecord],
    projectors: &ProjectorSet,
    options: &MleOptions,
) -> Result<TomographyResult, TomoError> {
    let n = align_counts(counts, projectors)?;
    let lik = Likelihood::new(projectors, &n);
    let mut t = initial_params(counts, projectors)?;
    normalize_params(&mut t);

    let mut ll = lik.reduced_ll(&t);
    let mut ll_trace = vec![ll];
    let mut step = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        iterations += 1;
        let grad = lik.gradient(&t, options.gradient);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm * step < options.step_tolerance {
            converged = true;
            break;
        }
        // backtracking: accept the first step that improves the objective
        let mut improved = false;
        for _ in 0..60 {
            let mut trial = t;
            for j in 0..16 {
                trial[j] += step * grad[j];
            }
            let trial_ll = lik.reduced_ll(&trial);
            if trial_ll > ll {
                let gain = trial_ll - ll;
                t = trial;
                normalize_params(&mut t);
                ll = trial_ll;
                ll_trace.push(ll);
                step *= 1.6;
                improved = true;
                if gain < options.ll_tolerance {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
            if grad_norm * step < options.step_tolerance {
                break;
            }
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let rho = TwoQubitState::new(rho_from_params(&t))?;
    Ok(TomographyResult {
        rho,
        log_likelihood: lik.poisson_ll(&t),
        iterations,
        converged,
        ll_trace,
        fidelity_vs_target: None,
        fidelity_std: None,
    })
}

/// The parameterization is scale free; pin ||T||_F = 1 between steps.
fn normalize_params(t: &mut [f64; 16]) {
    let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in t.iter_mut() {
            *v /= norm;
        }
    }
}

/// Monte-Carlo fidelity uncertainty: resample every coincidence count as
/// Poisson with the observed value as mean (trial i uses seed + i), re-run
/// the reconstruction, and report the sample mean and standard deviation of
/// the fidelity against `target`. `Statistics::Expected` skips resampling,
/// so the spread collapses to zero.
pub fn monte_carlo_fidelity(
    counts: &[CountRecord],
    projectors: &ProjectorSet,
    target: &Vector4<C>,
    trials: usize,
    seed: u64,
    statistics: Statistics,
    options: &MleOptions,
) -> Result<(f64, f64), TomoError> {
    if trials < 10 {
        return Err(TomoError::TooFewTrials { trials });
    }
    let mut fidelities = Vec::with_capacity(trials);
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let resampled: Vec<CountRecord> = counts
            .iter()
            .map(|rec| {
                let coincidences = match statistics {
                    Statistics::Poisson => poisson_draw(rec.coincidences, &mut rng) as f64,
                    Statistics::Expected => rec.coincidences,
                };
                CountRecord { coincidences, ..rec.clone() }
            })
            .collect();
        let result = mle_reconstruct(&resampled, projectors, options)?;
        fidelities.push(crate::state::fidelity_to_pure(&result.rho, target)?);
    }
    let mean = fidelities.iter().sum::<f64>() / trials as f64;
    let var = fidelities.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>()
        / (trials as f64 - 1.0);
    Ok((mean, var.sqrt()))
}
