//! The message-passing iteration engines: a block-sequential solver that
//! refreshes the global state after every block visit, and the classic
//! full-batch solver that treats all measurement blocks as one concatenated
//! observation with a single shared measurement-side precision. Both share
//! the same diagonal-Gram linear-estimation kernel, so their equivalence in
//! the degenerate cases is structural, not coincidental.
//!
//! Internally the engines carry *signed* scalar precisions. The extrinsic
//! updates are subtractions of one precision from another, and early in a
//! run — before the phases lock in — the magnitude channel's posterior is
//! routinely broader than its pseudo-prior, making those differences
//! negative. Keeping the sign preserves the natural parameters of every
//! message exactly, which is what lets the linear estimator discount (rather
//! than trust) measurement messages that are still mostly random phase. The
//! boundary types ([`GaussianMessage`], denoiser results) remain strictly
//! positive; only the solver's interior state is signed.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use crate::denoise::{pooled_precision, GaussianPrior, RicianChannel};
use crate::error::{Error, Result};
use crate::message::{ComplexVector, GaussianMessage, RealVector, PREC_MAX, PREC_MIN};
use crate::metrics::{nmse, nmse_db, TraceRecord};
use crate::rng::RngHandle;
use crate::sensing::SensingOperator;

/// Relative slack for the information-monotonicity check `eta2 >= gamma2`;
/// the inequality is exact in real arithmetic (when it applies) and can only
/// be violated by a few ulps of rounding in the reciprocal-mean.
const MONOTONE_SLACK: f64 = 1e-9;

/// How the per-block messages are updated within one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// One block at a time, refreshing the global signal-side message after
    /// every block visit.
    Sequential,
    /// All blocks from the same state snapshot, committed together.
    Parallel,
}

/// Visit order of the blocks under the sequential schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOrder {
    /// Always 1..L, the literal loop.
    Fixed,
    /// A fresh uniform permutation each outer iteration.
    RandomPerEpoch,
}

/// Iteration controls shared by both solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Number of outer iterations.
    pub iterations: usize,
    /// Damping weight in (0, 1]; 1 disables damping.
    pub rho: f64,
    pub schedule: Schedule,
    pub block_order: BlockOrder,
    /// Early-stop threshold on the relative change of the signal estimate
    /// between outer iterations; 0 disables (the default, so that a
    /// requested iteration count is exact).
    pub eps_stop: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 200,
            rho: 1.0,
            schedule: Schedule::Sequential,
            block_order: BlockOrder::Fixed,
            eps_stop: 0.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!(
                "damping rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if !(self.eps_stop >= 0.0 && self.eps_stop.is_finite()) {
            return Err(Error::Config(format!(
                "eps_stop must be finite and >= 0, got {}",
                self.eps_stop
            )));
        }
        Ok(())
    }
}

/// Interior message carrier: a mean vector with one scalar precision kept
/// with its sign. Magnitudes always stay within `[PREC_MIN, PREC_MAX]`.
#[derive(Debug, Clone)]
struct SignedMessage {
    mean: ComplexVector,
    prec: f64,
}

impl SignedMessage {
    fn from_message(msg: GaussianMessage) -> Self {
        let prec = msg.precision();
        SignedMessage {
            mean: msg.mean,
            prec,
        }
    }
}

/// Clamps a precision's magnitude into `[PREC_MIN, PREC_MAX]` while keeping
/// its sign (an exact zero counts as positive), so the value stays usable as
/// a divisor without discarding which direction the information flows.
fn clamp_signed(raw: f64) -> f64 {
    let magnitude = raw.abs().clamp(PREC_MIN, PREC_MAX);
    if raw < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Extrinsic message by natural-parameter subtraction: the belief
/// `N(mean, 1/belief_prec)` divided by the incoming message. The precision
/// is the signed difference of the precisions (magnitude-clamped so the
/// division below stays finite), and the mean is recovered from the exact
/// natural parameter `theta = belief_prec*belief_mean - in_prec*in_mean`.
/// Whenever the raw difference is within the clamp bounds, multiplying this
/// message back into `incoming` reproduces the belief exactly.
fn signed_extrinsic(
    belief_mean: &[Complex64],
    belief_prec: f64,
    incoming: &SignedMessage,
) -> SignedMessage {
    debug_assert_eq!(belief_mean.len(), incoming.mean.len());
    let denom = clamp_signed(belief_prec - incoming.prec);
    let mean = belief_mean
        .iter()
        .zip(&incoming.mean)
        .map(|(b, i)| (belief_prec * b - incoming.prec * i) / denom)
        .collect();
    SignedMessage { mean, prec: denom }
}

/// Linear blend `rho*raw + (1-rho)*old` of mean and signed precision; the
/// blended precision's magnitude is re-clamped because two in-bound values
/// of opposite sign can blend arbitrarily close to zero.
fn blend_signed(raw: &SignedMessage, old: &SignedMessage, rho: f64) -> SignedMessage {
    let keep = 1.0 - rho;
    let mean = raw
        .mean
        .iter()
        .zip(&old.mean)
        .map(|(r, o)| r * rho + o * keep)
        .collect();
    SignedMessage {
        mean,
        prec: clamp_signed(rho * raw.prec + keep * old.prec),
    }
}

/// Damps `raw` against the stored previous value (the first computation is
/// returned as-is) and records the result as the new damping memory.
fn damp_signed(raw: SignedMessage, old: &mut Option<SignedMessage>, rho: f64) -> SignedMessage {
    let next = match old.as_ref() {
        Some(prev) => blend_signed(&raw, prev, rho),
        None => raw,
    };
    *old = Some(next.clone());
    next
}

/// Posterior of the zero-mean Gaussian prior under a signed pseudo-prior
/// message: the natural parameters add, so `eta1 = 1/sigma_x^2 + gamma1`
/// (kept within the precision bounds) and `xhat1 = (gamma1/eta1) r1`.
/// Shared by all engines so their roundings agree bit for bit.
fn denoise_signal(prior: &GaussianPrior, r1: &SignedMessage) -> (ComplexVector, f64) {
    let gamma1 = r1.prec;
    let eta1 = (1.0 / prior.variance() + gamma1).clamp(PREC_MIN, PREC_MAX);
    let shrink = gamma1 / eta1;
    let mean = r1.mean.iter().map(|v| shrink * v).collect();
    (mean, eta1)
}

/// Everything the iteration carries between steps: the signal-side message
/// `(r2, gamma2)`, the per-block measurement-side messages `(p2, tau2)`,
/// and the previous direction-1 messages retained as damping memory (absent
/// until each quantity is first computed, so first updates are undamped).
/// Direction-2 updates damp against the standing `r2`/`p2` values, which
/// always exist from initialization.
///
/// Precisions are stored with their sign: [`SolverState::block_precision`]
/// can legitimately return negative values mid-run while a block's
/// measurement message is still less informative than the belief it came
/// from. Magnitudes always stay within the global clamp bounds.
#[derive(Debug, Clone)]
pub struct SolverState {
    r2: SignedMessage,
    p2: Vec<SignedMessage>,
    r1_old: Option<SignedMessage>,
    p1_old: Vec<Option<SignedMessage>>,
}

impl SolverState {
    /// Builds a state from explicit initial messages (damping memory empty).
    pub fn new(r2: GaussianMessage, p2: Vec<GaussianMessage>) -> Result<Self> {
        if p2.is_empty() {
            return Err(Error::Precondition(
                "solver state needs at least one measurement block".into(),
            ));
        }
        let p1_old = vec![None; p2.len()];
        Ok(SolverState {
            r2: SignedMessage::from_message(r2),
            p2: p2.into_iter().map(SignedMessage::from_message).collect(),
            r1_old: None,
            p1_old,
        })
    }

    pub fn input_mean(&self) -> &[Complex64] {
        &self.r2.mean
    }

    pub fn input_precision(&self) -> f64 {
        self.r2.prec
    }

    pub fn block_mean(&self, l: usize) -> &[Complex64] {
        &self.p2[l].mean
    }

    pub fn block_precision(&self, l: usize) -> f64 {
        self.p2[l].prec
    }

    pub fn block_count(&self) -> usize {
        self.p2.len()
    }
}

/// Random initialization: `r2 = 0` with the prior's precision, and per
/// block `p2 = y e^{j phi}` with i.i.d. uniform phases and
/// `tau2 = 1 / mean(y^2)` (falling back to 1 when the observations carry no
/// energy). All randomness is consumed here, before any iteration runs.
pub fn initialize_state(
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
    prior: &GaussianPrior,
    rng: &mut RngHandle,
) -> Result<SolverState> {
    let (n, _) = validate_problem(operators, observations)?;
    let r2 = GaussianMessage::new(vec![Complex64::new(0.0, 0.0); n], 1.0 / prior.variance())?;
    let mut p2 = Vec::with_capacity(operators.len());
    for y in observations {
        let mean: ComplexVector = y
            .iter()
            .map(|&ym| {
                let phi = rng.uniform_phase();
                ym * Complex64::new(phi.cos(), phi.sin())
            })
            .collect();
        let energy: f64 = y.iter().map(|v| v * v).sum();
        p2.push(GaussianMessage::new(mean, initial_tau(energy, y.len()))?);
    }
    SolverState::new(r2, p2)
}

/// `1 / mean(y^2)` with the zero-energy fallback to 1.
fn initial_tau(energy_sum: f64, count: usize) -> f64 {
    let mean = energy_sum / count as f64;
    if mean > 0.0 {
        1.0 / mean
    } else {
        1.0
    }
}

/// Output of one linear-estimation step for one active block. `eta2 >=
/// gamma2` whenever every block precision is non-negative (each `Q_ii` is
/// then at most `1/gamma2`).
#[derive(Debug, Clone)]
pub struct LmmseResult {
    pub xhat2: ComplexVector,
    pub eta2: f64,
    pub zhat2: ComplexVector,
    pub lambda2: f64,
}

/// Standalone linear estimation over all blocks with projection onto one
/// active block, computing the adjoints afresh (costs one adjoint per block
/// plus one forward application). The iteration engines use the same kernel
/// with cached adjoints instead.
pub fn lmmse_update(
    r2: &GaussianMessage,
    blocks: &[(&dyn SensingOperator, &GaussianMessage)],
    active: usize,
) -> Result<LmmseResult> {
    if blocks.is_empty() || active >= blocks.len() {
        return Err(Error::Precondition(format!(
            "active block {} out of range for {} blocks",
            active,
            blocks.len()
        )));
    }
    let grams: Vec<&[f64]> = blocks
        .iter()
        .map(|(op, _)| op.gram_diagonal())
        .collect::<Result<_>>()?;
    let adjoints: Vec<ComplexVector> = blocks
        .iter()
        .map(|(op, p2)| op.adjoint(&p2.mean))
        .collect::<Result<_>>()?;
    let tau2: Vec<f64> = blocks.iter().map(|(_, p2)| p2.precision()).collect();
    let (q, xhat2, eta2) = lmmse_core(&r2.mean, r2.precision(), &tau2, &adjoints, &grams);
    let (op, p2) = blocks[active];
    let zhat2 = op.apply(&xhat2)?;
    let lambda2 = pooled_precision(op.row_gram_trace(&q)?, p2.len());
    Ok(LmmseResult {
        xhat2,
        eta2,
        zhat2,
        lambda2,
    })
}

/// Diagonal-Gram linear estimation shared by every solver path:
///
///   Q_ii   = 1 / (gamma2 + sum_l tau2_l g_l[i])
///   xhat2  = Q (gamma2 r2 + sum_l tau2_l adjoint_l)
///   eta2   = 1 / mean(Q_ii)
///
/// where `adjoint_l` caches `A_l^H p2_l`. The per-entry posterior precision
/// `gamma2 + d_i` is floored at `PREC_MIN` so the reciprocal stays finite
/// even when negative block precisions transiently outweigh the signal-side
/// precision; for all-positive inputs the floor never engages. Returns
/// `diag(Q)` for the per-block trace computations.
fn lmmse_core(
    r2_mean: &[Complex64],
    gamma2: f64,
    tau2: &[f64],
    adjoints: &[ComplexVector],
    grams: &[&[f64]],
) -> (Vec<f64>, ComplexVector, f64) {
    let n = r2_mean.len();

    let mut d = vec![0.0; n];
    for (t, g) in tau2.iter().zip(grams) {
        for (di, gi) in d.iter_mut().zip(*g) {
            *di += t * gi;
        }
    }
    let q: Vec<f64> = d
        .iter()
        .map(|di| 1.0 / (gamma2 + di).max(PREC_MIN))
        .collect();

    let mut s = vec![Complex64::new(0.0, 0.0); n];
    for (t, a) in tau2.iter().zip(adjoints) {
        for (si, ai) in s.iter_mut().zip(a) {
            *si += *t * ai;
        }
    }

    let xhat2: ComplexVector = q
        .iter()
        .zip(r2_mean.iter().zip(&s))
        .map(|(qi, (ri, si))| qi * (gamma2 * ri + si))
        .collect();
    let eta2 = 1.0 / (q.iter().sum::<f64>() / n as f64);
    (q, xhat2, eta2)
}

/// Block-sequential (or block-parallel) solver over `L` measurement blocks
/// with per-block measurement-side precisions. Runs from a fresh random
/// initialization; see [`stochastic_vamp_run_from`] for the loop itself.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_vamp_run(
    x_true: Option<&[Complex64]>,
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
    prior: &GaussianPrior,
    channel: &RicianChannel,
    config: &SolverConfig,
    rng: &mut RngHandle,
) -> Result<(ComplexVector, Vec<TraceRecord>)> {
    let state = initialize_state(operators, observations, prior, rng)?;
    stochastic_vamp_run_from(
        state,
        x_true,
        operators,
        observations,
        prior,
        channel,
        config,
        rng,
    )
}

/// Full-batch solver: one shared measurement-side precision across all
/// blocks (the concatenated single-measurement model). Initialization
/// matches [`initialize_state`] except that the initial `tau2` is pooled
/// over all blocks' observations.
#[allow(clippy::too_many_arguments)]
pub fn vamp_run(
    x_true: Option<&[Complex64]>,
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
    prior: &GaussianPrior,
    channel: &RicianChannel,
    config: &SolverConfig,
    rng: &mut RngHandle,
) -> Result<(ComplexVector, Vec<TraceRecord>)> {
    let mut state = initialize_state(operators, observations, prior, rng)?;
    // Pool the initial measurement-side precision over the concatenation.
    let total_energy: f64 = observations
        .iter()
        .map(|y| y.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let total_count: usize = observations.iter().map(|y| y.len()).sum();
    let tau = initial_tau(total_energy, total_count);
    for p2 in &mut state.p2 {
        p2.prec = tau;
    }
    vamp_run_from(
        state,
        x_true,
        operators,
        observations,
        prior,
        channel,
        config,
        rng,
    )
}

/// Checks problem shape consistency and the diagonal-Gram capability;
/// returns the signal dimension and per-block measurement counts.
fn validate_problem(
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
) -> Result<(usize, Vec<usize>)> {
    if operators.is_empty() {
        return Err(Error::Precondition(
            "at least one measurement block is required".into(),
        ));
    }
    if operators.len() != observations.len() {
        return Err(Error::Dimension {
            what: "observation blocks",
            expected: operators.len(),
            got: observations.len(),
        });
    }
    let n = operators[0].input_dim();
    let mut m = Vec::with_capacity(operators.len());
    for (op, y) in operators.iter().zip(observations) {
        if op.input_dim() != n {
            return Err(Error::Dimension {
                what: "operator input dimension",
                expected: n,
                got: op.input_dim(),
            });
        }
        if op.output_dim() != y.len() {
            return Err(Error::Dimension {
                what: "observation length",
                expected: op.output_dim(),
                got: y.len(),
            });
        }
        if !op.has_diagonal_gram() {
            return Err(Error::Capability(
                "the solver's fast linear estimator needs operators with diagonal A^H A",
            ));
        }
        m.push(y.len());
    }
    Ok((n, m))
}

fn check_state_shapes(state: &SolverState, n: usize, m: &[usize]) -> Result<()> {
    if state.r2.mean.len() != n {
        return Err(Error::Dimension {
            what: "state signal-side message",
            expected: n,
            got: state.r2.mean.len(),
        });
    }
    if state.p2.len() != m.len() {
        return Err(Error::Dimension {
            what: "state block count",
            expected: m.len(),
            got: state.p2.len(),
        });
    }
    for (p2, &ml) in state.p2.iter().zip(m) {
        if p2.mean.len() != ml {
            return Err(Error::Dimension {
                what: "state block message",
                expected: ml,
                got: p2.mean.len(),
            });
        }
    }
    Ok(())
}

fn ensure_finite_vec(
    what: &'static str,
    v: &[Complex64],
    iteration: usize,
    block: usize,
) -> Result<()> {
    if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite {
            what,
            iteration,
            block,
        });
    }
    Ok(())
}

fn ensure_finite_scalar(what: &'static str, s: f64, iteration: usize, block: usize) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::NonFinite {
            what,
            iteration,
            block,
        });
    }
    Ok(())
}

fn trace_nmse(x_true: Option<&[Complex64]>, xhat1: &[Complex64]) -> Result<Option<f64>> {
    match x_true {
        Some(xt) => Ok(Some(nmse_db(nmse(xt, xhat1)?))),
        None => Ok(None),
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn relative_change(current: &[Complex64], previous: &[Complex64]) -> f64 {
    let diff: f64 = current
        .iter()
        .zip(previous)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let base = l2_norm(previous);
    if base > 0.0 {
        diff / base
    } else {
        f64::INFINITY
    }
}

/// The block-stochastic iteration from an explicit starting state.
///
/// Each inner step over a block runs: linear estimation (from the current
/// global state), damped extrinsic messages toward the denoisers, the two
/// denoisers, and damped extrinsic messages back (blended against the
/// standing signal- and measurement-side messages). The extrinsic precisions
/// keep their sign throughout: early on, the magnitude channel's posterior
/// is often broader than its pseudo-prior, so the subtraction comes out
/// negative — carried through, it makes the linear estimator subtract the
/// still-random parts of the measurement messages instead of trusting them,
/// and damping in both directions keeps those sign flips from oscillating.
/// Under [`Schedule::Sequential`] the global signal-side message is
/// refreshed inside the block loop; under [`Schedule::Parallel`] all blocks
/// are computed from one snapshot and committed together. The random number
/// generator is consumed only when `block_order` is
/// [`BlockOrder::RandomPerEpoch`].
#[allow(clippy::too_many_arguments)]
pub fn stochastic_vamp_run_from(
    mut state: SolverState,
    x_true: Option<&[Complex64]>,
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
    prior: &GaussianPrior,
    channel: &RicianChannel,
    config: &SolverConfig,
    rng: &mut RngHandle,
) -> Result<(ComplexVector, Vec<TraceRecord>)> {
    config.validate()?;
    let (n, m) = validate_problem(operators, observations)?;
    check_state_shapes(&state, n, &m)?;
    if let Some(xt) = x_true {
        if xt.len() != n {
            return Err(Error::Dimension {
                what: "true signal",
                expected: n,
                got: xt.len(),
            });
        }
    }
    let l_count = operators.len();
    let grams: Vec<&[f64]> = operators
        .iter()
        .map(|op| op.gram_diagonal())
        .collect::<Result<_>>()?;

    // Adjoint cache, one entry per block, refreshed whenever that block's
    // p2 commits; together with the one forward application per block
    // visit, each outer iteration costs exactly 2L operator calls.
    let mut adjoints: Vec<ComplexVector> = operators
        .iter()
        .zip(&state.p2)
        .map(|(op, p2)| op.adjoint(&p2.mean))
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut xhat1: ComplexVector = Vec::new();
    let mut previous_epoch: Option<ComplexVector> = None;

    for k in 0..config.iterations {
        match config.schedule {
            Schedule::Sequential => {
                let order: Vec<usize> = match config.block_order {
                    BlockOrder::Fixed => (0..l_count).collect(),
                    BlockOrder::RandomPerEpoch => permutation(l_count, rng),
                };
                for &l in &order {
                    let step_start = Instant::now();
                    let tau2: Vec<f64> = state.p2.iter().map(|p| p.prec).collect();
                    let (q, xhat2, eta2) =
                        lmmse_core(&state.r2.mean, state.r2.prec, &tau2, &adjoints, &grams);
                    audit_lmmse(&xhat2, eta2, state.r2.prec, &tau2, k, l + 1)?;
                    let eta2 = eta2.clamp(PREC_MIN, PREC_MAX);

                    let zhat2 = operators[l].apply(&xhat2)?;
                    let lambda2 = pooled_precision(operators[l].row_gram_trace(&q)?, m[l]);
                    ensure_finite_vec("zhat2", &zhat2, k, l + 1)?;
                    ensure_finite_scalar("lambda2", lambda2, k, l + 1)?;
                    let lambda2 = lambda2.clamp(PREC_MIN, PREC_MAX);

                    // Direction 2 -> 1, damped (first visit undamped).
                    let r1 = damp_signed(
                        signed_extrinsic(&xhat2, eta2, &state.r2),
                        &mut state.r1_old,
                        config.rho,
                    );
                    ensure_finite_vec("r1", &r1.mean, k, l + 1)?;
                    ensure_finite_scalar("gamma1", r1.prec, k, l + 1)?;
                    let p1 = damp_signed(
                        signed_extrinsic(&zhat2, lambda2, &state.p2[l]),
                        &mut state.p1_old[l],
                        config.rho,
                    );
                    ensure_finite_vec("p1", &p1.mean, k, l + 1)?;
                    ensure_finite_scalar("tau1", p1.prec, k, l + 1)?;

                    // Denoising.
                    let (xh1, eta1) = denoise_signal(prior, &r1);
                    ensure_finite_vec("xhat1", &xh1, k, l + 1)?;
                    let (zh1, var_sum) = channel.posterior_stats(
                        &p1.mean,
                        p1.prec.max(PREC_MIN),
                        &observations[l],
                    )?;
                    ensure_finite_vec("zhat1", &zh1, k, l + 1)?;
                    let lambda1 = pooled_precision(var_sum, m[l]);
                    ensure_finite_scalar("lambda1", lambda1, k, l + 1)?;
                    let lambda1 = lambda1.clamp(PREC_MIN, PREC_MAX);

                    // Direction 1 -> 2, damped against the standing messages.
                    state.r2 = blend_signed(&signed_extrinsic(&xh1, eta1, &r1), &state.r2, config.rho);
                    state.p2[l] =
                        blend_signed(&signed_extrinsic(&zh1, lambda1, &p1), &state.p2[l], config.rho);
                    adjoints[l] = operators[l].adjoint(&state.p2[l].mean)?;
                    debug_assert_precisions(&state);

                    xhat1 = xh1;
                    trace.push(TraceRecord {
                        iteration: k,
                        block: l + 1,
                        nmse_db: trace_nmse(x_true, &xhat1)?,
                        eta1,
                        gamma1: r1.prec,
                        tau1: p1.prec,
                        wall_ms: step_start.elapsed().as_secs_f64() * 1e3,
                    });
                }
            }
            Schedule::Parallel => {
                let step_start = Instant::now();
                let tau2: Vec<f64> = state.p2.iter().map(|p| p.prec).collect();
                let (q, xhat2, eta2) =
                    lmmse_core(&state.r2.mean, state.r2.prec, &tau2, &adjoints, &grams);
                audit_lmmse(&xhat2, eta2, state.r2.prec, &tau2, k, 0)?;
                let eta2 = eta2.clamp(PREC_MIN, PREC_MAX);

                let mut zhat2 = Vec::with_capacity(l_count);
                let mut lambda2 = Vec::with_capacity(l_count);
                for l in 0..l_count {
                    let z = operators[l].apply(&xhat2)?;
                    let lam = pooled_precision(operators[l].row_gram_trace(&q)?, m[l]);
                    ensure_finite_vec("zhat2", &z, k, l + 1)?;
                    ensure_finite_scalar("lambda2", lam, k, l + 1)?;
                    zhat2.push(z);
                    lambda2.push(lam.clamp(PREC_MIN, PREC_MAX));
                }

                let r1 = damp_signed(
                    signed_extrinsic(&xhat2, eta2, &state.r2),
                    &mut state.r1_old,
                    config.rho,
                );
                ensure_finite_vec("r1", &r1.mean, k, 0)?;
                ensure_finite_scalar("gamma1", r1.prec, k, 0)?;
                let mut p1 = Vec::with_capacity(l_count);
                for (l, z) in zhat2.iter().enumerate() {
                    let msg = damp_signed(
                        signed_extrinsic(z, lambda2[l], &state.p2[l]),
                        &mut state.p1_old[l],
                        config.rho,
                    );
                    ensure_finite_vec("p1", &msg.mean, k, l + 1)?;
                    ensure_finite_scalar("tau1", msg.prec, k, l + 1)?;
                    p1.push(msg);
                }

                let (xh1, eta1) = denoise_signal(prior, &r1);
                ensure_finite_vec("xhat1", &xh1, k, 0)?;
                state.r2 = blend_signed(&signed_extrinsic(&xh1, eta1, &r1), &state.r2, config.rho);
                xhat1 = xh1;

                for l in 0..l_count {
                    let (zh1, var_sum) = channel.posterior_stats(
                        &p1[l].mean,
                        p1[l].prec.max(PREC_MIN),
                        &observations[l],
                    )?;
                    ensure_finite_vec("zhat1", &zh1, k, l + 1)?;
                    let lambda1 = pooled_precision(var_sum, m[l]);
                    ensure_finite_scalar("lambda1", lambda1, k, l + 1)?;
                    let lambda1 = lambda1.clamp(PREC_MIN, PREC_MAX);
                    state.p2[l] =
                        blend_signed(&signed_extrinsic(&zh1, lambda1, &p1[l]), &state.p2[l], config.rho);
                    adjoints[l] = operators[l].adjoint(&state.p2[l].mean)?;
                }
                debug_assert_precisions(&state);

                let wall_ms = step_start.elapsed().as_secs_f64() * 1e3;
                let nm = trace_nmse(x_true, &xhat1)?;
                for l in 0..l_count {
                    trace.push(TraceRecord {
                        iteration: k,
                        block: l + 1,
                        nmse_db: nm,
                        eta1,
                        gamma1: r1.prec,
                        tau1: p1[l].prec,
                        wall_ms,
                    });
                }
            }
        }

        if stop_now(config.eps_stop, &xhat1, &mut previous_epoch) {
            break;
        }
    }
    Ok((xhat1, trace))
}

/// The full-batch iteration from an explicit starting state. All blocks
/// must carry the same measurement-side precision (the concatenated model
/// has one `tau2`); the per-block mean vectors remain separate only as
/// storage layout. Conceptually identical to the parallel schedule above
/// except that `lambda2`, `lambda1`, and hence `tau1`, `tau2` are pooled
/// over the concatenation instead of kept per block.
#[allow(clippy::too_many_arguments)]
pub fn vamp_run_from(
    mut state: SolverState,
    x_true: Option<&[Complex64]>,
    operators: &[&dyn SensingOperator],
    observations: &[RealVector],
    prior: &GaussianPrior,
    channel: &RicianChannel,
    config: &SolverConfig,
    _rng: &mut RngHandle,
) -> Result<(ComplexVector, Vec<TraceRecord>)> {
    config.validate()?;
    let (n, m) = validate_problem(operators, observations)?;
    check_state_shapes(&state, n, &m)?;
    if let Some(xt) = x_true {
        if xt.len() != n {
            return Err(Error::Dimension {
                what: "true signal",
                expected: n,
                got: xt.len(),
            });
        }
    }
    let tau_first = state.p2[0].prec;
    if state.p2.iter().any(|p| p.prec != tau_first) {
        return Err(Error::Precondition(
            "the full-batch solver needs one shared tau2; blocks disagree".into(),
        ));
    }

    let l_count = operators.len();
    let total_m: usize = m.iter().sum();
    let grams: Vec<&[f64]> = operators
        .iter()
        .map(|op| op.gram_diagonal())
        .collect::<Result<_>>()?;
    let mut adjoints: Vec<ComplexVector> = operators
        .iter()
        .zip(&state.p2)
        .map(|(op, p2)| op.adjoint(&p2.mean))
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut xhat1: ComplexVector = Vec::new();
    let mut previous_epoch: Option<ComplexVector> = None;

    for k in 0..config.iterations {
        let step_start = Instant::now();
        let tau2_scalar = state.p2[0].prec;
        let tau2 = vec![tau2_scalar; l_count];
        let (q, xhat2, eta2) = lmmse_core(&state.r2.mean, state.r2.prec, &tau2, &adjoints, &grams);
        audit_lmmse(&xhat2, eta2, state.r2.prec, &tau2, k, 0)?;
        let eta2 = eta2.clamp(PREC_MIN, PREC_MAX);

        let mut zhat2 = Vec::with_capacity(l_count);
        let mut row_trace_sum = 0.0;
        for (l, op) in operators.iter().enumerate() {
            let z = op.apply(&xhat2)?;
            ensure_finite_vec("zhat2", &z, k, l + 1)?;
            zhat2.push(z);
            row_trace_sum += op.row_gram_trace(&q)?;
        }
        let lambda2 = pooled_precision(row_trace_sum, total_m);
        ensure_finite_scalar("lambda2", lambda2, k, 0)?;
        let lambda2 = lambda2.clamp(PREC_MIN, PREC_MAX);

        let r1 = damp_signed(
            signed_extrinsic(&xhat2, eta2, &state.r2),
            &mut state.r1_old,
            config.rho,
        );
        ensure_finite_vec("r1", &r1.mean, k, 0)?;
        ensure_finite_scalar("gamma1", r1.prec, k, 0)?;
        let mut p1 = Vec::with_capacity(l_count);
        for (l, z) in zhat2.iter().enumerate() {
            let msg = damp_signed(
                signed_extrinsic(z, lambda2, &state.p2[l]),
                &mut state.p1_old[l],
                config.rho,
            );
            ensure_finite_vec("p1", &msg.mean, k, l + 1)?;
            ensure_finite_scalar("tau1", msg.prec, k, l + 1)?;
            p1.push(msg);
        }

        let (xh1, eta1) = denoise_signal(prior, &r1);
        ensure_finite_vec("xhat1", &xh1, k, 0)?;
        state.r2 = blend_signed(&signed_extrinsic(&xh1, eta1, &r1), &state.r2, config.rho);
        xhat1 = xh1;

        // Pooled measurement-side denoising: per-block posterior means with
        // one precision from the concatenated average variance.
        let tau1_scalar = p1[0].prec;
        let mut z_means = Vec::with_capacity(l_count);
        let mut variance_sum = 0.0;
        for (l, p1_l) in p1.iter().enumerate() {
            let (mean, var) = channel.posterior_stats(
                &p1_l.mean,
                tau1_scalar.max(PREC_MIN),
                &observations[l],
            )?;
            ensure_finite_vec("zhat1", &mean, k, l + 1)?;
            z_means.push(mean);
            variance_sum += var;
        }
        let lambda1 = pooled_precision(variance_sum, total_m);
        ensure_finite_scalar("lambda1", lambda1, k, 0)?;
        let lambda1 = lambda1.clamp(PREC_MIN, PREC_MAX);
        for (l, mean) in z_means.iter().enumerate() {
            state.p2[l] = blend_signed(&signed_extrinsic(mean, lambda1, &p1[l]), &state.p2[l], config.rho);
            adjoints[l] = operators[l].adjoint(&state.p2[l].mean)?;
        }
        debug_assert_precisions(&state);

        let wall_ms = step_start.elapsed().as_secs_f64() * 1e3;
        let nm = trace_nmse(x_true, &xhat1)?;
        for (l, p1_l) in p1.iter().enumerate() {
            trace.push(TraceRecord {
                iteration: k,
                block: l + 1,
                nmse_db: nm,
                eta1,
                gamma1: r1.prec,
                tau1: p1_l.prec,
                wall_ms,
            });
        }

        if stop_now(config.eps_stop, &xhat1, &mut previous_epoch) {
            break;
        }
    }
    Ok((xhat1, trace))
}

/// Finiteness audit of a linear-estimation output, plus the
/// information-monotonicity check `eta2 >= gamma2`, which holds exactly in
/// real arithmetic whenever every block precision is non-negative (each
/// `Q_ii` is then at most `1/gamma2`). A block carrying a negative
/// precision legitimately lowers `eta2` below `gamma2`, so the check is
/// skipped while any `tau2` is negative.
fn audit_lmmse(
    xhat2: &[Complex64],
    eta2: f64,
    gamma2: f64,
    tau2: &[f64],
    iteration: usize,
    block: usize,
) -> Result<()> {
    ensure_finite_vec("xhat2", xhat2, iteration, block)?;
    ensure_finite_scalar("eta2", eta2, iteration, block)?;
    if tau2.iter().all(|t| *t >= 0.0) && eta2 < gamma2 * (1.0 - MONOTONE_SLACK) {
        return Err(Error::Invariant {
            what: "linear estimation decreased the signal-side precision",
            iteration,
            block,
        });
    }
    Ok(())
}

fn debug_assert_precisions(state: &SolverState) {
    debug_assert!(
        (PREC_MIN..=PREC_MAX).contains(&state.r2.prec.abs()),
        "r2 precision magnitude escaped the clamp bounds"
    );
    for p2 in &state.p2 {
        debug_assert!(
            (PREC_MIN..=PREC_MAX).contains(&p2.prec.abs()),
            "p2 precision magnitude escaped the clamp bounds"
        );
    }
}

/// Early-stop bookkeeping: updates the end-of-epoch snapshot and reports
/// whether the iteration should stop.
fn stop_now(eps_stop: f64, xhat1: &[Complex64], previous: &mut Option<ComplexVector>) -> bool {
    if eps_stop <= 0.0 {
        return false;
    }
    let stop = previous
        .as_ref()
        .map(|prev| relative_change(xhat1, prev) < eps_stop)
        .unwrap_or(false);
    *previous = Some(xhat1.to_vec());
    stop
}

/// Uniform random permutation of `0..l` (Fisher-Yates).
fn permutation(l: usize, rng: &mut RngHandle) -> Vec<usize> {
    let mut order: Vec<usize> = (0..l).collect();
    for i in (1..l).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::cdp::sample_cdp_operators;
    use crate::sensing::dense::DenseOperator;
    use crate::sensing::haar::sample_haar_columns;

    fn scalar_msg(re: f64, prec: f64) -> GaussianMessage {
        GaussianMessage::new(vec![Complex64::new(re, 0.0)], prec).unwrap()
    }

    #[test]
    fn lmmse_scalar_example() {
        // N = M = 1, A = [1], gamma2 = 1, tau2 = 1, r2 = 2, p2 = 4:
        // Q = 1/2, xhat2 = 3, eta2 = 2, zhat2 = 3, lambda2 = 2.
        let op = DenseOperator::identity(1).unwrap();
        let r2 = scalar_msg(2.0, 1.0);
        let p2 = scalar_msg(4.0, 1.0);
        let out = lmmse_update(&r2, &[(&op, &p2)], 0).unwrap();
        assert!((out.xhat2[0] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((out.eta2 - 2.0).abs() < 1e-15);
        assert!((out.zhat2[0] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((out.lambda2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lmmse_vanishing_tau_keeps_the_prior_message() {
        let op = DenseOperator::identity(4).unwrap();
        let mut rng = RngHandle::new(5, 0);
        let r2 = GaussianMessage::new(rng.standard_complex_vector(4), 2.0).unwrap();
        let p2 = GaussianMessage::new(rng.standard_complex_vector(4), PREC_MIN).unwrap();
        let out = lmmse_update(&r2, &[(&op, &p2)], 0).unwrap();
        for (a, b) in out.xhat2.iter().zip(&r2.mean) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!((out.eta2 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lmmse_unitary_block_doubles_precisions() {
        // Unitary operator, gamma2 = tau2 = 1: Q = I/2, eta2 = lambda2 = 2.
        let mut rng = RngHandle::new(6, 0);
        let op = sample_cdp_operators(4, 4, 1, &mut rng).unwrap().remove(0);
        let r2 = GaussianMessage::new(rng.standard_complex_vector(16), 1.0).unwrap();
        let p2 = GaussianMessage::new(rng.standard_complex_vector(16), 1.0).unwrap();
        let out = lmmse_update(&r2, &[(&op, &p2)], 0).unwrap();
        assert!((out.eta2 - 2.0).abs() < 1e-12);
        assert!((out.lambda2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lmmse_negative_block_precision_subtracts_information() {
        // Unitary operator, gamma2 = 1, tau2 = -0.5: Q = (1 - 0.5)^-1 I = 2I,
        // eta2 = 0.5 < gamma2 and xhat2 = 2(r2 - 0.5 A^H p2).
        let mut rng = RngHandle::new(8, 0);
        let op = sample_cdp_operators(4, 4, 1, &mut rng).unwrap().remove(0);
        let r2_mean = rng.standard_complex_vector(16);
        let p2_mean = rng.standard_complex_vector(16);
        let adjoint = op.adjoint(&p2_mean).unwrap();
        let grams = [op.gram_diagonal().unwrap()];
        let (q, xhat2, eta2) = lmmse_core(&r2_mean, 1.0, &[-0.5], &[adjoint.clone()], &grams);
        assert!((eta2 - 0.5).abs() < 1e-12);
        for (qi, (xi, (ri, ai))) in q.iter().zip(xhat2.iter().zip(r2_mean.iter().zip(&adjoint))) {
            assert!((qi - 2.0).abs() < 1e-12);
            assert!((xi - 2.0 * (ri - 0.5 * ai)).norm() < 1e-12);
        }
    }

    #[test]
    fn signed_extrinsic_recovers_the_belief() {
        // Dividing the belief by the incoming message and multiplying back
        // must reproduce the belief's natural parameters: precisions add
        // back to eta (1e-10 relative) and theta_out + theta_in = theta_b.
        let mut rng = RngHandle::new(31, 0);
        let belief_mean = rng.standard_complex_vector(6);
        let incoming = SignedMessage {
            mean: rng.standard_complex_vector(6),
            prec: 0.7,
        };
        let eta = 2.3;
        let out = signed_extrinsic(&belief_mean, eta, &incoming);
        assert!(((out.prec + incoming.prec) - eta).abs() < 1e-10 * eta);
        for ((o, i), b) in out.mean.iter().zip(&incoming.mean).zip(&belief_mean) {
            let recovered = out.prec * o + incoming.prec * i;
            assert!((recovered - eta * b).norm() < 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn signed_extrinsic_keeps_negative_information() {
        // A belief broader than the incoming message produces a NEGATIVE
        // extrinsic precision, and the natural parameter is still exact.
        let belief_mean = vec![Complex64::new(1.0, 0.0)];
        let incoming = SignedMessage {
            mean: vec![Complex64::new(2.0, 0.0)],
            prec: 0.5,
        };
        let out = signed_extrinsic(&belief_mean, 0.3, &incoming);
        assert!((out.prec - (-0.2)).abs() < 1e-15);
        // theta = 0.3*1 - 0.5*2 = -0.7, mean = -0.7 / -0.2 = 3.5.
        assert!((out.mean[0] - Complex64::new(3.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn clamp_signed_floors_and_caps_magnitudes() {
        assert_eq!(clamp_signed(0.0), PREC_MIN);
        assert_eq!(clamp_signed(5e-12), PREC_MIN);
        assert_eq!(clamp_signed(-5e-12), -PREC_MIN);
        assert_eq!(clamp_signed(3.25), 3.25);
        assert_eq!(clamp_signed(-3.25), -3.25);
        assert_eq!(clamp_signed(1e300), PREC_MAX);
        assert_eq!(clamp_signed(-1e300), -PREC_MAX);
    }

    #[test]
    fn initialization_magnitudes_and_fallbacks() {
        let mut rng = RngHandle::new(7, 3);
        let op = sample_haar_columns(6, 3, &mut rng).unwrap();
        let prior = GaussianPrior::new(1.0).unwrap();
        let y = vec![0.5, 0.0, 1.5, 2.0, 0.25, 0.75];
        let ops: Vec<&dyn SensingOperator> = vec![&op];

        let mut r1 = RngHandle::new(9, 3);
        let state = initialize_state(&ops, &[y.clone()], &prior, &mut r1).unwrap();
        assert_eq!(state.input_mean().len(), 3);
        assert!(state.input_mean().iter().all(|v| v.norm() == 0.0));
        assert!((state.input_precision() - 1.0).abs() < 1e-15);
        for (pm, ym) in state.block_mean(0).iter().zip(&y) {
            assert!((pm.norm() - ym).abs() < 1e-12 * (1.0 + ym));
        }
        let expect_tau = 1.0 / (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64);
        assert!((state.block_precision(0) - expect_tau).abs() < 1e-12);

        // Determinism under the same seed.
        let mut r2 = RngHandle::new(9, 3);
        let again = initialize_state(&ops, &[y], &prior, &mut r2).unwrap();
        assert_eq!(state.block_mean(0), again.block_mean(0));

        // Zero observations: p2 = 0 and tau2 falls back to 1.
        let mut r3 = RngHandle::new(9, 3);
        let zero = initialize_state(&ops, &[vec![0.0; 6]], &prior, &mut r3).unwrap();
        assert!(zero.block_mean(0).iter().all(|v| v.norm() == 0.0));
        assert!((zero.block_precision(0) - 1.0).abs() < 1e-15);
    }

    /// Small end-to-end phase-retrieval instance shared by the schedule
    /// tests: L Haar blocks of 30 rows on an N = 12 signal.
    fn small_problem(
        seed: u64,
        l: usize,
    ) -> (ComplexVector, Vec<crate::sensing::haar::HaarOperator>, Vec<RealVector>, f64) {
        let mut rng = RngHandle::new(seed, 0);
        let x = rng.standard_complex_vector(12);
        let mut op_rng = RngHandle::new(seed, 1);
        let ops: Vec<_> = (0..l)
            .map(|_| sample_haar_columns(30, 12, &mut op_rng).unwrap())
            .collect();
        let z: Vec<ComplexVector> = ops.iter().map(|op| op.apply(&x).unwrap()).collect();
        let z_refs: Vec<&[Complex64]> = z.iter().map(|v| v.as_slice()).collect();
        let gamma_w = crate::metrics::snr_to_noise_precision(30.0, &z_refs).unwrap();
        let channel = RicianChannel::new(gamma_w).unwrap();
        let mut noise_rng = RngHandle::new(seed, 2);
        let y: Vec<RealVector> = z
            .iter()
            .map(|zl| crate::metrics::generate_observation(&channel, zl, &mut noise_rng))
            .collect();
        (x, ops, y, gamma_w)
    }

    fn run_with(
        schedule: Schedule,
        vanilla: bool,
        seed: u64,
        l: usize,
        iters: usize,
    ) -> Vec<TraceRecord> {
        let (x, ops, y, gamma_w) = small_problem(seed, l);
        let op_refs: Vec<&dyn SensingOperator> = ops.iter().map(|o| o as &dyn SensingOperator).collect();
        let prior = GaussianPrior::new(1.0).unwrap();
        let channel = RicianChannel::new(gamma_w).unwrap();
        let config = SolverConfig {
            iterations: iters,
            rho: 0.95,
            schedule,
            block_order: BlockOrder::Fixed,
            eps_stop: 0.0,
        };
        let mut rng = RngHandle::new(seed, 3);
        let (_, trace) = if vanilla {
            vamp_run(Some(&x), &op_refs, &y, &prior, &channel, &config, &mut rng).unwrap()
        } else {
            stochastic_vamp_run(Some(&x), &op_refs, &y, &prior, &channel, &config, &mut rng)
                .unwrap()
        };
        trace
    }

    fn assert_traces_bit_identical(a: &[TraceRecord], b: &[TraceRecord]) {
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(b) {
            assert_eq!(ra.iteration, rb.iteration);
            assert_eq!(ra.block, rb.block);
            assert_eq!(
                ra.nmse_db.map(f64::to_bits),
                rb.nmse_db.map(f64::to_bits),
                "nmse differs at iteration {} block {}",
                ra.iteration,
                ra.block
            );
            assert_eq!(ra.eta1.to_bits(), rb.eta1.to_bits());
            assert_eq!(ra.gamma1.to_bits(), rb.gamma1.to_bits());
            assert_eq!(ra.tau1.to_bits(), rb.tau1.to_bits());
        }
    }

    #[test]
    fn single_block_schedules_coincide_bitwise() {
        let seq = run_with(Schedule::Sequential, false, 11, 1, 12);
        let par = run_with(Schedule::Parallel, false, 11, 1, 12);
        let van = run_with(Schedule::Parallel, true, 11, 1, 12);
        assert_traces_bit_identical(&seq, &par);
        assert_traces_bit_identical(&seq, &van);
    }

    #[test]
    fn two_block_haar_run_converges() {
        // 60 magnitude measurements of a 12-dim complex signal at 30 dB:
        // the sequential engine should lock in well below -20 dB.
        let trace = run_with(Schedule::Sequential, false, 29, 2, 120);
        let last = trace.last().unwrap().nmse_db.unwrap();
        assert!(last <= -20.0, "final NMSE {last} dB is above -20 dB");
    }

    #[test]
    fn sequential_emits_one_record_per_block_visit() {
        let trace = run_with(Schedule::Sequential, false, 13, 2, 5);
        assert_eq!(trace.len(), 10);
        for (i, rec) in trace.iter().enumerate() {
            assert_eq!(rec.iteration, i / 2);
            assert_eq!(rec.block, i % 2 + 1);
            assert!(rec.nmse_db.is_some());
        }
    }

    #[test]
    fn random_block_order_visits_every_block_each_epoch() {
        let (x, ops, y, gamma_w) = small_problem(17, 3);
        let op_refs: Vec<&dyn SensingOperator> = ops.iter().map(|o| o as &dyn SensingOperator).collect();
        let prior = GaussianPrior::new(1.0).unwrap();
        let channel = RicianChannel::new(gamma_w).unwrap();
        let config = SolverConfig {
            iterations: 6,
            rho: 0.95,
            schedule: Schedule::Sequential,
            block_order: BlockOrder::RandomPerEpoch,
            eps_stop: 0.0,
        };
        let mut rng = RngHandle::new(17, 3);
        let (_, trace) =
            stochastic_vamp_run(Some(&x), &op_refs, &y, &prior, &channel, &config, &mut rng)
                .unwrap();
        assert_eq!(trace.len(), 18);
        let mut saw_nonfixed = false;
        for k in 0..6 {
            let mut blocks: Vec<usize> = trace[3 * k..3 * (k + 1)].iter().map(|r| r.block).collect();
            if blocks != vec![1, 2, 3] {
                saw_nonfixed = true;
            }
            blocks.sort_unstable();
            assert_eq!(blocks, vec![1, 2, 3], "epoch {k} is not a permutation");
        }
        assert!(saw_nonfixed, "permutations never deviated from 1..L");
    }

    #[test]
    fn early_stop_cuts_the_trace_short() {
        // Start from messages pinned on the truth so consecutive epochs
        // barely move the signal estimate; the stop rule needs one full
        // epoch of history, so it fires right after the second epoch.
        let (x, ops, y, gamma_w) = small_problem(19, 2);
        let op_refs: Vec<&dyn SensingOperator> =
            ops.iter().map(|o| o as &dyn SensingOperator).collect();
        let prior = GaussianPrior::new(1.0).unwrap();
        let channel = RicianChannel::new(gamma_w).unwrap();
        let config = SolverConfig {
            iterations: 50,
            rho: 0.95,
            schedule: Schedule::Sequential,
            block_order: BlockOrder::Fixed,
            eps_stop: 0.5,
        };
        let r2 = GaussianMessage::new(x.clone(), 1e6).unwrap();
        let p2: Vec<GaussianMessage> = ops
            .iter()
            .map(|op| GaussianMessage::new(op.apply(&x).unwrap(), 1e6).unwrap())
            .collect();
        let state = SolverState::new(r2, p2).unwrap();
        let mut rng = RngHandle::new(19, 3);
        let (_, trace) = stochastic_vamp_run_from(
            state, Some(&x), &op_refs, &y, &prior, &channel, &config, &mut rng,
        )
        .unwrap();
        assert_eq!(trace.len(), 4, "expected exactly two epochs of two blocks");

        // The same run with the rule disabled goes the full distance.
        let full_config = SolverConfig {
            eps_stop: 0.0,
            ..config
        };
        let mut rng = RngHandle::new(19, 3);
        let (_, full) =
            stochastic_vamp_run(Some(&x), &op_refs, &y, &prior, &channel, &full_config, &mut rng)
                .unwrap();
        assert_eq!(full.len(), 100);
    }

    #[test]
    fn non_diagonal_gram_is_rejected() {
        let rows = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let op = DenseOperator::from_rows(2, 2, rows).unwrap();
        let ops: Vec<&dyn SensingOperator> = vec![&op];
        let prior = GaussianPrior::new(1.0).unwrap();
        let channel = RicianChannel::new(1.0).unwrap();
        let config = SolverConfig::default();
        let mut rng = RngHandle::new(1, 3);
        let err = stochastic_vamp_run(
            None,
            &ops,
            &[vec![1.0, 1.0]],
            &prior,
            &channel,
            &config,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn config_validation() {
        let bad_iters = SolverConfig {
            iterations: 0,
            ..SolverConfig::default()
        };
        assert!(bad_iters.validate().is_err());
        let bad_rho = SolverConfig {
            rho: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad_rho.validate().is_err());
        let bad_eps = SolverConfig {
            eps_stop: -1.0,
            ..SolverConfig::default()
        };
        assert!(bad_eps.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn vanilla_requires_shared_tau() {
        let (_, ops, y, gamma_w) = small_problem(23, 2);
        let op_refs: Vec<&dyn SensingOperator> = ops.iter().map(|o| o as &dyn SensingOperator).collect();
        let prior = GaussianPrior::new(1.0).unwrap();
        let channel = RicianChannel::new(gamma_w).unwrap();
        let mut rng = RngHandle::new(23, 3);
        let mut state = initialize_state(&op_refs, &y, &prior, &mut rng).unwrap();
        // Force disagreeing block precisions.
        state.p2[1].prec = 123.456;
        let err = vamp_run_from(
            state,
            None,
            &op_refs,
            &y,
            &prior,
            &channel,
            &SolverConfig::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
