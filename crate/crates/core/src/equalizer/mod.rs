//! Post-demodulation equalization stages.
//!
//! Three families operate on the subcarrier symbol matrix (rows = OFDM
//! symbols, columns = data subcarriers):
//! - `one_tap_equalize`: channel-estimate division plus common phase error
//!   removal; the linear baseline every other equalizer builds on.
//! - `NnEqualizer`: complex MLPs trained on pilot-known payload rows. One
//!   subnet per data subcarrier with 3·order hidden units each; the subnet
//!   input is either that subcarrier alone or the subcarrier's whole group,
//!   so cross-carrier nonlinear interactions are visible to the net.
//! - `dbp_equalize`: digital backpropagation on the waveform itself,
//!   before demodulation (inverse split-step with negated parameters).

mod io;
mod network;
mod rprop;

pub use io::{read_equalizer, write_equalizer};
pub use network::SubNetwork;
pub use rprop::{Rprop, RpropConfig};

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::fiber::{ssfm_propagate, Direction, FiberParams, LinkPlan};
use crate::modem::ChannelEstimate;
use crate::waveform::SampledWaveform;

/// Subcarrier grouping presets for the grouped equalizer. Sizes partition
/// the 210 data subcarriers in index order.
#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    Case1 = 1,
    Case2 = 2,
    Case3 = 3,
    Case4 = 4,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4];

    pub fn group_sizes(self) -> &'static [usize] {
        match self {
            CaseId::Case1 => &[80, 50, 80],
            CaseId::Case2 => &[55, 100, 55],
            CaseId::Case3 => &[30, 150, 30],
            CaseId::Case4 => &[51, 54, 54, 51],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
            CaseId::Case4 => "case4",
        }
    }
}

impl std::str::FromStr for CaseId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "case1" => Ok(CaseId::Case1),
            "2" | "case2" => Ok(CaseId::Case2),
            "3" | "case3" => Ok(CaseId::Case3),
            "4" | "case4" => Ok(CaseId::Case4),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown grouping case {other:?} (expected case1..case4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnKind {
    /// One independent net per data subcarrier (memoryless per-carrier map).
    PerCarrier,
    /// One net per subcarrier group; sees cross-carrier structure.
    Grouped(CaseId),
}

/// Training schedule. Stops on the epoch budget or when the cost has moved
/// by less than `plateau_rtol` (relatively) across `plateau_window` epochs.
///
/// When `val_fraction` is nonzero the last rows of the training slice are
/// held out; the weights returned are the iterate with the lowest holdout
/// cost, and training also stops once the holdout cost has not improved for
/// `patience` epochs. Full-batch RPROP on these small noisy batches will
/// otherwise drive the training cost to zero by memorizing the noise, which
/// destroys the net on unseen symbols.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub plateau_window: usize,
    pub plateau_rtol: f64,
    pub val_fraction: f64,
    pub patience: usize,
    /// L2 penalty weight added to the training gradient (not to the
    /// reported cost). Under sign-based RPROP this freezes weights whose
    /// data gradient stays below the penalty pull, which is what lets the
    /// wide grouped inputs train on short overhead slices without fitting
    /// noise. Zero disables it.
    pub weight_decay: f64,
    /// Grouped subnets first train with cross-carrier weights pinned to
    /// zero and inputs masked to their own subcarrier, then refine on the
    /// full group. The returned weights are the holdout-best across both
    /// stages, so the refinement stage can only keep cross-carrier
    /// structure that actually generalizes. No effect on width-1 inputs.
    pub warm_start: bool,
    /// Relative holdout improvement the refinement stage must show before
    /// its weights replace the warm-start result. Keeps holdout noise from
    /// swapping in refinements that are not real.
    pub min_delta_rel: f64,
    pub rprop: RpropConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            plateau_window: 10,
            plateau_rtol: 1e-6,
            val_fraction: 0.2,
            patience: 50,
            weight_decay: 0.0,
            warm_start: true,
            min_delta_rel: 0.0,
            rprop: RpropConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSummary {
    pub subnet: usize,
    pub epochs: usize,
    /// Epoch of the returned weights (differs from `epochs - 1` when a
    /// holdout selected an earlier iterate).
    pub best_epoch: usize,
    pub initial_cost: f64,
    /// Training cost of the returned weights.
    pub final_cost: f64,
    /// Holdout cost of the returned weights, when a holdout was used.
    pub val_cost: Option<f64>,
}

/// A bank of complex MLPs covering the data subcarriers: one subnet per
/// subcarrier (in_span -> 3·order hidden -> 1). Grouped banks feed every
/// subnet the whole group it belongs to; per-carrier banks feed it only its
/// own column.
#[derive(Debug, Clone)]
pub struct NnEqualizer {
    pub kind: NnKind,
    /// Constellation order M; hidden width is 3 M per subcarrier.
    pub order: usize,
    pub seed: u64,
    pub subnets: Vec<SubNetwork>,
    /// (start, len) input column span per subnet.
    pub in_spans: Vec<(usize, usize)>,
    /// Output column per subnet; covers 0..n_subcarriers exactly once.
    pub out_cols: Vec<usize>,
}

impl NnEqualizer {
    /// Grouped equalizer; `n_subcarriers` must match the case partition.
    pub fn grouped(case: CaseId, n_subcarriers: usize, order: usize, seed: u64) -> Result<Self> {
        validate_order(order)?;
        let sizes = case.group_sizes();
        let total: usize = sizes.iter().sum();
        if total != n_subcarriers {
            return Err(CoreError::InvalidConfig(format!(
                "{} partitions {total} subcarriers, scenario has {n_subcarriers}",
                case.label()
            )));
        }
        let mut subnets = Vec::with_capacity(total);
        let mut in_spans = Vec::with_capacity(total);
        let mut out_cols = Vec::with_capacity(total);
        let mut start = 0usize;
        for &g in sizes {
            for k in 0..g {
                let mut rng = subnet_rng(seed, start + k);
                subnets.push(SubNetwork::new_random_anchored(g, 3 * order, k, &mut rng));
                in_spans.push((start, g));
                out_cols.push(start + k);
            }
            start += g;
        }
        Ok(Self {
            kind: NnKind::Grouped(case),
            order,
            seed,
            subnets,
            in_spans,
            out_cols,
        })
    }

    /// One net per subcarrier, 1 -> 3M -> 1.
    pub fn per_carrier(n_subcarriers: usize, order: usize, seed: u64) -> Result<Self> {
        validate_order(order)?;
        if n_subcarriers == 0 {
            return Err(CoreError::EmptyInput("per_carrier n_subcarriers"));
        }
        let mut subnets = Vec::with_capacity(n_subcarriers);
        let mut in_spans = Vec::with_capacity(n_subcarriers);
        let mut out_cols = Vec::with_capacity(n_subcarriers);
        for s in 0..n_subcarriers {
            let mut rng = subnet_rng(seed, s);
            subnets.push(SubNetwork::new_random(1, 3 * order, 1, &mut rng));
            in_spans.push((s, 1));
            out_cols.push(s);
        }
        Ok(Self {
            kind: NnKind::PerCarrier,
            order,
            seed,
            subnets,
            in_spans,
            out_cols,
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.out_cols.len()
    }

    /// Total hidden neurons across the bank (complexity budget).
    pub fn hidden_neurons(&self) -> usize {
        self.subnets.iter().map(|n| n.n_hidden).sum()
    }

    /// Full-batch training of every subnet: inputs from its input span,
    /// target its own output column. `rx` and `tx` hold only the training
    /// rows.
    pub fn train(
        &mut self,
        rx: &Array2<Complex64>,
        tx: &Array2<Complex64>,
        opts: &TrainOptions,
    ) -> Result<Vec<TrainingSummary>> {
        if rx.dim() != tx.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "train rx vs tx rows*cols",
                left: rx.len(),
                right: tx.len(),
            });
        }
        let (rows, cols) = rx.dim();
        if rows == 0 {
            return Err(CoreError::EmptyInput("train rows"));
        }
        if cols != self.n_subcarriers() {
            return Err(CoreError::DimensionMismatch {
                context: "train subcarriers vs equalizer span",
                left: cols,
                right: self.n_subcarriers(),
            });
        }
        if !(0.0..1.0).contains(&opts.val_fraction) {
            return Err(CoreError::InvalidConfig(format!(
                "val_fraction: must be in [0, 1), got {}",
                opts.val_fraction
            )));
        }
        let n_val = if opts.val_fraction > 0.0 && rows >= 2 {
            (((rows as f64) * opts.val_fraction).round() as usize).clamp(1, rows - 1)
        } else {
            0
        };
        let n_fit = rows - n_val;
        let mut summaries = Vec::with_capacity(self.subnets.len());
        for (i, (net, (&(start, len), &out_col))) in self
            .subnets
            .iter_mut()
            .zip(self.in_spans.iter().zip(&self.out_cols))
            .enumerate()
        {
            let inputs = rx.slice(s![0..n_fit, start..start + len]);
            let targets = tx.slice(s![0..n_fit, out_col..out_col + 1]);
            let val_in = rx.slice(s![n_fit..rows, start..start + len]);
            let val_t = tx.slice(s![n_fit..rows, out_col..out_col + 1]);
            let own = out_col.checked_sub(start).filter(|&c| c < len);
            let warm = opts.warm_start && len > 1 && own.is_some();
            if warm {
                // Start the curriculum from exact-zero cross-carrier
                // weights: masked inputs keep their data gradient at zero,
                // so they sit still through stage one and every kind's
                // stage-one trajectory matches the per-carrier one.
                let own = own.unwrap();
                let w1im = net.n_hidden * net.n_in;
                for j in 0..net.n_hidden {
                    for c in (0..net.n_in).filter(|&c| c != own) {
                        net.params[j * net.n_in + c] = 0.0;
                        net.params[w1im + j * net.n_in + c] = 0.0;
                    }
                }
            }
            let mut state = StageState {
                history: Vec::with_capacity(2 * opts.max_epochs),
                best: net.params.clone(),
                best_val: f64::INFINITY,
                best_epoch: 0,
            };
            if warm {
                let own = own.unwrap();
                let mut masked = inputs.to_owned();
                for (c, mut col) in masked.columns_mut().into_iter().enumerate() {
                    if c != own {
                        col.fill(Complex64::new(0.0, 0.0));
                    }
                }
                run_stage(net, masked.view(), targets, val_in, val_t, opts, 1.0, &mut state)?;
                if n_val > 0 {
                    net.params.copy_from_slice(&state.best);
                }
            }
            let accept = if warm { 1.0 - opts.min_delta_rel } else { 1.0 };
            run_stage(net, inputs, targets, val_in, val_t, opts, accept, &mut state)?;
            let epochs = state.history.len();
            let initial = *state.history.first().unwrap_or(&f64::NAN);
            let (best_epoch, final_cost, val_cost) = if n_val > 0 {
                net.params.copy_from_slice(&state.best);
                (state.best_epoch, state.history[state.best_epoch], Some(state.best_val))
            } else {
                (
                    epochs.saturating_sub(1),
                    *state.history.last().unwrap_or(&f64::NAN),
                    None,
                )
            };
            summaries.push(TrainingSummary {
                subnet: i,
                epochs,
                best_epoch,
                initial_cost: initial,
                final_cost,
                val_cost,
            });
        }
        Ok(summaries)
    }

    /// Equalize a symbol matrix (any number of rows, columns must match).
    pub fn apply(&self, rx: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let (rows, cols) = rx.dim();
        if cols != self.n_subcarriers() {
            return Err(CoreError::DimensionMismatch {
                context: "apply subcarriers vs equalizer span",
                left: cols,
                right: self.n_subcarriers(),
            });
        }
        let mut out = Array2::<Complex64>::zeros((rows, cols));
        for (net, (&(start, len), &out_col)) in self
            .subnets
            .iter()
            .zip(self.in_spans.iter().zip(&self.out_cols))
        {
            let y = net.forward_batch(rx.slice(s![.., start..start + len]));
            out.slice_mut(s![.., out_col..out_col + 1]).assign(&y);
        }
        Ok(out)
    }
}

/// Cost history and holdout-best tracking carried across training stages.
struct StageState {
    history: Vec<f64>,
    best: Vec<f64>,
    best_val: f64,
    best_epoch: usize,
}

/// One RPROP run over `inputs` with fresh step sizes: up to `max_epochs`,
/// ending early on a zero or plateaued cost or on `patience` epochs without
/// a holdout improvement. Updates the global best snapshot in `state`; an
/// epoch only displaces it when its holdout cost drops below best_val times
/// `accept_factor`.
fn run_stage(
    net: &mut SubNetwork,
    inputs: ndarray::ArrayView2<Complex64>,
    targets: ndarray::ArrayView2<Complex64>,
    val_in: ndarray::ArrayView2<Complex64>,
    val_t: ndarray::ArrayView2<Complex64>,
    opts: &TrainOptions,
    accept_factor: f64,
    state: &mut StageState,
) -> Result<()> {
    let n_val = val_in.nrows();
    let n_fit = inputs.nrows();
    let mut grad = vec![0.0f64; net.n_params()];
    let mut opt = Rprop::new(net.n_params(), opts.rprop.clone());
    let mut local: Vec<f64> = Vec::with_capacity(opts.max_epochs);
    let mut stall = 0usize;
    // The data gradient is batch-summed while the cost is a mean; scale
    // the penalty to the summed convention so weight_decay means the same
    // thing at every batch size.
    let decay = 2.0 * opts.weight_decay * (n_fit * net.n_out) as f64;
    for epoch in 0..opts.max_epochs {
        let cost = net.cost_and_grad(inputs, targets, &mut grad);
        if !cost.is_finite() {
            return Err(CoreError::TrainingDiverged { epoch });
        }
        if decay > 0.0 {
            for (g, w) in grad.iter_mut().zip(&net.params) {
                *g += decay * w;
            }
        }
        local.push(cost);
        state.history.push(cost);
        if n_val > 0 {
            let y = net.forward_batch(val_in);
            let vc = y
                .iter()
                .zip(val_t.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / n_val as f64;
            if !vc.is_finite() {
                return Err(CoreError::TrainingDiverged { epoch });
            }
            if vc < state.best_val {
                state.best_val = vc;
                state.best_epoch = state.history.len() - 1;
                state.best.copy_from_slice(&net.params);
                stall = 0;
            } else {
                stall += 1;
                if stall >= opts.patience {
                    break;
                }
            }
        }
        if cost == 0.0 {
            break;
        }
        if epoch >= opts.plateau_window {
            let then = local[epoch - opts.plateau_window];
            if ((cost - then).abs() / then.max(1e-300)) < opts.plateau_rtol {
                break;
            }
        }
        opt.step(&mut net.params, &grad);
    }
    Ok(())
}

fn validate_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(CoreError::InvalidConfig(format!(
            "constellation order must be >= 2, got {order}"
        )));
    }
    Ok(())
}

/// Init stream for one subnet, derived from (equalizer seed, absolute
/// subcarrier index) with a splitmix64 finalizer. Per-subcarrier streams
/// plus anchored draws mean every equalizer kind starts a subcarrier's
/// own-carrier pathway from identical weights, so case comparisons see
/// structure, not init luck.
fn subnet_rng(seed: u64, subcarrier: usize) -> ChaCha12Rng {
    let mut z = seed ^ (subcarrier as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha12Rng::seed_from_u64(z ^ (z >> 31))
}

/// Channel-estimate division plus common-phase-error rotation:
/// out[t, s] = rx[t, s] / tap[s] * exp(-i cpe[t]).
pub fn one_tap_equalize(
    payload: &Array2<Complex64>,
    est: &ChannelEstimate,
) -> Result<Array2<Complex64>> {
    let (rows, cols) = payload.dim();
    if est.taps_data.len() != cols {
        return Err(CoreError::DimensionMismatch {
            context: "one_tap taps vs subcarriers",
            left: est.taps_data.len(),
            right: cols,
        });
    }
    if est.cpe.len() != rows {
        return Err(CoreError::DimensionMismatch {
            context: "one_tap cpe vs symbols",
            left: est.cpe.len(),
            right: rows,
        });
    }
    for (s, tap) in est.taps_data.iter().enumerate() {
        if tap.norm_sqr() < 1e-30 {
            return Err(CoreError::ZeroReference(s));
        }
    }
    let mut out = Array2::<Complex64>::zeros((rows, cols));
    for t in 0..rows {
        let derot = Complex64::from_polar(1.0, -est.cpe[t]);
        for s in 0..cols {
            out[(t, s)] = payload[(t, s)] / est.taps_data[s] * derot;
        }
    }
    Ok(out)
}

/// Digital backpropagation: undo the deterministic link (amplifier gains,
/// then each span backwards) on the received waveform. With steps matching
/// the forward simulation this is an exact inverse of the noiseless link;
/// in practice a coarser `steps_per_span` trades accuracy for speed. The
/// output is rescaled back to unit per-channel power.
pub fn dbp_equalize(
    w: &mut SampledWaveform,
    plan: &LinkPlan,
    fiber: &FiberParams,
    steps_per_span: usize,
) -> Result<()> {
    if steps_per_span == 0 {
        return Err(CoreError::InvalidConfig(
            "steps_per_span: must be >= 1".into(),
        ));
    }
    let v = plan.violations();
    if !v.is_empty() {
        return Err(CoreError::InvalidConfig(v.join("; ")));
    }
    fiber.validate()?;
    let g_amp = 10.0f64.powf(plan.amplifier.gain_db / 20.0);
    let step_km = plan.span_length_km / steps_per_span as f64;
    for _ in 0..plan.n_spans {
        w.scale(1.0 / g_amp);
        ssfm_propagate(w, fiber, plan.span_length_km, step_km, Direction::Backward)?;
    }
    let p_launch_w = 1e-3 * 10.0f64.powf(plan.launch_power_dbm / 10.0);
    w.scale(1.0 / p_launch_w.sqrt());
    Ok(())
}
