//! Per-class pseudo-label confidence thresholds that circulate until the
//! label counts of the novel classes are roughly even.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rplg::{reflect_filter, PseudoLabel2D};
use super::BalancerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbcParams {
    /// Threshold every novel class starts from.
    pub phi_init: f64,
    pub delta_phi: f64,
    pub d_bound: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub max_iters: usize,
}

impl Default for SbcParams {
    fn default() -> Self {
        Self {
            phi_init: 0.5,
            delta_phi: 0.05,
            d_bound: 0.5,
            phi_lo: 0.1,
            phi_hi: 0.9,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcState {
    pub phi_by_class: BTreeMap<String, f64>,
    pub params: SbcParams,
}

impl SbcState {
    pub fn new<S: Into<String>>(
        novel_classes: impl IntoIterator<Item = S>,
        params: SbcParams,
    ) -> Result<Self, BalancerError> {
        if !(params.phi_lo <= params.phi_init && params.phi_init <= params.phi_hi) {
            return Err(BalancerError::InvalidParams(format!(
                "initial threshold {} outside [{}, {}]",
                params.phi_init, params.phi_lo, params.phi_hi
            )));
        }
        let phi_by_class: BTreeMap<String, f64> = novel_classes
            .into_iter()
            .map(|c| (c.into(), params.phi_init))
            .collect();
        if phi_by_class.is_empty() {
            return Err(BalancerError::EmptyClassSet);
        }
        Ok(Self {
            phi_by_class,
            params,
        })
    }

    pub fn threshold(&self, class: &str) -> Option<f64> {
        self.phi_by_class.get(class).copied()
    }
}

/// Relative offset of each class count from the mean count.
pub fn offset_rates(counts: &BTreeMap<String, usize>) -> Option<BTreeMap<String, f64>> {
    if counts.is_empty() {
        return None;
    }
    let avg = counts.values().sum::<usize>() as f64 / counts.len() as f64;
    if avg == 0.0 {
        return None;
    }
    Some(
        counts
            .iter()
            .map(|(c, n)| (c.clone(), (*n as f64 - avg) / avg))
            .collect(),
    )
}

/// One balancing round. A class moves by `sgn(d_c)·Δφ` when `|d_c|`
/// exceeds `d_bound` and its threshold is strictly inside the bounds.
pub fn sbc_step(
    counts: &BTreeMap<String, usize>,
    state: &SbcState,
) -> Result<(SbcState, bool), BalancerError> {
    if counts.is_empty() || state.phi_by_class.is_empty() {
        return Err(BalancerError::EmptyClassSet);
    }
    if !counts.keys().eq(state.phi_by_class.keys()) {
        return Err(BalancerError::ClassMismatch {
            expected: state.phi_by_class.keys().cloned().collect(),
            got: counts.keys().cloned().collect(),
        });
    }
    let Some(rates) = offset_rates(counts) else {
        return Ok((state.clone(), false));
    };
    let p = &state.params;
    let mut next = state.clone();
    let mut changed = false;
    for (class, phi) in next.phi_by_class.iter_mut() {
        let d = rates[class];
        if d.abs() > p.d_bound && p.phi_lo < *phi && *phi < p.phi_hi {
            *phi = (*phi + d.signum() * p.delta_phi).clamp(p.phi_lo, p.phi_hi);
            changed = true;
        }
    }
    Ok((next, changed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcOutcome {
    pub state: SbcState,
    /// Number of rounds run, including the final one that changed nothing.
    pub iterations: usize,
    /// `false` when the iteration cap stopped the loop.
    pub converged: bool,
    /// Threshold vector before each round, then the final vector.
    pub trace: Vec<BTreeMap<String, f64>>,
    /// Counts observed in each round.
    pub counts: Vec<BTreeMap<String, usize>>,
}

/// Regenerates labels and rebalances until no threshold moves or the
/// iteration cap is reached.
pub fn sbc_loop(
    mut label_source: impl FnMut(&BTreeMap<String, f64>) -> BTreeMap<String, usize>,
    state: SbcState,
) -> Result<SbcOutcome, BalancerError> {
    let max_iters = state.params.max_iters;
    let mut state = state;
    let mut trace = vec![];
    let mut all_counts = vec![];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        trace.push(state.phi_by_class.clone());
        let counts = label_source(&state.phi_by_class);
        let (next, changed) = sbc_step(&counts, &state)?;
        all_counts.push(counts);
        state = next;
        iterations += 1;
        if !changed {
            converged = true;
            break;
        }
    }
    trace.push(state.phi_by_class.clone());
    Ok(SbcOutcome {
        state,
        iterations,
        converged,
        trace,
        counts: all_counts,
    })
}

/// Label source over a fixed pool of 2D pseudo labels: reflection-filtered
/// once, then counted per novel class above that class's threshold.
pub struct PseudoLabelPool {
    labels: Vec<PseudoLabel2D>,
}

impl PseudoLabelPool {
    pub fn new(labels: &[PseudoLabel2D], phi_clip: f64) -> Self {
        Self {
            labels: reflect_filter(labels, phi_clip),
        }
    }

    pub fn counts(&self, thresholds: &BTreeMap<String, f64>) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = thresholds.keys().map(|c| (c.clone(), 0)).collect();
        for l in &self.labels {
            if let (Some(phi), Some(n)) = (thresholds.get(&l.class), out.get_mut(&l.class)) {
                if l.confidence >= *phi {
                    *n += 1;
                }
            }
        }
        out
    }

    /// Labels that survive the final thresholds; classes without a
    /// threshold (base classes) pass through.
    pub fn select(&self, thresholds: &BTreeMap<String, f64>) -> Vec<PseudoLabel2D> {
        self.labels
            .iter()
            .filter(|l| thresholds.get(&l.class).is_none_or(|phi| l.confidence >= *phi))
            .cloned()
            .collect()
    }
}
