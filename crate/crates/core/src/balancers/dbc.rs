//! Per-class loss weights that drift toward the classes with the highest
//! accumulated loss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BalancerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbcParams {
    /// Iterations between weight updates.
    pub i_dbc: usize,
    pub k: usize,
    pub delta_w: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

impl Default for DbcParams {
    fn default() -> Self {
        Self {
            i_dbc: 2000,
            k: 5,
            delta_w: 0.05,
            w_lo: 0.5,
            w_hi: 1.5,
        }
    }
}

/// What one weight update did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbcUpdate {
    pub raised: Vec<String>,
    pub lowered: Vec<String>,
    /// Accumulated sums the ranking was based on.
    pub sums: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbcState {
    pub w_by_class: BTreeMap<String, f64>,
    pub sum_by_class: BTreeMap<String, f64>,
    pub iter_count: usize,
    pub params: DbcParams,
}

impl DbcState {
    pub fn new<S: Into<String>>(
        classes: impl IntoIterator<Item = S>,
        params: DbcParams,
    ) -> Result<Self, BalancerError> {
        if params.i_dbc == 0 || !(params.w_lo <= 1.0 && 1.0 <= params.w_hi) || params.delta_w < 0.0 {
            return Err(BalancerError::InvalidParams(format!("{params:?}")));
        }
        let w_by_class: BTreeMap<String, f64> = classes.into_iter().map(|c| (c.into(), 1.0)).collect();
        let sum_by_class = w_by_class.keys().map(|c| (c.clone(), 0.0)).collect();
        Ok(Self {
            w_by_class,
            sum_by_class,
            iter_count: 0,
            params,
        })
    }

    pub fn weight(&self, class: &str) -> f64 {
        self.w_by_class.get(class).copied().unwrap_or(1.0)
    }

    /// Multiplies each class loss by its weight; unknown classes weigh 1.
    pub fn scale_loss(&self, losses: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
        losses
            .iter()
            .map(|(c, l)| (c.clone(), l * self.weight(c)))
            .collect()
    }

    /// Adds one iteration of weighted losses. Runs [`DbcState::update`] when
    /// the interval is reached and returns what it did.
    pub fn accumulate(
        &mut self,
        losses: &BTreeMap<String, f64>,
    ) -> Result<Option<DbcUpdate>, BalancerError> {
        if let Some((c, l)) = losses.iter().find(|(_, l)| !(**l >= 0.0)) {
            return Err(BalancerError::NegativeLoss {
                class: c.clone(),
                loss: *l,
            });
        }
        for (class, scaled) in self.scale_loss(losses) {
            self.w_by_class.entry(class.clone()).or_insert(1.0);
            *self.sum_by_class.entry(class).or_insert(0.0) += scaled;
        }
        self.iter_count += 1;
        if self.iter_count >= self.params.i_dbc {
            Ok(Some(self.update()))
        } else {
            Ok(None)
        }
    }

    /// Raises the weights of the `k` classes with the largest accumulated
    /// loss and lowers those of the `k` smallest, then resets the sums. Ties
    /// rank by class name. With fewer than `2k` classes, `k` shrinks to half
    /// the class count.
    pub fn update(&mut self) -> DbcUpdate {
        let p = self.params;
        let mut ranked: Vec<(&String, f64)> = self
            .w_by_class
            .keys()
            .map(|c| (c, self.sum_by_class.get(c).copied().unwrap_or(0.0)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let k = p.k.min(ranked.len() / 2);
        let raised: Vec<String> = ranked[..k].iter().map(|(c, _)| (*c).clone()).collect();
        let lowered: Vec<String> = ranked[ranked.len() - k..]
            .iter()
            .map(|(c, _)| (*c).clone())
            .collect();
        let sums = self.sum_by_class.clone();

        for c in &raised {
            let w = self.w_by_class.get_mut(c).expect("ranked from weights");
            *w = (*w + p.delta_w).min(p.w_hi);
        }
        for c in &lowered {
            let w = self.w_by_class.get_mut(c).expect("ranked from weights");
            *w = (*w - p.delta_w).max(p.w_lo);
        }
        for s in self.sum_by_class.values_mut() {
            *s = 0.0;
        }
        self.iter_count = 0;
        DbcUpdate {
            raised,
            lowered,
            sums,
            weights: self.w_by_class.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn losses(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(c, l)| (c.to_string(), *l)).collect()
    }

    fn params(i_dbc: usize, k: usize) -> DbcParams {
        DbcParams {
            i_dbc,
            k,
            ..DbcParams::default()
        }
    }

    #[test]
    fn accumulates_weighted_losses() {
        let mut s = DbcState::new(["A", "B"], params(10, 1)).unwrap();
        s.accumulate(&losses(&[("A", 1.0)])).unwrap();
        assert_eq!(s.sum_by_class["A"], 1.0);
        s.accumulate(&losses(&[("A", 1.0), ("B", 2.0)])).unwrap();
        s.accumulate(&losses(&[("A", 0.0), ("B", 2.0)])).unwrap();
        assert_eq!(s.sum_by_class["A"], 2.0);
        assert_eq!(s.sum_by_class["B"], 4.0);
        assert_eq!(s.iter_count, 3);

        s.w_by_class.insert("A".into(), 1.05);
        s.accumulate(&losses(&[("A", 1.0)])).unwrap();
        assert!((s.sum_by_class["A"] - 3.05).abs() < 1e-12);
    }

    #[test]
    fn three_class_update() {
        let mut s = DbcState::new(["A", "B", "C"], params(1, 1)).unwrap();
        let up = s.accumulate(&losses(&[("A", 5.0), ("B", 1.0), ("C", 3.0)])).unwrap().unwrap();
        assert_eq!(up.raised, vec!["A".to_string()]);
        assert_eq!(up.lowered, vec!["B".to_string()]);
        assert!((s.weight("A") - 1.05).abs() < 1e-12);
        assert!((s.weight("B") - 0.95).abs() < 1e-12);
        assert_eq!(s.weight("C"), 1.0);
        assert!(s.sum_by_class.values().all(|v| *v == 0.0));
        assert_eq!(s.iter_count, 0);
    }

    #[test]
    fn clamped_at_upper_bound() {
        let mut s = DbcState::new(["A", "B", "C"], params(1, 1)).unwrap();
        s.w_by_class.insert("A".into(), 1.5);
        s.accumulate(&losses(&[("A", 5.0), ("B", 1.0), ("C", 3.0)])).unwrap();
        assert_eq!(s.weight("A"), 1.5);
    }

    #[test]
    fn ties_break_by_name() {
        let mut s = DbcState::new(["C", "A", "B", "D"], params(1, 1)).unwrap();
        let up = s.accumulate(&losses(&[("A", 1.0), ("B", 1.0), ("C", 1.0), ("D", 1.0)])).unwrap().unwrap();
        assert_eq!(up.raised, vec!["A".to_string()]);
        assert_eq!(up.lowered, vec!["D".to_string()]);
    }

    #[test]
    fn k_shrinks_with_few_classes() {
        let mut s = DbcState::new(["A", "B", "C"], params(1, 5)).unwrap();
        let up = s.accumulate(&losses(&[("A", 3.0), ("B", 2.0), ("C", 1.0)])).unwrap().unwrap();
        assert_eq!(up.raised.len(), 1);
        assert_eq!(up.lowered.len(), 1);
        assert_eq!(s.weight("B"), 1.0);
    }

    #[test]
    fn scale_loss_cases() {
        let mut s = DbcState::new(["A"], params(10, 1)).unwrap();
        assert_eq!(s.scale_loss(&losses(&[("A", 2.0), ("Z", 3.0)])), losses(&[("A", 2.0), ("Z", 3.0)]));
        s.w_by_class.insert("A".into(), 1.05);
        assert!((s.scale_loss(&losses(&[("A", 2.0)]))["A"] - 2.1).abs() < 1e-12);
        assert_eq!(s.scale_loss(&losses(&[("A", 0.0)]))["A"], 0.0);
    }

    #[test]
    fn negative_loss_rejected() {
        let mut s = DbcState::new(["A"], params(10, 1)).unwrap();
        assert!(s.accumulate(&losses(&[("A", -1.0)])).is_err());
        assert!(s.accumulate(&losses(&[("A", f64::NAN)])).is_err());
    }
}
