//! Confusion matrices, accuracy / recall / precision, chance level, and
//! Spearman rank correlation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal::{Finger, N_FINGERS};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

/// A ratio whose denominator may vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    /// Denominator was zero (e.g. a class never predicted).
    Undefined,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio::Undefined
        } else {
            Ratio::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }
}

/// Unweighted mean over classes, skipping undefined entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroAverage {
    pub value: f64,
    pub undefined_classes: usize,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn is_balanced(&self) -> bool {
        let r0 = self.row_sum(0);
        (0..self.k()).all(|c| self.row_sum(c) == r0)
    }

    fn nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::Empty("confusion matrix has no counts".into()));
        }
        Ok(())
    }

    pub fn accuracy(&self) -> Result<f64> {
        self.nonempty()?;
        let diag: u64 = (0..self.k()).map(|c| self.counts[c][c]).sum();
        Ok(diag as f64 / self.total() as f64)
    }

    /// TP / (TP + FN).
    pub fn recall(&self, class: usize) -> Result<Ratio> {
        self.nonempty()?;
        Ok(Ratio::of(self.counts[class][class], self.row_sum(class)))
    }

    /// TP / (TP + FP).
    pub fn precision(&self, class: usize) -> Result<Ratio> {
        self.nonempty()?;
        Ok(Ratio::of(self.counts[class][class], self.col_sum(class)))
    }

    fn macro_of(&self, per_class: impl Fn(usize) -> Result<Ratio>) -> Result<MacroAverage> {
        let mut sum = 0.0;
        let mut defined = 0;
        for c in 0..self.k() {
            if let Some(v) = per_class(c)?.value() {
                sum += v;
                defined += 1;
            }
        }
        Ok(MacroAverage {
            value: if defined == 0 { f64::NAN } else { sum / defined as f64 },
            undefined_classes: self.k() - defined,
        })
    }

    pub fn macro_recall(&self) -> Result<MacroAverage> {
        self.macro_of(|c| self.recall(c))
    }

    pub fn macro_precision(&self) -> Result<MacroAverage> {
        self.macro_of(|c| self.precision(c))
    }

    /// Collapses to `class` versus the rest.
    pub fn one_vs_rest(&self, class: usize) -> [[u64; 2]; 2] {
        let tp = self.counts[class][class];
        let fn_ = self.row_sum(class) - tp;
        let fp = self.col_sum(class) - tp;
        let tn = self.total() - tp - fn_ - fp;
        [[tp, fn_], [fp, tn]]
    }

    /// Binary accuracy of `class` versus the rest: (TP + TN) / total.
    pub fn one_vs_rest_accuracy(&self, class: usize) -> Result<f64> {
        self.nonempty()?;
        let [[tp, _], [_, tn]] = self.one_vs_rest(class);
        Ok((tp + tn) as f64 / self.total() as f64)
    }

    /// Plain-text grid with recall per row and precision per column, in
    /// percent.
    pub fn to_text(&self, labels: &[&str]) -> String {
        let k = self.k();
        let fmt_pct = |r: Result<Ratio>| match r.ok().and_then(Ratio::value) {
            Some(v) => format!("{:.1}", v * 100.0),
            None => "n/a".into(),
        };
        let mut s = String::new();
        let _ = write!(s, "{:>10}", "true\\pred");
        for c in 0..k {
            let _ = write!(s, "{:>9}", labels.get(c).copied().unwrap_or("?"));
        }
        let _ = writeln!(s, "{:>10}", "recall%");
        for r in 0..k {
            let _ = write!(s, "{:>10}", labels.get(r).copied().unwrap_or("?"));
            for c in 0..k {
                let _ = write!(s, "{:>9}", self.counts[r][c]);
            }
            let _ = writeln!(s, "{:>10}", fmt_pct(self.recall(r)));
        }
        let _ = write!(s, "{:>10}", "prec%");
        for c in 0..k {
            let _ = write!(s, "{:>9}", fmt_pct(self.precision(c)));
        }
        s.push('\n');
        s
    }
}

pub fn confusion_from_pairs(pairs: &[(Finger, Finger)]) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::Empty("no (true, predicted) pairs".into()));
    }
    let mut cm = ConfusionMatrix::zeros(N_FINGERS);
    for &(t, p) in pairs {
        cm.add(t.index(), p.index());
    }
    Ok(cm)
}

/// Accuracy of uniform guessing among `k` classes, in percent.
pub fn chance_level(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("chance level needs at least one class".into()));
    }
    Ok(100.0 / k as f64)
}

/// 1-based ranks; ties share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Spearman's rho: Pearson correlation of average ranks. `Ok(None)` when
/// either input is constant, where the coefficient is undefined.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)).map(|r| r.clamp(-1.0, 1.0)))
}

/// P(X ≥ k) for X ~ Binomial(n, p).
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // Sum pmf terms in log space from k to n.
    let ln_choose = |n: u64, i: u64| -> f64 {
        let lg = |m: u64| (1..=m).map(|v| (v as f64).ln()).sum::<f64>();
        lg(n) - lg(i) - lg(n - i)
    };
    (k..=n)
        .map(|i| (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Finger::*;

    #[test]
    fn pairs_fill_cells() {
        let cm = confusion_from_pairs(&[(Thumb, Thumb)]).unwrap();
        assert_eq!(cm.get(0, 0), 1);
        assert_eq!(cm.total(), 1);

        let cm = confusion_from_pairs(&[(Thumb, Index), (Index, Thumb)]).unwrap();
        assert_eq!((cm.get(0, 1), cm.get(1, 0), cm.total()), (1, 1, 2));
        assert_eq!(cm.accuracy().unwrap(), 0.0);

        let all: Vec<_> = (0..100).map(|i| (Finger::ALL[i % 5], Finger::ALL[i % 5])).collect();
        let cm = confusion_from_pairs(&all).unwrap();
        assert_eq!((0..5).map(|c| cm.get(c, c)).sum::<u64>(), 100);
        assert!(confusion_from_pairs(&[]).is_err());
    }

    #[test]
    fn perfect_and_uniform() {
        let perfect = ConfusionMatrix::from_counts((0..5).map(|r| (0..5).map(|c| if r == c { 10 } else { 0 }).collect()).collect()).unwrap();
        assert_eq!(perfect.accuracy().unwrap(), 1.0);
        for c in 0..5 {
            assert_eq!(perfect.recall(c).unwrap(), Ratio::Defined(1.0));
            assert_eq!(perfect.precision(c).unwrap(), Ratio::Defined(1.0));
            assert_eq!(perfect.one_vs_rest_accuracy(c).unwrap(), 1.0);
        }
        let uniform = ConfusionMatrix::from_counts(vec![vec![3; 5]; 5]).unwrap();
        assert!((uniform.accuracy().unwrap() - 0.2).abs() < 1e-15);
        assert!((uniform.accuracy().unwrap() * 100.0 - chance_level(5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_is_excluded() {
        // Class 4 never predicted.
        let mut cm = ConfusionMatrix::zeros(5);
        for c in 0..4 {
            cm.add(c, c);
        }
        cm.add(4, 0);
        assert_eq!(cm.precision(4).unwrap(), Ratio::Undefined);
        let m = cm.macro_precision().unwrap();
        assert_eq!(m.undefined_classes, 1);
        assert!((m.value - (0.5 + 1.0 + 1.0 + 1.0) / 4.0).abs() < 1e-15);
        assert!(ConfusionMatrix::zeros(5).accuracy().is_err());
    }

    #[test]
    fn thumb_one_vs_rest_hand_built() {
        // Thumb/index confusions, the other three fingers perfect with 20 each.
        let mut counts = vec![vec![0u64; 5]; 5];
        counts[0][0] = 18;
        counts[0][1] = 2;
        counts[1][0] = 3;
        counts[1][1] = 17;
        for c in 2..5 {
            counts[c][c] = 20;
        }
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        // Collapse by hand: TP 18, FN 2, FP 3, TN = 100 - 23 = 77.
        assert_eq!(cm.one_vs_rest(0), [[18, 2], [3, 77]]);
        assert!((cm.one_vs_rest_accuracy(0).unwrap() - 0.95).abs() < 1e-15);
        let collapsed: u64 = cm.one_vs_rest(0).iter().flatten().sum();
        assert_eq!(collapsed, cm.total());
    }

    #[test]
    fn thumb_block_perfect_rest_uniform() {
        let mut counts = vec![vec![0u64; 5]; 5];
        counts[0][0] = 20;
        for r in 1..5 {
            for c in 1..5 {
                counts[r][c] = 5;
            }
        }
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        assert_eq!(cm.one_vs_rest_accuracy(0).unwrap(), 1.0);
    }

    #[test]
    fn chance_levels() {
        assert_eq!(chance_level(5).unwrap(), 20.0);
        assert_eq!(chance_level(1).unwrap(), 100.0);
        assert_eq!(chance_level(4).unwrap(), 25.0);
        assert!(chance_level(0).is_err());
    }

    #[test]
    fn spearman_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman_rho(&a, &[10.0, 20.0, 30.0, 40.0]).unwrap(), Some(1.0));
        assert_eq!(spearman_rho(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        // 1 - 6 Σd² / (n (n² - 1)) with Σd² = 2, n = 4.
        let want = 1.0 - 6.0 * 2.0 / (4.0 * 15.0);
        let got = spearman_rho(&a, &[2.0, 1.0, 3.0, 4.0]).unwrap().unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((want - 0.8).abs() < 1e-15);
        assert_eq!(spearman_rho(&a, &[1.0; 4]).unwrap(), None);
        assert!(spearman_rho(&a, &[1.0; 3]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn binomial_tail_small_cases() {
        // P(X >= 1), n = 2, p = 0.5 is 3/4.
        assert!((binomial_upper_tail(1, 2, 0.5) - 0.75).abs() < 1e-12);
        assert!((binomial_upper_tail(3, 3, 0.2) - 0.008).abs() < 1e-12);
        assert_eq!(binomial_upper_tail(0, 5, 0.3), 1.0);
    }
}
