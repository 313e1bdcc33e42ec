//! Identification metrics, cross-validation, segmentation sweeps and
//! hyperparameter search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::classifier::{self, LabeledDataset, MulticlassSvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::features;
use crate::parallel::{self, Execution};
use crate::signal::{self, NoiseSeries, SegmentationScheme};

/// `counts[p][a]`: samples of actual class `a` predicted as class `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn empty(mut classes: Vec<String>) -> Self {
        classes.sort();
        classes.dedup();
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(label))
            .map_err(|_| Error::rejected(format!("unknown class label `{label}`")))
    }

    pub fn record(&mut self, predicted: &str, actual: &str) -> Result<()> {
        let p = self.index(predicted)?;
        let a = self.index(actual)?;
        self.counts[p][a] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::rejected("cannot merge matrices over different classes"));
        }
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        Ok(())
    }

    /// One-vs-rest `(TP, FP, TN, FN)` for class `i`.
    pub fn one_vs_rest(&self, i: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[i][i];
        let predicted: u64 = self.counts[i].iter().sum();
        let actual: u64 = self.counts.iter().map(|row| row[i]).sum();
        let fp = predicted - tp;
        let fn_ = actual - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, tn, fn_)
    }
}

/// Tallies `(predicted, actual)` pairs over the given class list.
pub fn confusion<S: AsRef<str>>(predictions: &[(S, S)], classes: &[String]) -> Result<ConfusionMatrix> {
    if predictions.is_empty() {
        return Err(Error::rejected("no predictions to tally"));
    }
    let mut m = ConfusionMatrix::empty(classes.to_vec());
    for (p, a) in predictions {
        m.record(p.as_ref(), a.as_ref())?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub tpr: f64,
    pub fpr: f64,
    /// No actual samples of this class; TPR reported as 0.
    pub tpr_undefined: bool,
    /// No negatives for this class; FPR reported as 0.
    pub fpr_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMetadata {
    pub chunk_size: Option<usize>,
    pub scheme: Option<SegmentationScheme>,
    pub folds: Option<usize>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Micro-averaged one-vs-rest accuracy including true negatives.
    pub acc_eq1: f64,
    /// Correct predictions over all predictions.
    pub acc_plain: f64,
    pub per_class: Vec<ClassMetrics>,
    pub matrix: ConfusionMatrix,
    pub metadata: EvalMetadata,
}

impl EvalReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    /// `metric,scope,value` lines.
    pub fn records(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "acc_eq1,overall,{}", self.acc_eq1);
        let _ = writeln!(out, "acc_plain,overall,{}", self.acc_plain);
        let _ = writeln!(out, "samples,overall,{}", self.matrix.total());
        for c in &self.per_class {
            let _ = writeln!(out, "tpr,{},{}", c.label, c.tpr);
            let _ = writeln!(out, "fpr,{},{}", c.label, c.fpr);
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        if let (Some(l), Some(s)) = (m.chunk_size, m.scheme) {
            let _ = writeln!(out, "chunk size {l}, training fraction {s}");
        }
        if let Some(f) = m.folds {
            let _ = writeln!(out, "{f}-fold cross-validation");
        }
        if let (Some(c), Some(g)) = (m.c, m.gamma) {
            let _ = writeln!(out, "C = {c}, gamma = {g}");
        }
        let _ = writeln!(
            out,
            "accuracy (plain) {:.4}   accuracy (one-vs-rest) {:.4}   samples {}",
            self.acc_plain,
            self.acc_eq1,
            self.matrix.total()
        );
        let _ = writeln!(out, "{:<12} {:>8} {:>10} {:>6} {:>6} {:>6} {:>6}", "class", "TPR", "FPR", "TP", "FP", "TN", "FN");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<12} {:>8.4} {:>10.2e} {:>6} {:>6} {:>6} {:>6}",
                c.label, c.tpr, c.fpr, c.tp, c.fp, c.tn, c.fn_
            );
        }
        out
    }
}

pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvalReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::rejected("confusion matrix is empty"));
    }
    let (mut stp, mut sfp, mut stn, mut sfn) = (0u64, 0u64, 0u64, 0u64);
    let per_class = (0..matrix.classes.len())
        .map(|i| {
            let (tp, fp, tn, fn_) = matrix.one_vs_rest(i);
            stp += tp;
            sfp += fp;
            stn += tn;
            sfn += fn_;
            let (tpr, tpr_undefined) = ratio(tp, tp + fn_);
            let (fpr, fpr_undefined) = ratio(fp, fp + tn);
            ClassMetrics {
                label: matrix.classes[i].clone(),
                tp,
                fp,
                tn,
                fn_,
                tpr,
                fpr,
                tpr_undefined,
                fpr_undefined,
            }
        })
        .collect();
    Ok(EvalReport {
        acc_eq1: (stp + stn) as f64 / (stp + stn + sfp + sfn) as f64,
        acc_plain: matrix.trace() as f64 / total as f64,
        per_class,
        matrix: matrix.clone(),
        metadata: EvalMetadata::default(),
    })
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Predicts every vector of `test` and scores against its labels.
pub fn evaluate_model(model: &MulticlassSvmModel, test: &LabeledDataset) -> Result<EvalReport> {
    let mut m = ConfusionMatrix::empty(model.classes.clone());
    for (v, label) in test.vectors.iter().zip(&test.labels) {
        m.record(model.predict_raw(v), label)?;
    }
    metrics(&m)
}

/// Fold of each sample: round-robin within each class, in input order.
pub fn stratified_folds(labels: &[String], folds: usize) -> Vec<usize> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let r = seen.entry(l.as_str()).or_insert(0);
            let f = *r % folds;
            *r += 1;
            f
        })
        .collect()
}

pub fn cross_validate(data: &LabeledDataset, folds: usize, params: &SvmParams) -> Result<EvalReport> {
    cross_validate_with(data, folds, params, Execution::default())
}

pub fn cross_validate_with(
    data: &LabeledDataset,
    folds: usize,
    params: &SvmParams,
    exec: Execution,
) -> Result<EvalReport> {
    data.validate()?;
    if folds < 2 {
        return Err(Error::rejected("cross-validation needs at least 2 folds"));
    }
    let classes = data.classes();
    for c in &classes {
        let count = data.count(c);
        if count < folds {
            return Err(Error::InsufficientClassData {
                class: c.clone(),
                count,
                required: folds,
            });
        }
    }
    let assignment = stratified_folds(&data.labels, folds);
    let fold_ids: Vec<usize> = (0..folds).collect();
    let matrices = parallel::try_map(exec, &fold_ids, |&f| {
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| assignment[i] == f);
        let model =
            classifier::train_min_per_class(&data.subset(&train_idx), params, Execution::Sequential, 1)?;
        let mut m = ConfusionMatrix::empty(classes.clone());
        for &i in &test_idx {
            m.record(model.predict_raw(&data.vectors[i]), &data.labels[i])?;
        }
        Ok::<_, Error>(m)
    })?;
    let mut pooled = ConfusionMatrix::empty(classes);
    for m in &matrices {
        pooled.merge(m)?;
    }
    let mut report = metrics(&pooled)?;
    report.metadata = EvalMetadata {
        folds: Some(folds),
        c: Some(params.c),
        gamma: Some(params.gamma),
        ..EvalMetadata::default()
    };
    Ok(report)
}

/// Chunks, extracts and segments every sensor's noise; returns `(train, test)`.
pub fn build_split(
    noise: &BTreeMap<String, NoiseSeries>,
    chunk_size: usize,
    scheme: SegmentationScheme,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train = LabeledDataset::default();
    let mut test = LabeledDataset::default();
    for (label, series) in noise {
        let chunks = signal::chunk(series, chunk_size)?;
        let (tr, te) = signal::segment(&chunks, scheme)?;
        for c in &tr {
            train.push_features(&features::extract(c)?, label.clone());
        }
        for c in &te {
            test.push_features(&features::extract(c)?, label.clone());
        }
    }
    Ok((train, test))
}

/// One train/evaluate run at a given chunk size and training fraction.
pub fn identification_run(
    noise: &BTreeMap<String, NoiseSeries>,
    chunk_size: usize,
    scheme: SegmentationScheme,
    params: &SvmParams,
    exec: Execution,
) -> Result<EvalReport> {
    let (train, test) = build_split(noise, chunk_size, scheme)?;
    if test.is_empty() {
        return Err(Error::insufficient("no test chunks left after segmentation"));
    }
    let model = classifier::train_with(&train, params, exec)?;
    let mut report = evaluate_model(&model, &test)?;
    report.metadata = EvalMetadata {
        chunk_size: Some(chunk_size),
        scheme: Some(scheme),
        c: Some(params.c),
        gamma: Some(params.gamma),
        folds: None,
    };
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub chunk_size: usize,
    pub scheme: SegmentationScheme,
    pub acc_plain: f64,
    pub acc_eq1: f64,
}

pub fn sweep(
    noise: &BTreeMap<String, NoiseSeries>,
    chunk_sizes: &[usize],
    schemes: &[SegmentationScheme],
    params: &SvmParams,
) -> Result<Vec<SweepCell>> {
    sweep_with(noise, chunk_sizes, schemes, params, Execution::default())
}

pub fn sweep_with(
    noise: &BTreeMap<String, NoiseSeries>,
    chunk_sizes: &[usize],
    schemes: &[SegmentationScheme],
    params: &SvmParams,
    exec: Execution,
) -> Result<Vec<SweepCell>> {
    let cells: Vec<(usize, SegmentationScheme)> = chunk_sizes
        .iter()
        .flat_map(|&l| schemes.iter().map(move |&s| (l, s)))
        .collect();
    parallel::try_map(exec, &cells, |&(chunk_size, scheme)| {
        let r = identification_run(noise, chunk_size, scheme, params, Execution::Sequential)?;
        Ok(SweepCell {
            chunk_size,
            scheme,
            acc_plain: r.acc_plain,
            acc_eq1: r.acc_eq1,
        })
    })
}

/// Chunk sizes down the rows, training fractions across the columns.
pub fn format_sweep(cells: &[SweepCell]) -> String {
    let mut sizes: Vec<usize> = cells.iter().map(|c| c.chunk_size).collect();
    sizes.dedup();
    let mut schemes: Vec<SegmentationScheme> = cells.iter().map(|c| c.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut out = format!("{:>8}", "chunk");
    for s in &schemes {
        let _ = write!(out, " {:>9}", format!("train {s}"));
    }
    out.push('\n');
    for l in sizes {
        let _ = write!(out, "{l:>8}");
        for s in &schemes {
            match cells.iter().find(|c| c.chunk_size == l && c.scheme == *s) {
                Some(c) => {
                    let _ = write!(out, " {:>8.2}%", 100.0 * c.acc_plain);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub c: f64,
    pub gamma: f64,
    pub report: EvalReport,
    /// `(C, gamma, cross-validated plain accuracy)` for every cell.
    pub cells: Vec<(f64, f64, f64)>,
}

/// Exhaustive search maximizing cross-validated plain accuracy.
/// Ties go to the smaller C, then the smaller gamma.
pub fn grid_search(
    data: &LabeledDataset,
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
) -> Result<GridResult> {
    grid_search_with(data, c_grid, gamma_grid, folds, &SvmParams::default(), Execution::default())
}

pub fn grid_search_with(
    data: &LabeledDataset,
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    base: &SvmParams,
    exec: Execution,
) -> Result<GridResult> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::rejected("grid search needs non-empty C and gamma grids"));
    }
    let mut cs = c_grid.to_vec();
    let mut gs = gamma_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    let cells: Vec<(f64, f64)> = cs.iter().flat_map(|&c| gs.iter().map(move |&g| (c, g))).collect();
    let reports = parallel::try_map(exec, &cells, |&(c, gamma)| {
        let params = SvmParams { c, gamma, ..*base };
        cross_validate_with(data, folds, &params, Execution::Sequential)
    })?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.acc_plain > reports[best].acc_plain {
            best = i;
        }
    }
    Ok(GridResult {
        c: cells[best].0,
        gamma: cells[best].1,
        report: reports[best].clone(),
        cells: cells
            .iter()
            .zip(&reports)
            .map(|(&(c, g), r)| (c, g, r.acc_plain))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn example_pairs() -> Vec<(&'static str, &'static str)> {
        // counts[p][a] = [[3,1],[2,4]]
        let mut v = vec![("A", "A"); 3];
        v.push(("A", "B"));
        v.extend(vec![("B", "A"); 2]);
        v.extend(vec![("B", "B"); 4]);
        v
    }

    #[test]
    fn hand_tally() {
        let m = confusion(&example_pairs(), &labels(&["B", "A"])).unwrap();
        assert_eq!(m.classes, labels(&["A", "B"]));
        assert_eq!(m.counts, vec![vec![3, 1], vec![2, 4]]);
        let single = confusion(&[("B", "A")], &labels(&["A", "B"])).unwrap();
        assert_eq!(single.counts, vec![vec![0, 0], vec![1, 0]]);
        assert!(confusion(&[("C", "A")], &labels(&["A", "B"])).is_err());
        assert!(confusion::<&str>(&[], &labels(&["A"])).is_err());
    }

    #[test]
    fn hand_metrics() {
        let m = confusion(&example_pairs(), &labels(&["A", "B"])).unwrap();
        let r = metrics(&m).unwrap();
        assert!((r.acc_eq1 - 0.7).abs() < 1e-15);
        assert!((r.acc_plain - 0.7).abs() < 1e-15);
        let a = r.class("A").unwrap();
        assert!((a.tpr - 0.6).abs() < 1e-15);
        assert!((a.fpr - 0.2).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_undefined() {
        let pairs = [("A", "A"), ("B", "B"), ("C", "C")];
        let r = metrics(&confusion(&pairs, &labels(&["A", "B", "C"])).unwrap()).unwrap();
        assert_eq!(r.acc_eq1, 1.0);
        assert_eq!(r.acc_plain, 1.0);
        assert!(r.per_class.iter().all(|c| c.tpr == 1.0 && c.fpr == 0.0));

        let r = metrics(&confusion(&[("A", "A")], &labels(&["A", "B"])).unwrap()).unwrap();
        let b = r.class("B").unwrap();
        assert!(b.tpr_undefined && b.tpr == 0.0);
        let a = r.class("A").unwrap();
        assert!(a.fpr_undefined && a.fpr == 0.0);

        assert!(metrics(&ConfusionMatrix::empty(labels(&["A"]))).is_err());
    }

    #[test]
    fn eq1_differs_from_plain_for_three_classes() {
        let pairs = [("A", "A"), ("B", "A"), ("C", "C"), ("B", "B")];
        let r = metrics(&confusion(&pairs, &labels(&["A", "B", "C"])).unwrap()).unwrap();
        assert_eq!(r.acc_plain, 0.75);
        // per class: A(1,0,2,1) B(1,1,2,0) C(1,0,3,0) -> (3+7)/(3+7+1+1)
        assert!((r.acc_eq1 - 10.0 / 12.0).abs() < 1e-15);
        let lines = r.records();
        assert!(lines.contains("acc_eq1,overall,"));
        assert!(lines.contains("tpr,A,0.5"));
    }

    #[test]
    fn folds_round_robin_per_class() {
        let l = labels(&["a", "b", "a", "a", "b", "a"]);
        assert_eq!(stratified_folds(&l, 2), vec![0, 0, 1, 0, 1, 1]);
    }

    fn separable(per_class: usize) -> LabeledDataset {
        let mut d = LabeledDataset::default();
        for k in 0..3 {
            for i in 0..per_class {
                d.push(vec![k as f64 * 5.0 + 0.1 * i as f64, -(k as f64)], format!("k{k}"));
            }
        }
        d
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let r = cross_validate(&separable(2), 2, &SvmParams::default()).unwrap();
        assert_eq!(r.acc_plain, 1.0);
        let again = cross_validate(&separable(2), 2, &SvmParams::default()).unwrap();
        assert_eq!(r, again);
        assert!(matches!(
            cross_validate(&separable(2), 3, &SvmParams::default()),
            Err(Error::InsufficientClassData { .. })
        ));
    }

    #[test]
    fn grid_search_picks_smallest_tied_pair() {
        let d = separable(4);
        let g = grid_search(&d, &[10.0, 1.0], &[0.5, 0.1], 2).unwrap();
        assert_eq!(g.report.acc_plain, 1.0);
        assert_eq!((g.c, g.gamma), (1.0, 0.1));
        assert_eq!(g.cells.len(), 4);
        let one = grid_search(&d, &[3.0], &[0.2], 2).unwrap();
        assert_eq!((one.c, one.gamma), (3.0, 0.2));
        assert!(grid_search(&d, &[], &[0.2], 2).is_err());
    }
}
