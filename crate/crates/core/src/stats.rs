//! Rating-study statistics: Cronbach's alpha, the Friedman rank test,
//! Welch's t-test, and conversion of recorded sessions into matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("matrix is not rectangular (row {row} has {found} values, expected {expected})")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("need at least {need} {what}, got {got}")]
    TooSmall {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("incomplete sessions, missing cells: {}", .0.join("; "))]
    MissingCells(Vec<String>),
    #[error("csv: {0}")]
    Csv(String),
}

/// Rectangular table: rows are subjects (blocks), columns are items or
/// conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl RatingMatrix {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        let cols = col_labels.len();
        if row_labels.len() != values.len() {
            return Err(StatsError::Ragged {
                row: values.len(),
                expected: row_labels.len(),
                found: values.len(),
            });
        }
        for (row, r) in values.iter().enumerate() {
            if r.len() != cols {
                return Err(StatsError::Ragged {
                    row,
                    expected: cols,
                    found: r.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite { row, col });
            }
        }
        Ok(RatingMatrix {
            row_labels,
            col_labels,
            values,
        })
    }

    /// Unlabelled matrix; rows and columns are numbered from 1.
    pub fn from_rows(values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let cols = values.first().map_or(0, Vec::len);
        let rows = (1..=values.len()).map(|i| i.to_string()).collect();
        let col_labels = (1..=cols).map(|i| i.to_string()).collect();
        RatingMatrix::new(rows, col_labels, values)
    }

    /// Reads a CSV whose header names the columns; the first column holds row
    /// labels when it is non-numeric.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| StatsError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| StatsError::Csv(e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let labelled = rows
            .first()
            .and_then(|r| r.first())
            .is_some_and(|c| c.parse::<f64>().is_err());
        let skip = usize::from(labelled);
        let mut row_labels = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            row_labels.push(if labelled { r[0].clone() } else { (i + 1).to_string() });
            let parsed = r[skip..]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| StatsError::Csv(format!("row {}: `{c}` is not a number", i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            values.push(parsed);
        }
        RatingMatrix::new(row_labels, header[skip..].to_vec(), values)
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |r| r[j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Sample variance with the n - 1 denominator.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied());
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Internal-consistency reliability of the matrix columns (items) across rows
/// (subjects).
pub fn cronbach_alpha(m: &RatingMatrix) -> Result<f64, StatsError> {
    let (n, k) = (m.rows(), m.cols());
    if k < 2 {
        return Err(StatsError::TooSmall { what: "items", need: 2, got: k });
    }
    if n < 2 {
        return Err(StatsError::TooSmall { what: "subjects", need: 2, got: n });
    }
    let item_var: f64 = (0..k)
        .map(|j| variance(&m.column(j).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = m.values().iter().map(|r| r.iter().sum()).collect();
    let total_var = variance(&totals);
    if total_var <= 0.0 {
        return Err(StatsError::ZeroVariance("row totals"));
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

/// Mid-ranks (1-based) of `row`, tied values sharing their average rank.
pub fn mid_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test with tie correction; rows are blocks, columns conditions.
pub fn friedman(m: &RatingMatrix) -> Result<TestResult, StatsError> {
    let (n, k) = (m.rows(), m.cols());
    if n < 2 {
        return Err(StatsError::TooSmall { what: "blocks", need: 2, got: n });
    }
    if k < 2 {
        return Err(StatsError::TooSmall { what: "conditions", need: 2, got: k });
    }
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in m.values() {
        let ranks = mid_ranks(row);
        for (s, r) in rank_sums.iter_mut().zip(&ranks) {
            *s += r;
        }
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        for group in sorted.chunk_by(|a, b| a == b) {
            let t = group.len() as f64;
            tie_term += t * t * t - t;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let df = kf - 1.0;
    let correction = 1.0 - tie_term / (nf * (kf * kf * kf - kf));
    if correction <= 1e-12 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, df });
    }
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
    let statistic = (raw / correction).max(0.0);
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, df),
        df,
    })
}

/// Welch's unequal-variance t-test, two-sided.
pub fn t_test_independent(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    for (what, s) in [("values in sample a", a), ("values in sample b", b)] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall { what, need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance("both samples are constant"));
    }
    let t = (mean(a.iter().copied()) - mean(b.iter().copied())) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        df,
    })
}

// ---- special functions -------------------------------------------------

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(s, x).
pub fn gamma_q(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        // series for P(s, x)
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..MAX_ITER {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Lentz continued fraction for Q(s, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    beta_inc(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

// ---- session records ---------------------------------------------------

/// One rating captured during a live session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub participant: String,
    pub condition: String,
    pub measure: String,
    pub item: String,
    pub score: f64,
}

/// Reads `participant,condition,measure,item,score` rows.
pub fn read_session_csv<R: Read>(reader: R) -> Result<Vec<SessionRecord>, StatsError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| StatsError::Csv(e.to_string())))
        .collect()
}

pub fn write_session_csv(records: &[SessionRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

/// Builds one participants-by-conditions matrix per measure, each cell the
/// mean of that participant's item scores under that condition.
///
/// Every (participant, condition) pair must rate every item that appears for
/// the measure in any session, plus any `required` items listed per measure.
pub fn session_to_matrix(
    records: &[SessionRecord],
    required: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, RatingMatrix>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::MissingCells(vec!["no session records".into()]));
    }
    let participants: BTreeSet<&str> = records.iter().map(|r| r.participant.as_str()).collect();
    let conditions: BTreeSet<&str> = records.iter().map(|r| r.condition.as_str()).collect();
    let mut items: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (m, list) in required {
        items.entry(m).or_default().extend(list.iter().map(String::as_str));
    }
    let mut cells: BTreeMap<(&str, &str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        items.entry(&r.measure).or_default().insert(&r.item);
        cells
            .entry((&r.measure, &r.participant, &r.condition))
            .or_default()
            .insert(&r.item, r.score);
    }
    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    for (measure, needed) in &items {
        let mut values = Vec::with_capacity(participants.len());
        for p in &participants {
            let mut row = Vec::with_capacity(conditions.len());
            for c in &conditions {
                let got = cells.get(&(*measure, *p, *c));
                let absent: Vec<&str> = needed
                    .iter()
                    .filter(|i| got.is_none_or(|g| !g.contains_key(*i)))
                    .copied()
                    .collect();
                if absent.is_empty() {
                    let g = got.expect("all items present");
                    row.push(mean(needed.iter().map(|i| g[i])));
                } else {
                    missing.push(format!(
                        "participant {p}, condition {c}, measure {measure}: {}",
                        absent.join(",")
                    ));
                    row.push(f64::NAN);
                }
            }
            values.push(row);
        }
        if missing.is_empty() {
            out.insert(
                measure.to_string(),
                RatingMatrix::new(
                    participants.iter().map(|s| s.to_string()).collect(),
                    conditions.iter().map(|s| s.to_string()).collect(),
                    values,
                )?,
            );
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::MissingCells(missing));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: Vec<Vec<f64>>) -> RatingMatrix {
        RatingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn alpha_hand_computed() {
        let a = cronbach_alpha(&m(vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]])).unwrap();
        assert!((a - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_identical_columns() {
        let rows = vec![vec![1.0, 1.0, 1.0], vec![4.0, 4.0, 4.0], vec![2.0, 2.0, 2.0]];
        assert!((cronbach_alpha(&m(rows)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_degenerate() {
        assert_eq!(
            cronbach_alpha(&m(vec![vec![1.0, 2.0], vec![2.0, 1.0]])),
            Err(StatsError::ZeroVariance("row totals"))
        );
        assert!(matches!(
            cronbach_alpha(&m(vec![vec![1.0], vec![2.0]])),
            Err(StatsError::TooSmall { what: "items", .. })
        ));
    }

    #[test]
    fn friedman_complete_ties() {
        let r = friedman(&m(vec![vec![3.0; 4]; 5])).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn friedman_full_separation_equals_n() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, i as f64 + 1.0]).collect();
        let r = friedman(&m(rows)).unwrap();
        assert!((r.statistic - 20.0).abs() < 1e-9);
        assert_eq!(r.df, 1.0);
    }

    #[test]
    fn mid_ranks_ties() {
        assert_eq!(mid_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn chi2_tail_at_four() {
        assert!((chi2_sf(4.0, 1.0) - 0.045_500_263_896_358_57).abs() < 1e-13);
        assert!((chi2_sf(30.0, 10.0) - 8.566_412_107_753_01e-4).abs() < 1e-13);
    }

    #[test]
    fn welch_hand_computed() {
        let r = t_test_independent(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        // mean difference -1; each sample variance 2.5, so se = sqrt(0.5 + 0.5) = 1
        assert!((r.statistic + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
    }

    #[test]
    fn welch_identical_and_degenerate() {
        let a = [1.0, 3.0, 4.0];
        let r = t_test_independent(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(
            t_test_independent(&[0.0; 4], &[0.0; 4]),
            Err(StatsError::ZeroVariance("both samples are constant"))
        );
    }

    #[test]
    fn reads_labelled_csv() {
        let text = "subject,fva,default\np1,5,4\np2,6,5\n";
        let mat = RatingMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(mat.col_labels, ["fva", "default"]);
        assert_eq!(mat.row_labels, ["p1", "p2"]);
        let text = "a,b\n1,2\n2,4\n3,6\n";
        let mat = RatingMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(mat.rows(), 3);
    }

    fn rec(p: &str, c: &str, measure: &str, item: &str, score: f64) -> SessionRecord {
        SessionRecord {
            participant: p.into(),
            condition: c.into(),
            measure: measure.into(),
            item: item.into(),
            score,
        }
    }

    #[test]
    fn one_session_gives_one_by_one() {
        let r: Vec<_> = ["A1", "A2", "A3"]
            .iter()
            .map(|t| rec("p1", "fva", "awareness", t, 6.0))
            .collect();
        let out = session_to_matrix(&r, &BTreeMap::new()).unwrap();
        let mat = &out["awareness"];
        assert_eq!((mat.rows(), mat.cols()), (1, 1));
        assert_eq!(mat.values()[0][0], 6.0);
    }

    #[test]
    fn two_sessions_give_one_by_two() {
        let mut r = vec![rec("p1", "fva", "awareness", "A1", 6.0)];
        r.push(rec("p1", "default", "awareness", "A1", 4.0));
        let mat = &session_to_matrix(&r, &BTreeMap::new()).unwrap()["awareness"];
        assert_eq!(mat.col_labels, ["default", "fva"]);
        assert_eq!(mat.values()[0], vec![4.0, 6.0]);
    }

    #[test]
    fn incomplete_session_lists_cells() {
        let r = vec![
            rec("p1", "fva", "awareness", "A1", 6.0),
            rec("p1", "fva", "awareness", "A2", 6.0),
            rec("p1", "default", "awareness", "A1", 4.0),
        ];
        let err = session_to_matrix(&r, &BTreeMap::new()).unwrap_err();
        assert_eq!(
            err,
            StatsError::MissingCells(vec![
                "participant p1, condition default, measure awareness: A2".into()
            ])
        );
        let required = BTreeMap::from([("influence".to_string(), vec!["I1".to_string()])]);
        let r = vec![rec("p1", "fva", "awareness", "A1", 6.0)];
        assert!(matches!(
            session_to_matrix(&r, &required),
            Err(StatsError::MissingCells(c)) if c[0].contains("measure influence: I1")
        ));
    }

    #[test]
    fn session_csv_round_trip() {
        let r = vec![rec("p1", "fva", "friendliness", "pleasant", 5.0)];
        let text = write_session_csv(&r);
        assert!(text.starts_with("participant,condition,measure,item,score\n"));
        assert_eq!(read_session_csv(text.as_bytes()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn alpha_shift_and_scale_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(1u8..=7, 3), 4..12),
            shift in -5.0f64..5.0,
            col in 0usize..3,
            scale in 0.1f64..10.0,
        ) {
            let base = m(rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect());
            let Ok(a) = cronbach_alpha(&base) else { return Ok(()) };
            let shifted: Vec<Vec<f64>> = base.values().iter().map(|r| {
                let mut r = r.clone();
                r[col] += shift;
                r
            }).collect();
            let scaled: Vec<Vec<f64>> = base.values().iter()
                .map(|r| r.iter().map(|v| v * scale).collect()).collect();
            prop_assert!((cronbach_alpha(&m(shifted)).unwrap() - a).abs() < 1e-9);
            prop_assert!((cronbach_alpha(&m(scaled)).unwrap() - a).abs() < 1e-9);
        }

        #[test]
        fn friedman_rank_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(1u8..=7, 4), 2..15),
            perm in Just([2usize, 0, 3, 1]),
        ) {
            let base = m(rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect());
            let r0 = friedman(&base).unwrap();
            prop_assert!(r0.statistic >= 0.0);
            prop_assert!((0.0..=1.0).contains(&r0.p_value));
            // monotone transform within each block
            let warped = m(base.values().iter().map(|r| r.iter().map(|v| v.powi(3) + 2.0 * v).collect()).collect());
            prop_assert!((friedman(&warped).unwrap().statistic - r0.statistic).abs() < 1e-9);
            // relabel conditions
            let permuted = m(base.values().iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect());
            let r1 = friedman(&permuted).unwrap();
            prop_assert!((r1.statistic - r0.statistic).abs() < 1e-9);
            prop_assert!((r1.p_value - r0.p_value).abs() < 1e-12);
        }
    }
}
