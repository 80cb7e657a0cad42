//! Balanced two-factor analysis: cell summaries, fixed-effects ANOVA,
//! Brown-Forsythe Levene test, aligned rank transform, Bonferroni contrasts
//! and normal QQ data.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use std::collections::BTreeSet;
use thiserror::Error;

/// Interaction p-value below which contrasts are taken within factor levels.
pub const INTERACTION_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("unbalanced design: cell ({a}, {b}) has {found} observations, expected {expected}")]
    Unbalanced {
        a: String,
        b: String,
        found: usize,
        expected: usize,
    },
    #[error("factor {0} needs at least 2 levels")]
    TooFewLevels(&'static str),
    #[error("each cell needs at least 2 observations")]
    TooFewReplicates,
    #[error("non-finite response at index {0}")]
    NonFinite(usize),
    #[error("response and factor columns differ in length")]
    Length,
}

/// Balanced two-factor data, stored cell by cell: all replicates of
/// `(a0, b0)`, then `(a0, b1)`, … with `b` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialData {
    a_levels: Vec<String>,
    b_levels: Vec<String>,
    n: usize,
    y: Vec<f64>,
}

impl FactorialData {
    /// Groups observations by label; levels are sorted lexically.
    pub fn from_labels(a: &[&str], b: &[&str], response: &[f64]) -> Result<Self, StatsError> {
        if a.len() != response.len() || b.len() != response.len() {
            return Err(StatsError::Length);
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
        let a_levels: Vec<String> = a
            .iter()
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let b_levels: Vec<String> = b
            .iter()
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if a_levels.len() < 2 {
            return Err(StatsError::TooFewLevels("A"));
        }
        if b_levels.len() < 2 {
            return Err(StatsError::TooFewLevels("B"));
        }
        let nb = b_levels.len();
        let mut cells: Vec<Vec<f64>> = vec![Vec::new(); a_levels.len() * nb];
        for ((x, y), v) in a.iter().zip(b).zip(response) {
            let i = a_levels
                .binary_search_by(|l| l.as_str().cmp(x))
                .expect("level present");
            let j = b_levels
                .binary_search_by(|l| l.as_str().cmp(y))
                .expect("level present");
            cells[i * nb + j].push(*v);
        }
        let n = cells[0].len();
        for (k, c) in cells.iter().enumerate() {
            if c.len() != n {
                return Err(StatsError::Unbalanced {
                    a: a_levels[k / nb].clone(),
                    b: b_levels[k % nb].clone(),
                    found: c.len(),
                    expected: n,
                });
            }
        }
        if n < 2 {
            return Err(StatsError::TooFewReplicates);
        }
        Ok(Self {
            a_levels,
            b_levels,
            n,
            y: cells.concat(),
        })
    }

    /// Builds data from cells given in `a`-major order.
    pub fn from_cells(
        a_levels: &[&str],
        b_levels: &[&str],
        cells: &[Vec<f64>],
    ) -> Result<Self, StatsError> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut y = Vec::new();
        if cells.len() != a_levels.len() * b_levels.len() {
            return Err(StatsError::Length);
        }
        for (k, c) in cells.iter().enumerate() {
            for v in c {
                a.push(a_levels[k / b_levels.len()]);
                b.push(b_levels[k % b_levels.len()]);
                y.push(*v);
            }
        }
        Self::from_labels(&a, &b, &y)
    }

    pub fn a_levels(&self) -> &[String] {
        &self.a_levels
    }

    pub fn b_levels(&self) -> &[String] {
        &self.b_levels
    }

    /// Replicates per cell.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let k = i * self.b_levels.len() + j;
        &self.y[k * self.n..(k + 1) * self.n]
    }

    /// Same design with a new response in storage order.
    pub fn with_response(&self, y: Vec<f64>) -> Self {
        assert_eq!(y.len(), self.y.len());
        Self { y, ..self.clone() }
    }

    fn means(&self) -> Means {
        let (na, nb) = (self.a_levels.len(), self.b_levels.len());
        let mut cell = vec![0.0; na * nb];
        for i in 0..na {
            for j in 0..nb {
                cell[i * nb + j] = mean(self.cell(i, j));
            }
        }
        let a = (0..na)
            .map(|i| (0..nb).map(|j| cell[i * nb + j]).sum::<f64>() / nb as f64)
            .collect();
        let b = (0..nb)
            .map(|j| (0..na).map(|i| cell[i * nb + j]).sum::<f64>() / na as f64)
            .collect();
        Means {
            grand: mean(&self.y),
            a,
            b,
            cell,
        }
    }
}

struct Means {
    grand: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    cell: Vec<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub a: String,
    pub b: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Per-cell n, mean and sample standard deviation in `a`-major order.
pub fn summarize(data: &FactorialData) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for (i, a) in data.a_levels.iter().enumerate() {
        for (j, b) in data.b_levels.iter().enumerate() {
            let c = data.cell(i, j);
            out.push(CellSummary {
                a: a.clone(),
                b: b.clone(),
                n: c.len(),
                mean: mean(c),
                sd: sd(c),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub effect: String,
    pub df: f64,
    pub sum_sq: f64,
    pub mean_sq: f64,
    /// `None` when the residual mean square is zero, or for the residual row.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

/// Rows: A, B, A:B, Residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
}

impl AnovaTable {
    pub fn row(&self, effect: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.effect == effect)
    }

    pub fn residual(&self) -> &AnovaRow {
        self.rows
            .last()
            .expect("the residual row is always present")
    }
}

pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(d1, d2)
        .map(|d| d.sf(f))
        .unwrap_or(f64::NAN)
}

/// Two-sided Student-t tail probability.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, df)
        .map(|d| (2.0 * d.sf(t.abs())).min(1.0))
        .unwrap_or(f64::NAN)
}

/// Fixed-effects two-way ANOVA with interaction for a balanced design.
/// Effect names are `"A"`, `"B"`, `"A:B"` and `"Residuals"`.
pub fn two_way_anova(data: &FactorialData) -> AnovaTable {
    let m = data.means();
    let (na, nb, n) = (data.a_levels.len(), data.b_levels.len(), data.n);
    let ss_a = (nb * n) as f64 * m.a.iter().map(|v| (v - m.grand).powi(2)).sum::<f64>();
    let ss_b = (na * n) as f64 * m.b.iter().map(|v| (v - m.grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_e = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let c = m.cell[i * nb + j];
            ss_ab += n as f64 * (c - m.a[i] - m.b[j] + m.grand).powi(2);
            ss_e += data.cell(i, j).iter().map(|v| (v - c).powi(2)).sum::<f64>();
        }
    }
    let df_e = (na * nb * (n - 1)) as f64;
    let ms_e = ss_e / df_e;
    let effect = |name: &str, df: usize, ss: f64| {
        let ms = ss / df as f64;
        let f = (ms_e > 0.0).then(|| ms / ms_e);
        AnovaRow {
            effect: name.into(),
            df: df as f64,
            sum_sq: ss,
            mean_sq: ms,
            f,
            p: f.map(|f| f_sf(f, df as f64, df_e)),
        }
    };
    AnovaTable {
        rows: vec![
            effect("A", na - 1, ss_a),
            effect("B", nb - 1, ss_b),
            effect("A:B", (na - 1) * (nb - 1), ss_ab),
            AnovaRow {
                effect: "Residuals".into(),
                df: df_e,
                sum_sq: ss_e,
                mean_sq: ms_e,
                f: None,
                p: None,
            },
        ],
    }
}

/// Residuals from the cell-means model, in storage order.
pub fn anova_residuals(data: &FactorialData) -> Vec<f64> {
    let m = data.means();
    let nb = data.b_levels.len();
    data.y
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let cell = k / data.n;
            v - m.cell[(cell / nb) * nb + cell % nb]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeveneResult {
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
}

/// Median-centred Levene test over arbitrary groups. A zero between-group
/// spread gives a statistic of 0 even when every deviation is identical.
pub fn levene_groups(groups: &[&[f64]]) -> LeveneResult {
    let k = groups.len();
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let md = median(g);
            g.iter().map(|v| (v - md).abs()).collect()
        })
        .collect();
    let total: usize = z.iter().map(Vec::len).sum();
    let grand = z.iter().flatten().sum::<f64>() / total as f64;
    let means: Vec<f64> = z.iter().map(|g| mean(g)).collect();
    let between: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df1 = (k - 1) as f64;
    let df2 = (total - k) as f64;
    let statistic = if between == 0.0 {
        0.0
    } else if within == 0.0 {
        f64::INFINITY
    } else {
        (between / df1) / (within / df2)
    };
    LeveneResult {
        statistic,
        df1,
        df2,
        p: f_sf(statistic, df1, df2),
    }
}

/// Levene test with every cell as a group.
pub fn levene_test(data: &FactorialData) -> LeveneResult {
    let groups: Vec<&[f64]> = data.y.chunks(data.n).collect();
    levene_groups(&groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    A,
    B,
    AB,
}

impl Effect {
    pub const ALL: [Effect; 3] = [Effect::A, Effect::B, Effect::AB];

    pub fn name(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::AB => "A:B",
        }
    }
}

/// Responses aligned for `effect`: residual plus that effect's estimate.
pub fn align(data: &FactorialData, effect: Effect) -> Vec<f64> {
    let m = data.means();
    let nb = data.b_levels.len();
    data.y
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let cell = k / data.n;
            let (i, j) = (cell / nb, cell % nb);
            let resid = v - m.cell[cell];
            resid
                + match effect {
                    Effect::A => m.a[i] - m.grand,
                    Effect::B => m.b[j] - m.grand,
                    Effect::AB => m.cell[cell] - m.a[i] - m.b[j] + m.grand,
                }
        })
        .collect()
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtRow {
    pub effect: String,
    pub df: f64,
    pub df_res: f64,
    pub sum_sq: f64,
    pub sum_sq_res: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

/// Ranked data aligned for `effect`.
pub fn art_ranks(data: &FactorialData, effect: Effect) -> FactorialData {
    data.with_response(average_ranks(&align(data, effect)))
}

/// Aligned rank transform ANOVA: one aligned, ranked dataset per effect, of
/// which only the tested effect's row is kept.
pub fn art_anova(data: &FactorialData) -> Vec<ArtRow> {
    Effect::ALL
        .iter()
        .map(|&e| {
            let table = two_way_anova(&art_ranks(data, e));
            let row = table.row(e.name()).expect("effect rows are always present");
            let res = table.residual();
            ArtRow {
                effect: e.name().into(),
                df: row.df,
                df_res: res.df,
                sum_sq: row.sum_sq,
                sum_sq_res: res.sum_sq,
                f: row.f,
                p: row.p,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub contrast: String,
    pub estimate: f64,
    pub se: f64,
    pub df: f64,
    pub t: f64,
    pub p_raw: f64,
    pub p_adj: f64,
}

/// `min(1, k·p)`.
pub fn bonferroni(p: f64, k: usize) -> f64 {
    (p * k as f64).min(1.0)
}

fn contrast(name: String, m1: f64, m2: f64, n1: f64, n2: f64, ms: f64, df: f64) -> Contrast {
    let estimate = m1 - m2;
    let se = (ms * (1.0 / n1 + 1.0 / n2)).sqrt();
    let t = if se > 0.0 {
        estimate / se
    } else if estimate == 0.0 {
        0.0
    } else {
        estimate.signum() * f64::INFINITY
    };
    let p_raw = if se > 0.0 || estimate != 0.0 {
        t_two_sided(t, df)
    } else {
        1.0
    };
    Contrast {
        contrast: name,
        estimate,
        se,
        df,
        t,
        p_raw,
        p_adj: p_raw,
    }
}

/// Bonferroni-adjusted pairwise contrasts. With a significant interaction
/// the family is every within-level comparison (B pairs inside each A level,
/// then A pairs inside each B level); otherwise it is the A main-effect pairs.
pub fn pairwise_contrasts(data: &FactorialData) -> Vec<Contrast> {
    let table = two_way_anova(data);
    let interaction = table
        .row("A:B")
        .and_then(|r| r.p)
        .is_some_and(|p| p < INTERACTION_ALPHA);
    pairwise_contrasts_with(data, interaction)
}

/// As [`pairwise_contrasts`] with the family chosen by the caller.
pub fn pairwise_contrasts_with(data: &FactorialData, simple_effects: bool) -> Vec<Contrast> {
    let table = two_way_anova(data);
    let res = table.residual();
    let (ms, df) = (res.mean_sq, res.df);
    let m = data.means();
    let (na, nb, n) = (data.a_levels.len(), data.b_levels.len(), data.n as f64);
    let (al, bl) = (&data.a_levels, &data.b_levels);
    let mut out = Vec::new();
    if simple_effects {
        for (i, ai) in al.iter().enumerate() {
            for j1 in 0..nb {
                for j2 in j1 + 1..nb {
                    let name = format!("{ai}-{}, {ai}-{}", bl[j1], bl[j2]);
                    out.push(contrast(
                        name,
                        m.cell[i * nb + j1],
                        m.cell[i * nb + j2],
                        n,
                        n,
                        ms,
                        df,
                    ));
                }
            }
        }
        for (j, bj) in bl.iter().enumerate() {
            for i1 in 0..na {
                for i2 in i1 + 1..na {
                    let name = format!("{}-{bj}, {}-{bj}", al[i1], al[i2]);
                    out.push(contrast(
                        name,
                        m.cell[i1 * nb + j],
                        m.cell[i2 * nb + j],
                        n,
                        n,
                        ms,
                        df,
                    ));
                }
            }
        }
    } else {
        let nm = n * nb as f64;
        for i1 in 0..na {
            for i2 in i1 + 1..na {
                let name = format!("{} - {}", al[i1], al[i2]);
                out.push(contrast(name, m.a[i1], m.a[i2], nm, nm, ms, df));
            }
        }
    }
    let k = out.len();
    for c in &mut out {
        c.p_adj = bonferroni(c.p_raw, k);
    }
    out
}

/// Sorted sample paired with normal quantiles at `(i − 0.5)/n`.
pub fn qq_data(residuals: &[f64]) -> Vec<(f64, f64)> {
    let mut s = residuals.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let normal = Normal::new(0.0, 1.0).expect("the standard normal is valid");
    s.into_iter()
        .enumerate()
        .map(|(i, v)| (normal.inverse_cdf((i as f64 + 0.5) / n), v))
        .collect()
}
