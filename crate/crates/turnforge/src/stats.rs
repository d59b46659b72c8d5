//! Group-comparison statistics with conversation-clustered covariance.
//!
//! Both tests regress outcomes on group indicators (cell-means coding, so
//! coefficients are weighted group means) and estimate a one-way
//! cluster-robust sandwich covariance
//!
//! ```text
//! V = A^-1 B A^-1 * G/(G-1),   A = X'WX,   B = sum_g s_g s_g'
//! ```
//!
//! where `s_g` stacks each cluster's weighted score contributions and `G`
//! counts clusters. The distribution test one-hot encodes decile bins 2..10
//! (bin 1 is the omitted reference) and tests joint equality of all group
//! coefficient vectors with a Wald F statistic on `9*(K-1)` and `G-1`
//! degrees of freedom. The mean test runs the same machinery on a single
//! (optionally Winsorized) outcome and reports per-pair differences with
//! normal-approximation confidence intervals.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::features::{decile_bin, winsorize, DecileBinning};

pub const DEFAULT_WINSOR_LEVEL: f64 = 0.95;

/// One turn-level observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub value: f64,
    pub group: String,
    pub cluster_id: String,
    pub weight: f64,
}

/// Per-turn records carrying group labels, cluster ids, and weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupDesign {
    pub rows: Vec<GroupRow>,
}

impl GroupDesign {
    pub fn new(rows: Vec<GroupRow>) -> Self {
        GroupDesign { rows }
    }

    pub fn groups(&self) -> Vec<String> {
        let mut groups: Vec<String> = self.rows.iter().map(|r| r.group.clone()).collect();
        groups.sort();
        groups.dedup();
        groups
    }

    pub fn clusters(&self) -> Vec<String> {
        let mut clusters: Vec<String> = self.rows.iter().map(|r| r.cluster_id.clone()).collect();
        clusters.sort();
        clusters.dedup();
        clusters
    }

    fn validate(&self) -> Result<Indexed> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.rows.iter().any(|r| !(r.weight > 0.0)) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        let groups = self.groups();
        if groups.len() < 2 {
            return Err(Error::TooFewGroups(groups.len()));
        }
        let clusters = self.clusters();
        let group_index: BTreeMap<&str, usize> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let cluster_index: BTreeMap<&str, usize> = clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let group_of: Vec<usize> = self
            .rows
            .iter()
            .map(|r| group_index[r.group.as_str()])
            .collect();
        let cluster_of: Vec<usize> = self
            .rows
            .iter()
            .map(|r| cluster_index[r.cluster_id.as_str()])
            .collect();
        for (k, group) in groups.iter().enumerate() {
            let mut seen = std::collections::BTreeSet::new();
            for (i, &g) in group_of.iter().enumerate() {
                if g == k {
                    seen.insert(cluster_of[i]);
                }
            }
            if seen.len() < 2 {
                return Err(Error::TooFewClusters {
                    group: group.clone(),
                    clusters: seen.len(),
                });
            }
        }
        Ok(Indexed {
            groups,
            clusters,
            group_of,
            cluster_of,
        })
    }
}

struct Indexed {
    groups: Vec<String>,
    clusters: Vec<String>,
    group_of: Vec<usize>,
    cluster_of: Vec<usize>,
}

/// Weighted group means and the stacked cluster-robust covariance for `m`
/// outcomes. Coefficient `(outcome, group)` lives at index `outcome*K+group`.
fn cluster_fit(
    design: &GroupDesign,
    indexed: &Indexed,
    outcomes: &[Vec<f64>],
) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let k_groups = indexed.groups.len();
    let g_clusters = indexed.clusters.len();
    let m_outcomes = outcomes.len();
    let n = design.rows.len();

    let mut group_weight = vec![0.0f64; k_groups];
    for (i, row) in design.rows.iter().enumerate() {
        group_weight[indexed.group_of[i]] += row.weight;
    }

    let mut beta = vec![vec![0.0f64; k_groups]; m_outcomes];
    for (m, outcome) in outcomes.iter().enumerate() {
        for i in 0..n {
            beta[m][indexed.group_of[i]] += design.rows[i].weight * outcome[i];
        }
        for k in 0..k_groups {
            beta[m][k] /= group_weight[k];
        }
    }

    let dim = m_outcomes * k_groups;
    let mut scores = vec![vec![0.0f64; dim]; g_clusters];
    for i in 0..n {
        let g = indexed.cluster_of[i];
        let k = indexed.group_of[i];
        let w = design.rows[i].weight;
        for m in 0..m_outcomes {
            scores[g][m * k_groups + k] += w * (outcomes[m][i] - beta[m][k]);
        }
    }

    let correction = g_clusters as f64 / (g_clusters as f64 - 1.0);
    let mut vcov = DMatrix::zeros(dim, dim);
    for s in &scores {
        for a in 0..dim {
            if s[a] == 0.0 {
                continue;
            }
            for b in 0..dim {
                vcov[(a, b)] += s[a] * s[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            let sa = group_weight[a % k_groups];
            let sb = group_weight[b % k_groups];
            vcov[(a, b)] *= correction / (sa * sb);
        }
    }
    (beta, vcov)
}

/// Quadratic form `d' S^-1 d`. The contrast covariance can be rank
/// deficient when a group's support misses whole bins (its indicator
/// residuals are then linearly dependent), so this falls back to the
/// eigenvalue pseudo-inverse.
fn wald_statistic(s: &DMatrix<f64>, d: &DVector<f64>) -> Result<f64> {
    if let Some(inv) = s.clone().try_inverse() {
        let w = (d.transpose() * inv * d)[(0, 0)];
        if w.is_finite() && w >= 0.0 {
            return Ok(w);
        }
    }
    let eigen = s.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::SingularDesign(
            "contrast covariance has no spread".into(),
        ));
    }
    let tol = max * 1e-10;
    let mut w = 0.0;
    for (i, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let proj = eigen.eigenvectors.column(i).dot(d);
            w += proj * proj / lambda;
        }
    }
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::SingularDesign("non-finite Wald statistic".into()))
    }
}

/// Result of the decile-distribution equality test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTestResult {
    pub groups: Vec<String>,
    /// K x 10 weighted bin shares; each row sums to one.
    pub group_proportions: Vec<Vec<f64>>,
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
    pub n_rows: usize,
    pub n_clusters: usize,
}

/// Wald F test that every group shares the same decile distribution.
/// `bins.assignments` must align one-to-one with `design.rows`.
pub fn distribution_test(
    design: &GroupDesign,
    bins: &DecileBinning,
) -> Result<DistributionTestResult> {
    let indexed = design.validate()?;
    if bins.assignments.len() != design.rows.len() {
        return Err(Error::DimensionMismatch(
            bins.assignments.len(),
            design.rows.len(),
        ));
    }
    let k_groups = indexed.groups.len();

    for (k, group) in indexed.groups.iter().enumerate() {
        let mut bins_seen = std::collections::BTreeSet::new();
        for (i, &g) in indexed.group_of.iter().enumerate() {
            if g == k {
                bins_seen.insert(bins.assignments[i]);
            }
        }
        if bins_seen.len() < 2 {
            return Err(Error::SingularDesign(format!(
                "group {group} is entirely within one bin"
            )));
        }
    }

    // indicators for bins 2..=10; bin 1 is the omitted reference
    let outcomes: Vec<Vec<f64>> = (2..=10u8)
        .map(|bin| {
            bins.assignments
                .iter()
                .map(|&b| if b == bin { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let m_outcomes = outcomes.len();

    let (beta, vcov) = cluster_fit(design, &indexed, &outcomes);

    let mut proportions = vec![vec![0.0f64; 10]; k_groups];
    for k in 0..k_groups {
        let mut rest = 0.0;
        for m in 0..m_outcomes {
            proportions[k][m + 1] = beta[m][k];
            rest += beta[m][k];
        }
        proportions[k][0] = 1.0 - rest;
    }

    // contrasts: group k vs group 0 for each outcome, jointly
    let q = m_outcomes * (k_groups - 1);
    let dim = m_outcomes * k_groups;
    let mut r = DMatrix::zeros(q, dim);
    let mut r_beta = DVector::zeros(q);
    let mut row = 0;
    for k in 1..k_groups {
        for m in 0..m_outcomes {
            r[(row, m * k_groups + k)] = 1.0;
            r[(row, m * k_groups)] = -1.0;
            r_beta[row] = beta[m][k] - beta[m][0];
            row += 1;
        }
    }
    let rvr = &r * &vcov * r.transpose();
    let wald = wald_statistic(&rvr, &r_beta)?;
    let f_stat = wald / q as f64;
    let df_den = indexed.clusters.len() - 1;
    let p_value = if f_stat.is_finite() && f_stat >= 0.0 {
        let dist = FisherSnedecor::new(q as f64, df_den as f64)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        1.0 - dist.cdf(f_stat)
    } else {
        return Err(Error::SingularDesign("non-finite Wald statistic".into()));
    };

    Ok(DistributionTestResult {
        groups: indexed.groups.clone(),
        group_proportions: proportions,
        f_stat,
        df_num: q,
        df_den,
        p_value,
        n_rows: design.rows.len(),
        n_clusters: indexed.clusters.len(),
    })
}

/// Difference in (optionally Winsorized) weighted means for one group pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanDiffResult {
    pub group_a: String,
    pub group_b: String,
    /// mean(group_a) - mean(group_b)
    pub diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub se: f64,
    pub p_value: f64,
}

/// Options for [`mean_difference`] and [`compare_groups`].
#[derive(Debug, Clone, Copy)]
pub struct MeanDiffOptions {
    pub winsor_level: f64,
    /// Winsorize the outcome before the fit (for unbounded features).
    pub apply_winsor: bool,
    /// Use a t critical value on G-1 degrees of freedom instead of the
    /// normal 1.96.
    pub use_t_critical: bool,
}

impl Default for MeanDiffOptions {
    fn default() -> Self {
        MeanDiffOptions {
            winsor_level: DEFAULT_WINSOR_LEVEL,
            apply_winsor: true,
            use_t_critical: false,
        }
    }
}

/// Estimate mean differences for every group pair with cluster-robust
/// standard errors. Pairs are ordered `(earlier, later)` by group name and
/// reported as `earlier - later`.
pub fn mean_difference(
    design: &GroupDesign,
    opts: &MeanDiffOptions,
) -> Result<Vec<MeanDiffResult>> {
    let indexed = design.validate()?;
    let raw: Vec<f64> = design.rows.iter().map(|r| r.value).collect();
    let values = if opts.apply_winsor {
        winsorize(&raw, opts.winsor_level)
    } else {
        raw
    };
    let (beta, vcov) = cluster_fit(design, &indexed, std::slice::from_ref(&values));

    let g = indexed.clusters.len();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let crit = if opts.use_t_critical {
        StudentsT::new(0.0, 1.0, (g - 1) as f64)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .inverse_cdf(0.975)
    } else {
        normal.inverse_cdf(0.975)
    };

    let k_groups = indexed.groups.len();
    let mut out = Vec::new();
    for a in 0..k_groups {
        for b in (a + 1)..k_groups {
            let diff = beta[0][a] - beta[0][b];
            let var = vcov[(a, a)] + vcov[(b, b)] - 2.0 * vcov[(a, b)];
            let se = var.max(0.0).sqrt();
            let p_value = if se > 0.0 {
                2.0 * (1.0 - normal.cdf((diff / se).abs()))
            } else if diff == 0.0 {
                1.0
            } else {
                0.0
            };
            out.push(MeanDiffResult {
                group_a: indexed.groups[a].clone(),
                group_b: indexed.groups[b].clone(),
                diff,
                ci_low: diff - crit * se,
                ci_high: diff + crit * se,
                se,
                p_value,
            });
        }
    }
    Ok(out)
}

/// Benjamini-Hochberg step-up adjustment: sort ascending, take
/// `q(i) = p(i) * m / i`, enforce monotonicity from the largest rank down,
/// cap at one, and return values in the original order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(p));
        }
    }
    let m = p_values.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0f64; m];
    let mut running = f64::INFINITY;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        let q = p_values[idx] * m as f64 / rank as f64;
        running = running.min(q).min(1.0);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquaredResult {
    pub stat: f64,
    pub df: usize,
    pub p: f64,
}

/// Pearson chi-squared test of independence on an R x C count table.
pub fn chi_squared_independence(table: &[Vec<u64>]) -> Result<ChiSquaredResult> {
    let rows = table.len();
    let cols = table.first().map(|r| r.len()).unwrap_or(0);
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidConfig("table must be at least 2x2".into()));
    }
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("ragged table".into()));
    }
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols)
        .map(|c| table.iter().map(|r| r[c]).sum())
        .collect();
    if row_sums.iter().any(|&s| s == 0) || col_sums.iter().any(|&s| s == 0) {
        return Err(Error::ZeroMargin);
    }
    let total: u64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / total as f64;
            let d = observed as f64 - expected;
            stat += d * d / expected;
        }
    }
    let df = (rows - 1) * (cols - 1);
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(ChiSquaredResult {
        stat,
        df,
        p: 1.0 - dist.cdf(stat),
    })
}

/// One feature's design plus whether it should be Winsorized before the
/// mean contrast.
#[derive(Debug, Clone)]
pub struct FeatureDesign {
    pub feature: String,
    pub design: GroupDesign,
    pub winsorize: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CompareConfig {
    pub winsor_level: f64,
    pub use_t_critical: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            winsor_level: DEFAULT_WINSOR_LEVEL,
            use_t_critical: false,
        }
    }
}

/// One (feature, contrast) report row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub feature: String,
    pub contrast: String,
    pub distribution: DistributionTestResult,
    pub mean: MeanDiffResult,
    pub p_adj_mean: f64,
    pub p_adj_distr: f64,
    pub n_turns: usize,
    pub n_clusters: usize,
}

/// Run the distribution and mean tests on every feature, then adjust all
/// collected p-values jointly with Benjamini-Hochberg.
pub fn compare_groups(
    features: &[FeatureDesign],
    config: &CompareConfig,
) -> Result<Vec<GroupComparison>> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    struct Partial {
        feature: String,
        distribution: DistributionTestResult,
        means: Vec<MeanDiffResult>,
        n_turns: usize,
        n_clusters: usize,
    }
    let mut partials = Vec::new();
    for fd in features {
        let values: Vec<f64> = fd.design.rows.iter().map(|r| r.value).collect();
        let weights: Vec<f64> = fd.design.rows.iter().map(|r| r.weight).collect();
        let bins = decile_bin(&values, &weights)?;
        let distribution = distribution_test(&fd.design, &bins)?;
        let opts = MeanDiffOptions {
            winsor_level: config.winsor_level,
            apply_winsor: fd.winsorize,
            use_t_critical: config.use_t_critical,
        };
        let means = mean_difference(&fd.design, &opts)?;
        partials.push(Partial {
            feature: fd.feature.clone(),
            n_turns: fd.design.rows.len(),
            n_clusters: distribution.n_clusters,
            distribution,
            means,
        });
    }

    // one joint family: every mean p and every distribution p in the run
    let mut pool = Vec::new();
    for p in &partials {
        pool.push(p.distribution.p_value);
        for m in &p.means {
            pool.push(m.p_value);
        }
    }
    let adjusted = bh_adjust(&pool)?;

    let mut out = Vec::new();
    let mut cursor = 0;
    for partial in partials {
        let p_adj_distr = adjusted[cursor];
        cursor += 1;
        for mean in partial.means {
            let p_adj_mean = adjusted[cursor];
            cursor += 1;
            out.push(GroupComparison {
                feature: partial.feature.clone(),
                contrast: format!("{}-{}", mean.group_a, mean.group_b),
                distribution: partial.distribution.clone(),
                mean,
                p_adj_mean,
                p_adj_distr,
                n_turns: partial.n_turns,
                n_clusters: partial.n_clusters,
            });
        }
    }
    Ok(out)
}
