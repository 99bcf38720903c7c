use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::gdp::{eps_for_delta, gdp_of_dpsgd, GdpParam, ASYMPTOTIC_MIN_ITERATIONS};
use crate::error::{Error, Result};

/// Fraction of a total budget, kept exact.
pub type BudgetFraction = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrivacyParams {
    Gdp { mu: f64 },
    Approx { eps: f64, delta: f64 },
    PostProcessing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompositionRule {
    /// Composes with every other unit by summation (basic) or root-sum-of-squares (GDP).
    Sequential,
    /// Entries sharing `group` touch disjoint partitions; the group costs its maximum.
    Parallel { group: String },
    PostProcessing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    DpSgd {
        rho: f64,
        iterations: usize,
        tau: f64,
        /// Heuristic time-subsampling factor applied to `rho`, if any.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplification: Option<f64>,
    },
    Gaussian { sensitivity: f64, sigma: f64 },
    Other,
}

/// One mechanism invocation.
///
/// An entry listing several partitions ran the same mechanism independently
/// on each of those disjoint slices, so it is charged once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub mechanism: Mechanism,
    pub partitions: Vec<String>,
    pub params: PrivacyParams,
    pub rule: CompositionRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_fraction: Option<BudgetFraction>,
}

impl LedgerEntry {
    pub fn approx(label: impl Into<String>, partitions: Vec<String>, eps: f64, delta: f64) -> Self {
        Self {
            label: label.into(),
            mechanism: Mechanism::Other,
            partitions,
            params: PrivacyParams::Approx { eps, delta },
            rule: CompositionRule::Sequential,
            budget_fraction: None,
        }
    }

    pub fn gdp(label: impl Into<String>, partitions: Vec<String>, mu: f64) -> Self {
        Self {
            label: label.into(),
            mechanism: Mechanism::Other,
            partitions,
            params: PrivacyParams::Gdp { mu },
            rule: CompositionRule::Sequential,
            budget_fraction: None,
        }
    }

    /// Noisy subsampled descent over the given partitions. `amplification`
    /// multiplies `rho` before accounting.
    pub fn dpsgd(
        label: impl Into<String>,
        partitions: Vec<String>,
        rho: f64,
        iterations: usize,
        tau: f64,
        amplification: Option<f64>,
    ) -> Result<Self> {
        let effective = rho * amplification.unwrap_or(1.0);
        let mu = gdp_of_dpsgd(effective, iterations, tau)?.mu;
        Ok(Self {
            label: label.into(),
            mechanism: Mechanism::DpSgd {
                rho,
                iterations,
                tau,
                amplification,
            },
            partitions,
            params: PrivacyParams::Gdp { mu },
            rule: CompositionRule::Sequential,
            budget_fraction: None,
        })
    }

    pub fn post_processing(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            mechanism: Mechanism::Other,
            partitions: Vec::new(),
            params: PrivacyParams::PostProcessing,
            rule: CompositionRule::PostProcessing,
            budget_fraction: None,
        }
    }

    pub fn with_mechanism(mut self, mechanism: Mechanism) -> Self {
        self.mechanism = mechanism;
        self
    }

    pub fn with_rule(mut self, rule: CompositionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_fraction(mut self, fraction: BudgetFraction) -> Self {
        self.budget_fraction = Some(fraction);
        self
    }

    fn is_free(&self) -> bool {
        matches!(self.rule, CompositionRule::PostProcessing) || matches!(self.params, PrivacyParams::PostProcessing)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    pub entries: Vec<LedgerEntry>,
}

impl PrivacyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = LedgerEntry>) {
        self.entries.extend(entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact sum of the recorded budget fractions.
    pub fn fraction_total(&self) -> BudgetFraction {
        self.entries
            .iter()
            .filter(|e| !e.is_free())
            .filter_map(|e| e.budget_fraction)
            .fold(Ratio::from_integer(0), |acc, f| acc + f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsDelta {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBreakdown {
    pub rule: String,
    pub entries: usize,
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    /// Root-sum-of-squares of every GDP unit.
    pub mu_gdp: f64,
    /// Summed (ε, δ) of every approximate-DP unit.
    pub approx_total: EpsDelta,
    /// GDP part converted at each requested δ, plus the approximate total.
    pub pairs: Vec<EpsDelta>,
    /// Each GDP unit converted separately at an equal share of δ, then summed.
    pub basic_pairs: Vec<EpsDelta>,
    pub breakdown: Vec<RuleBreakdown>,
    pub notes: Vec<String>,
    pub entries: Vec<LedgerEntry>,
}

enum Unit {
    Gdp(f64),
    Approx(f64, f64),
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

fn units(ledger: &PrivacyLedger) -> Result<(Vec<Unit>, Vec<RuleBreakdown>)> {
    let mut units = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&LedgerEntry>> = BTreeMap::new();
    let mut seq = (0usize, Vec::new(), Vec::new(), Vec::new());
    let mut free = 0usize;
    for e in &ledger.entries {
        if e.is_free() {
            free += 1;
            continue;
        }
        match (&e.rule, &e.params) {
            (CompositionRule::Parallel { group }, _) => groups.entry(group.as_str()).or_default().push(e),
            (_, PrivacyParams::Gdp { mu }) => {
                GdpParam::new(*mu)?;
                seq.0 += 1;
                seq.1.push(mu * mu);
                units.push(Unit::Gdp(*mu));
            }
            (_, PrivacyParams::Approx { eps, delta }) => {
                check_approx(*eps, *delta)?;
                seq.0 += 1;
                seq.2.push(*eps);
                seq.3.push(*delta);
                units.push(Unit::Approx(*eps, *delta));
            }
            (_, PrivacyParams::PostProcessing) => unreachable!(),
        }
    }
    let mut breakdown = vec![RuleBreakdown {
        rule: "sequential".into(),
        entries: seq.0,
        mu: sorted_sum(seq.1).sqrt(),
        eps: sorted_sum(seq.2),
        delta: sorted_sum(seq.3),
    }];
    for (name, members) in groups {
        let mut seen = BTreeSet::new();
        for e in &members {
            for p in &e.partitions {
                if !seen.insert(p.as_str()) {
                    return Err(Error::Ledger(format!("parallel group '{name}' touches partition '{p}' twice")));
                }
            }
        }
        let gdp: Vec<f64> = members
            .iter()
            .filter_map(|e| match e.params {
                PrivacyParams::Gdp { mu } => Some(mu),
                _ => None,
            })
            .collect();
        let approx: Vec<(f64, f64)> = members
            .iter()
            .filter_map(|e| match e.params {
                PrivacyParams::Approx { eps, delta } => Some((eps, delta)),
                _ => None,
            })
            .collect();
        if !gdp.is_empty() && !approx.is_empty() {
            return Err(Error::Composition(format!("parallel group '{name}' mixes GDP and (eps, delta) entries")));
        }
        for &mu in &gdp {
            GdpParam::new(mu)?;
        }
        for &(e, d) in &approx {
            check_approx(e, d)?;
        }
        let mu = gdp.iter().cloned().fold(0.0, f64::max);
        let eps = approx.iter().map(|p| p.0).fold(0.0, f64::max);
        let delta = approx.iter().map(|p| p.1).fold(0.0, f64::max);
        if !gdp.is_empty() {
            units.push(Unit::Gdp(mu));
        } else {
            units.push(Unit::Approx(eps, delta));
        }
        breakdown.push(RuleBreakdown {
            rule: format!("parallel:{name}"),
            entries: members.len(),
            mu,
            eps,
            delta,
        });
    }
    breakdown.push(RuleBreakdown {
        rule: "post_processing".into(),
        entries: free,
        mu: 0.0,
        eps: 0.0,
        delta: 0.0,
    });
    Ok((units, breakdown))
}

fn check_approx(eps: f64, delta: f64) -> Result<()> {
    if eps.is_nan() || eps < 0.0 || delta.is_nan() || !(0.0..=1.0).contains(&delta) {
        return Err(Error::Ledger(format!("invalid (eps, delta) = ({eps}, {delta})")));
    }
    Ok(())
}

/// Composes a ledger and converts the result at each δ in `deltas`.
///
/// Totals are accumulated over sorted values, so they do not depend on
/// entry order.
pub fn ledger_compose(ledger: &PrivacyLedger, deltas: &[f64]) -> Result<PrivacyReport> {
    let (units, breakdown) = units(ledger)?;
    let gdp: Vec<f64> = units
        .iter()
        .filter_map(|u| match u {
            Unit::Gdp(mu) => Some(*mu),
            _ => None,
        })
        .collect();
    let mu_gdp = sorted_sum(gdp.iter().map(|m| m * m).collect()).sqrt();
    let (ae, ad): (Vec<f64>, Vec<f64>) = units
        .iter()
        .filter_map(|u| match u {
            Unit::Approx(e, d) => Some((*e, *d)),
            _ => None,
        })
        .unzip();
    let approx_total = EpsDelta {
        eps: sorted_sum(ae),
        delta: sorted_sum(ad),
    };

    let mut pairs = Vec::with_capacity(deltas.len());
    let mut basic_pairs = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let eps_gdp = eps_for_delta(GdpParam::new(mu_gdp)?, delta)?;
        let used = if gdp.is_empty() { 0.0 } else { delta };
        pairs.push(EpsDelta {
            eps: eps_gdp + approx_total.eps,
            delta: used + approx_total.delta,
        });
        let share = delta / gdp.len().max(1) as f64;
        let mut per_unit = Vec::with_capacity(gdp.len());
        for &mu in &gdp {
            per_unit.push(eps_for_delta(GdpParam::new(mu)?, share)?);
        }
        basic_pairs.push(EpsDelta {
            eps: sorted_sum(per_unit) + approx_total.eps,
            delta: used + approx_total.delta,
        });
    }

    let mut notes = Vec::new();
    for e in &ledger.entries {
        if let Mechanism::DpSgd {
            iterations,
            amplification,
            ..
        } = e.mechanism
        {
            if iterations > 0 && iterations < ASYMPTOTIC_MIN_ITERATIONS {
                notes.push(format!(
                    "{}: K = {iterations} < {ASYMPTOTIC_MIN_ITERATIONS}, asymptotic GDP value is approximate",
                    e.label
                ));
            }
            if let Some(f) = amplification {
                notes.push(format!(
                    "{}: rho scaled by time-subsampling factor {f} (heuristic amplification)",
                    e.label
                ));
            }
        }
    }
    if mu_gdp.is_infinite() {
        notes.push("a GDP unit has mu = inf: no privacy guarantee".into());
    }

    Ok(PrivacyReport {
        mu_gdp,
        approx_total,
        pairs,
        basic_pairs,
        breakdown,
        notes,
        entries: ledger.entries.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn pythagorean_gdp() {
        let mut l = PrivacyLedger::new();
        l.push(LedgerEntry::gdp("a", parts(1), 3.0));
        l.push(LedgerEntry::gdp("b", parts(1), 4.0));
        assert_eq!(ledger_compose(&l, &[]).unwrap().mu_gdp, 5.0);
    }

    #[test]
    fn basic_composition_is_exact() {
        let mut l = PrivacyLedger::new();
        l.push(LedgerEntry::approx("init", parts(10), 1.0, 5e-4));
        l.push(LedgerEntry::approx("opt", parts(10), 1.0, 5e-4));
        let r = ledger_compose(&l, &[]).unwrap();
        assert_eq!(r.approx_total, EpsDelta { eps: 2.0, delta: 1e-3 });
    }

    #[test]
    fn parallel_group_costs_max() {
        let mut l = PrivacyLedger::new();
        for i in 0..5 {
            l.push(
                LedgerEntry::approx(format!("m{i}"), vec![format!("t{i}")], 0.5, 1e-5).with_rule(
                    CompositionRule::Parallel { group: "g".into() },
                ),
            );
        }
        let r = ledger_compose(&l, &[]).unwrap();
        assert_eq!(r.approx_total, EpsDelta { eps: 0.5, delta: 1e-5 });
    }

    #[test]
    fn overlapping_parallel_partitions_rejected() {
        let mut l = PrivacyLedger::new();
        let g = CompositionRule::Parallel { group: "g".into() };
        l.push(LedgerEntry::gdp("a", vec!["t0".into(), "t1".into()], 1.0).with_rule(g.clone()));
        l.push(LedgerEntry::gdp("b", vec!["t1".into()], 1.0).with_rule(g));
        assert!(matches!(ledger_compose(&l, &[]), Err(Error::Ledger(_))));
    }

    #[test]
    fn empty_ledger() {
        let r = ledger_compose(&PrivacyLedger::new(), &[1e-5]).unwrap();
        assert_eq!(r.mu_gdp, 0.0);
        assert_eq!(r.pairs[0].eps, 0.0);
    }

    #[test]
    fn post_processing_is_free() {
        let mut l = PrivacyLedger::new();
        l.push(LedgerEntry::gdp("a", parts(1), 2.0));
        l.push(LedgerEntry::post_processing("sample"));
        assert_eq!(ledger_compose(&l, &[]).unwrap().mu_gdp, 2.0);
    }

    #[test]
    fn fractions_are_exact() {
        let mut l = PrivacyLedger::new();
        l.push(LedgerEntry::approx("c", parts(1), 1.0 / 3.0, 0.1).with_fraction(Ratio::new(1, 3)));
        for _ in 0..3 {
            l.push(LedgerEntry::approx("n", parts(1), 1.0 / 9.0, 0.1).with_fraction(Ratio::new(1, 9)));
        }
        assert_eq!(l.fraction_total(), Ratio::new(2, 3));
    }

    #[test]
    fn short_runs_are_flagged() {
        let mut l = PrivacyLedger::new();
        l.push(LedgerEntry::dpsgd("phase0", parts(10), 0.03, 20, 1.0, None).unwrap());
        let r = ledger_compose(&l, &[1e-4]).unwrap();
        assert_eq!(r.notes.len(), 1);
    }
}
