//! Batch experiment driver: the random counterexample construction, property
//! campaigns over every module, and deterministic report emission.
//!
//! Reports are pure functions of (seed, params): trials run in parallel with
//! per-trial seeds `trial_seed(master, index)` and are aggregated by index,
//! so two runs with the same inputs emit identical bytes.

pub mod gen;
mod suites;

use crate::blockade::trial_seed;
use crate::exact::{self, Rat};
use crate::graph::Graph;
use num::bigint::BigInt;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExperimentError {
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("invalid config: {0}")]
    Config(String),
}

/// One aggregate property with its verdict; `tolerance` states how the
/// numbers behind it were compared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub passed: bool,
    pub tolerance: String,
    pub detail: String,
}

/// One trial's record; field meanings vary per suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
}

impl TrialRecord {
    pub fn new(trial: u64, seed: u64) -> TrialRecord {
        TrialRecord { trial, seed, fields: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.to_string(), value);
    }

    pub fn flag(&self, key: &str) -> bool {
        self.fields.get(key) == Some(&Value::Bool(true))
    }
}

/// Full experiment output: metadata, per-trial records, and the aggregate
/// verdict per property.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub params: Value,
    pub properties: Vec<PropertyOutcome>,
    pub passed: bool,
    pub trials: Vec<TrialRecord>,
}

impl Report {
    pub(crate) fn assemble(
        suite: &str,
        seed: u64,
        params: Value,
        properties: Vec<PropertyOutcome>,
        trials: Vec<TrialRecord>,
    ) -> Report {
        let passed = properties.iter().all(|p| p.passed);
        Report {
            tool: "purepairs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            suite: suite.into(),
            seed,
            params,
            properties,
            passed,
            trials,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The trial table alone, one row per trial, columns sorted by name.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&str> = Vec::new();
        for t in &self.trials {
            for k in t.fields.keys() {
                if !keys.contains(&k.as_str()) {
                    keys.push(k);
                }
            }
        }
        keys.sort_unstable();
        let mut out = String::from("trial,seed");
        for k in &keys {
            out.push(',');
            out.push_str(&csv_escape(k));
        }
        out.push('\n');
        for t in &self.trials {
            out.push_str(&format!("{},{}", t.trial, t.seed));
            for k in &keys {
                out.push(',');
                if let Some(v) = t.fields.get(*k) {
                    out.push_str(&csv_escape(&render_value(v)));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn property(name: &str, passed: bool, tolerance: &str, detail: String) -> PropertyOutcome {
    PropertyOutcome { name: name.into(), passed, tolerance: tolerance.into(), detail }
}

/// Runs `trials` independent jobs across worker threads and returns their
/// records in trial order.
pub(crate) fn run_trials<F>(trials: u64, job: F) -> Vec<TrialRecord>
where
    F: Fn(u64) -> TrialRecord + Send + Sync,
{
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8)
        .min(trials.max(1) as usize);
    let mut slots: Vec<Option<TrialRecord>> = (0..trials).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let job = &job;
                scope.spawn(move || {
                    let mut done = Vec::new();
                    let mut i = w;
                    while i < trials {
                        done.push((i, job(i)));
                        i += workers as u64;
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, record) in h.join().expect("trial worker") {
                slots[i as usize] = Some(record);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every trial ran")).collect()
}

/// Knobs shared by every campaign suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignParams {
    /// Override for the suite's default trial count.
    pub trials: Option<u64>,
    /// Node budget for bounded exact searches.
    pub budget: u64,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams { trials: None, budget: 5_000_000 }
    }
}

pub const SUITES: [&str; 10] = [
    "congestion-oracle-agreement",
    "forest-zero",
    "cycle-values",
    "longbranch-certificates",
    "buildable-congestion",
    "weak-embed",
    "blockade-expansion",
    "machinery-invariants",
    "force-oracle-equivalence",
    "ledger-replay",
];

/// Runs one named property campaign; deterministic given `seed`.
pub fn campaign(suite: &str, params: &CampaignParams, seed: u64) -> Result<Report, ExperimentError> {
    match suite {
        "congestion-oracle-agreement" => Ok(suites::congestion_oracle_agreement(params, seed)),
        "forest-zero" => Ok(suites::forest_zero(params, seed)),
        "cycle-values" => Ok(suites::cycle_values(params, seed)),
        "longbranch-certificates" => Ok(suites::longbranch_certificates(params, seed)),
        "buildable-congestion" => Ok(suites::buildable_congestion(params, seed)),
        "weak-embed" => Ok(suites::weak_embed(params, seed)),
        "blockade-expansion" => Ok(suites::blockade_expansion(params, seed)),
        "machinery-invariants" => Ok(suites::machinery_invariants(params, seed)),
        "force-oracle-equivalence" => Ok(suites::force_oracle_equivalence(params, seed)),
        "ledger-replay" => Ok(suites::ledger_replay(params, seed)),
        other => Err(ExperimentError::UnknownSuite(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// the random counterexample construction

/// Inputs of the deletion experiment.  `j` must be a subgraph of `h` and
/// `j_prime` of the complement of `h`, each denser than `1/(1-c)`; the edge
/// probability exponent `d` sits strictly between `c` and the slack `c'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    #[serde(with = "crate::graph::edge_list_string")]
    pub h: Graph,
    #[serde(with = "crate::graph::edge_list_string")]
    pub j: Graph,
    #[serde(with = "crate::graph::edge_list_string")]
    pub j_prime: Graph,
    #[serde(with = "crate::exact::rat_string")]
    pub c: Rat,
    #[serde(with = "crate::exact::rat_string")]
    pub d: Rat,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    /// Pure pairs are searched with both sides at least this size;
    /// `None` derives the smallest `t` with `2t >= n^(1-c)`.
    #[serde(default)]
    pub pair_threshold: Option<usize>,
    /// Node budget for the exact pure-pair search.
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    50_000_000
}

impl CounterexampleConfig {
    /// The standard instance: `H = C_5` is self-complementary, so both
    /// witnesses are `C_5` itself and `c' = 1/5`.
    pub fn c5(c: Rat, n: usize, trials: u64, seed: u64) -> CounterexampleConfig {
        let c5 = Graph::cycle(5);
        let c_prime = exact::rat(1, 5);
        let d = exact::midpoint(&c, &c_prime);
        CounterexampleConfig {
            h: c5.clone(),
            j: c5.clone(),
            j_prime: c5,
            c,
            d,
            n,
            trials,
            seed,
            pair_threshold: None,
            budget: default_budget(),
        }
    }

    /// Density slack `1 - c'` of the two witnesses.
    pub fn slack(&self) -> Result<Rat, ExperimentError> {
        let ratio = |g: &Graph, what: &str| -> Result<Rat, ExperimentError> {
            if g.edge_count() == 0 {
                return Err(ExperimentError::Config(format!("{what} has no edge")));
            }
            Ok(exact::rat(g.n() as i64 - 1, g.edge_count() as i64))
        };
        Ok(ratio(&self.j, "j")?.max(ratio(&self.j_prime, "j_prime")?))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.h.is_null() || self.n == 0 {
            return bad("h and n must be nonempty".into());
        }
        if !is_subgraph(&self.j, &self.h) {
            return bad("j is not a subgraph of h".into());
        }
        if !is_subgraph(&self.j_prime, &self.h.complement()) {
            return bad("j_prime is not a subgraph of the complement of h".into());
        }
        if self.c <= exact::zero() || self.c >= exact::one() {
            return bad(format!("c = {} outside (0, 1)", self.c));
        }
        let one_minus_c = exact::one() - &self.c;
        for (g, what) in [(&self.j, "j"), (&self.j_prime, "j_prime")] {
            let lhs = exact::rint(g.n() as i64 - 1);
            let rhs = &one_minus_c * exact::rint(g.edge_count() as i64);
            if lhs >= rhs {
                return bad(format!("{what} is too sparse: |V|-1 = {lhs} >= (1-c)|E| = {rhs}"));
            }
        }
        let c_prime = exact::one() - self.slack()?;
        if !(self.c < self.d && self.d < c_prime) {
            return bad(format!("need c < d < c' = {c_prime}, got c = {}, d = {}", self.c, self.d));
        }
        Ok(())
    }

    /// Largest 64-bit dyadic rational below `n^(d-1)`, the experiment's
    /// edge probability.
    pub fn edge_probability(&self) -> Rat {
        dyadic_power_leq(self.n, &self.d)
    }

    /// Both sides of the pure-pair search must reach this size.
    pub fn threshold(&self) -> usize {
        if let Some(t) = self.pair_threshold {
            return t.max(1);
        }
        // smallest t with (2t)^q >= n^(q-p) for c = p/q
        let p = self.c.numer().to_u64_digits().1.first().copied().unwrap_or(0);
        let q = self.c.denom().to_u64_digits().1.first().copied().unwrap_or(1);
        let want = BigInt::from(self.n).pow((q - p) as u32);
        let mut t = 1usize;
        while BigInt::from(2 * t).pow(q as u32) < want {
            t += 1;
        }
        t
    }
}

/// Injective edge-preserving map test (non-edges of `j` are unconstrained).
fn is_subgraph(j: &Graph, h: &Graph) -> bool {
    fn rec(j: &Graph, h: &Graph, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let k = map.len();
        if k == j.n() {
            return true;
        }
        'cand: for cand in 0..h.n() {
            if used[cand] {
                continue;
            }
            for prev in 0..k {
                if j.has_edge(prev, k) && !h.has_edge(map[prev], cand) {
                    continue 'cand;
                }
            }
            map.push(cand);
            used[cand] = true;
            if rec(j, h, map, used) {
                return true;
            }
            map.pop();
            used[cand] = false;
        }
        false
    }
    j.n() <= h.n() && rec(j, h, &mut Vec::new(), &mut vec![false; h.n()])
}

/// Largest `u / 2^64` with `(u / 2^64)^q <= n^(a-q)` where `d = a/q`; the
/// dyadic probability fed to the graph sampler.
fn dyadic_power_leq(n: usize, d: &Rat) -> Rat {
    assert!(d.is_positive() && *d < exact::one(), "d must lie in (0, 1)");
    let a = d.numer().to_u32_digits().1.first().copied().unwrap_or(0);
    let q = d.denom().to_u32_digits().1.first().copied().unwrap_or(1);
    let n_pow = BigInt::from(n).pow(q - a);
    let cap = BigInt::one() << (64 * q as usize);
    let (mut lo, mut hi) = (BigInt::zero(), BigInt::one() << 64usize);
    // binary search the largest u with u^q * n^(q-a) <= 2^(64 q)
    while lo < hi {
        let mid: BigInt = (&lo + &hi + 1u8) >> 1usize;
        if (&mid).pow(q) * &n_pow <= cap {
            lo = mid;
        } else {
            hi = mid - 1u8;
        }
    }
    Rat::new(lo, BigInt::one() << 64usize)
}

/// Count of induced subgraphs of `g` isomorphic to `h`: labelled embeddings
/// divided by the automorphism count of `h`.
pub fn count_induced_copies(g: &Graph, h: &Graph) -> u64 {
    assert!(!h.is_null());
    let aut = count_induced_embeddings(h, h);
    count_induced_embeddings(g, h) / aut
}

fn count_induced_embeddings(g: &Graph, h: &Graph) -> u64 {
    fn rec(g: &Graph, h: &Graph, map: &mut Vec<usize>, used: &mut [bool]) -> u64 {
        let k = map.len();
        if k == h.n() {
            return 1;
        }
        let mut total = 0;
        'cand: for cand in 0..g.n() {
            if used[cand] {
                continue;
            }
            for prev in 0..k {
                if g.has_edge(map[prev], cand) != h.has_edge(prev, k) {
                    continue 'cand;
                }
            }
            map.push(cand);
            used[cand] = true;
            total += rec(g, h, map, used);
            map.pop();
            used[cand] = false;
        }
        total
    }
    if h.n() > g.n() {
        return 0;
    }
    rec(g, h, &mut Vec::new(), &mut vec![false; g.n()])
}

/// Subset-scan freeness check, independent of the embedding backtracker:
/// no `|h|`-subset of `g` induces a copy of `h`.
pub fn verify_induced_free(g: &Graph, h: &Graph) -> bool {
    let k = h.n();
    if k == 0 || k > g.n() {
        return true;
    }
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let sub = g.subgraph(&pick);
        if sub.edge_count() == h.edge_count() && sub.contains(h).is_some() {
            return false;
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if pick[i] != i + g.n() - k {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Samples `gnp(n, n^(d-1))`, deletes the lowest-index vertex of each
/// discovered copy of `j` or `j_prime` until both are extinct, re-verifies
/// freeness by an independent scan, and hunts a pure pair in what is left.
pub fn counterexample_experiment(cfg: &CounterexampleConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let p = cfg.edge_probability();
    let threshold = cfg.threshold();
    let trials = run_trials(cfg.trials, |i| {
        let seed = trial_seed(cfg.seed, i);
        let mut rec = TrialRecord::new(i, seed);
        let g = Graph::gnp(cfg.n, &p, seed);
        rec.set("edges", json!(g.edge_count()));
        rec.set("copies_j", json!(count_induced_copies(&g, &cfg.j)));
        rec.set("copies_j_prime", json!(count_induced_copies(&g, &cfg.j_prime)));

        let mut g2 = g;
        let mut deletions = 0u64;
        loop {
            let hit = g2.contains(&cfg.j).or_else(|| g2.contains(&cfg.j_prime));
            match hit {
                Some(e) => {
                    let v = *e.map.iter().min().expect("copy has vertices");
                    g2 = g2.delete_vertex(v);
                    deletions += 1;
                }
                None => break,
            }
        }
        rec.set("deletions", json!(deletions));
        rec.set("within_half", json!(2 * deletions as usize <= cfg.n));
        let free = verify_induced_free(&g2, &cfg.j) && verify_induced_free(&g2, &cfg.j_prime);
        rec.set("free_verified", json!(free));

        match g2.find_pure_pair(threshold, cfg.budget) {
            Ok(crate::graph::Search::Absent) => rec.set("pure_pair", json!("absent")),
            Ok(crate::graph::Search::Found(pp)) => {
                rec.set("pure_pair", json!("found"));
                rec.set("pure_pair_kind", json!(format!("{:?}", pp.kind).to_lowercase()));
            }
            Ok(crate::graph::Search::Inconclusive) => rec.set("pure_pair", json!("inconclusive")),
            Err(_) => rec.set("pure_pair", json!("error")),
        }
        rec
    });

    let total = trials.len().max(1) as u64;
    let free_all = trials.iter().all(|t| t.flag("free_verified"));
    let within_all = trials.iter().all(|t| t.flag("within_half"));
    let absent = trials
        .iter()
        .filter(|t| t.fields.get("pure_pair") == Some(&json!("absent")))
        .count() as u64;
    let properties = vec![
        property(
            "post-deletion-free",
            free_all,
            "exact",
            format!("independent subset scan for j and j_prime in {total} trials"),
        ),
        property(
            "deletions-within-half",
            within_all,
            "exact",
            format!("lowest-index deletion count stayed at or below n/2 = {}", cfg.n / 2),
        ),
        property(
            "pure-pair-absent",
            10 * absent >= 9 * total,
            &format!("exact search, both sides >= {threshold}, budget {}", cfg.budget),
            format!("absent in {absent} of {total} trials; asymptotic claim not certified"),
        ),
    ];
    let params = json!({
        "h": cfg.h.to_edge_list(),
        "j": cfg.j.to_edge_list(),
        "j_prime": cfg.j_prime.to_edge_list(),
        "c": cfg.c.to_string(),
        "d": cfg.d.to_string(),
        "n": cfg.n,
        "trials": cfg.trials,
        "p": p.to_string(),
        "p_approx": exact::approx(&p),
        "pair_threshold": threshold,
        "budget": cfg.budget,
    });
    Ok(Report::assemble("counterexample", cfg.seed, params, properties, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn subgraph_test_ignores_extra_host_edges() {
        let p3 = Graph::path(3);
        let c5 = Graph::cycle(5);
        assert!(is_subgraph(&p3, &c5));
        assert!(is_subgraph(&c5, &c5));
        assert!(!is_subgraph(&Graph::complete(3), &c5));
        assert!(is_subgraph(&Graph::complete(3), &Graph::complete(4)));
    }

    #[test]
    fn dyadic_probability_brackets_the_power() {
        // p = 30^(-1/2): p^2 <= 1/30 < (p + ulp)^2
        let p = dyadic_power_leq(30, &rat(1, 2));
        assert!(&p * &p <= rat(1, 30));
        let ulp = Rat::new(BigInt::one(), BigInt::one() << 64usize);
        let up = &p + &ulp;
        assert!(&up * &up > rat(1, 30));
        // the worked value: 30^(-0.5) is about 0.1826
        let approx = exact::approx(&p);
        assert!((approx - 0.18257).abs() < 1e-4, "{approx}");
    }

    #[test]
    fn copy_counting_agrees_with_hand_counts() {
        let c5 = Graph::cycle(5);
        assert_eq!(count_induced_copies(&c5, &c5), 1);
        assert_eq!(count_induced_copies(&Graph::complete(5), &c5), 0);
        // K4 holds 4 triangles and every 3-subset of K5 is one
        let k3 = Graph::complete(3);
        assert_eq!(count_induced_copies(&Graph::complete(4), &k3), 4);
        assert_eq!(count_induced_copies(&Graph::complete(5), &k3), 10);
        // P3 induced in C5: two ends one apart around the cycle
        assert_eq!(count_induced_copies(&c5, &Graph::path(3)), 5);
        assert!(verify_induced_free(&Graph::complete(5), &c5));
        assert!(!verify_induced_free(&c5, &Graph::path(3)));
    }

    #[test]
    fn config_validation_guards_the_slack_interval() {
        let mut cfg = CounterexampleConfig::c5(rat(1, 10), 20, 3, 9);
        cfg.validate().unwrap();
        assert_eq!(cfg.slack().unwrap(), rat(4, 5));
        assert_eq!(cfg.d, rat(3, 20));
        // d outside (c, c') is rejected
        cfg.d = rat(1, 4);
        assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
        // a forest witness has no density margin at all
        let mut sparse = CounterexampleConfig::c5(rat(1, 10), 20, 3, 9);
        sparse.j = Graph::path(3);
        assert!(matches!(sparse.validate(), Err(ExperimentError::Config(_))));
        // congestion of C5 is 1/5, so any c below it is admissible
        let wide = CounterexampleConfig::c5(rat(1, 6), 20, 3, 9);
        wide.validate().unwrap();
    }

    #[test]
    fn empty_experiment_is_schema_valid() {
        let cfg = CounterexampleConfig::c5(rat(1, 10), 20, 0, 1);
        let report = counterexample_experiment(&cfg).unwrap();
        assert!(report.trials.is_empty());
        let text = report.to_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert!(report.to_csv().starts_with("trial,seed"));
    }

    #[test]
    fn tiny_experiment_deletes_to_freeness() {
        let cfg = CounterexampleConfig::c5(rat(1, 10), 14, 4, 5);
        let report = counterexample_experiment(&cfg).unwrap();
        assert_eq!(report.trials.len(), 4);
        assert!(report.properties.iter().any(|p| p.name == "post-deletion-free" && p.passed));
        // reproducibility: byte-identical on a second run
        let again = counterexample_experiment(&cfg).unwrap();
        assert_eq!(report.to_json(), again.to_json());
    }

    #[test]
    fn unknown_suite_is_an_error() {
        let err = campaign("no-such-suite", &CampaignParams::default(), 1).unwrap_err();
        assert_eq!(err, ExperimentError::UnknownSuite("no-such-suite".into()));
    }
}
