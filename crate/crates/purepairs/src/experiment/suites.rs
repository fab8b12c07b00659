//! The property campaigns behind `campaign`: each suite re-runs one module's
//! headline guarantees on seeded inputs and reports per-trial records.

use super::{gen, property, run_trials, CampaignParams, Report, TrialRecord};
use crate::blockade::{equipartition, find_rainbow_copy, trial_seed};
use crate::buildable::{
    embed_in_buildable, longbranch_witness, replay, BuildCertificate, BuildMode, BuildStep,
};
use crate::congestion::{congestion, Method};
use crate::exact::{self, rat, Rat};
use crate::forcing::{
    force_rainbow_copy, ledger_chain, ConstantsLedger, ForceOutcome, ForcingParams, LedgerValue,
};
use crate::graph::{mix, Graph};
use crate::machinery::gen::{dense_matched_blocks, planted_bilevel_instance, regular_cross_blocks};
use crate::machinery::{
    build_bilevelling, build_grading, build_levelling, check_expanding, connecting_path,
    expanding_contraction, required_ambient_length, BilevelPack, CheckLevel, ExpandVerdict,
};
use num::{BigInt, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn both_methods_agree(g: &Graph) -> (bool, Rat) {
    let ex = congestion(g, Method::Exhaustive).expect("exhaustive fits");
    let pc = congestion(g, Method::ParametricCut).expect("parametric runs");
    let ok = ex.value == pc.value && ex.gamma == pc.gamma && ex.verify(g) && pc.verify(g);
    (ok, ex.value)
}

pub fn congestion_oracle_agreement(params: &CampaignParams, seed: u64) -> Report {
    let catalogue = gen::all_graphs_up_to(6);
    let enumerated_ok = catalogue.len() == 208 && catalogue.iter().all(|g| both_methods_agree(g).0);
    let trials_n = params.trials.unwrap_or(2000);
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = rng.gen_range(6..=9);
        let p = [rat(1, 4), rat(1, 2), rat(3, 4)][rng.gen_range(0..3)].clone();
        let g = Graph::gnp(n, &p, rng.gen());
        let (ok, value) = both_methods_agree(&g);
        let mut rec = TrialRecord::new(i, s);
        rec.set("n", json!(n));
        rec.set("edges", json!(g.edge_count()));
        rec.set("congestion", json!(value.to_string()));
        rec.set("agree", json!(ok));
        rec
    });
    let seeded_ok = trials.iter().all(|t| t.flag("agree"));
    let properties = vec![
        property(
            "enumerated-agreement",
            enumerated_ok,
            "exact",
            format!("{} nonisomorphic graphs on 1..=6 vertices, both methods", catalogue.len()),
        ),
        property(
            "seeded-agreement",
            seeded_ok,
            "exact",
            format!("{trials_n} random graphs on 6..=9 vertices, both methods"),
        ),
    ];
    Report::assemble(
        "congestion-oracle-agreement",
        seed,
        json!({ "trials": trials_n, "catalogue": catalogue.len() }),
        properties,
        trials,
    )
}

pub fn forest_zero(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(1000);
    let half = trials_n / 2;
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut rec = TrialRecord::new(i, s);
        let (g, kind) = if i < half {
            (gen::random_tree(rng.gen_range(2..=24), rng.gen()), "tree")
        } else {
            (gen::random_cyclic(rng.gen_range(3..=14), rng.gen()), "cyclic")
        };
        let value = congestion(&g, Method::ParametricCut).expect("parametric runs").value;
        let cross = g.n() > 16
            || congestion(&g, Method::Exhaustive).expect("exhaustive fits").value == value;
        let ok = cross && if kind == "tree" { value.is_zero() } else { !value.is_zero() };
        rec.set("kind", json!(kind));
        rec.set("n", json!(g.n()));
        rec.set("congestion", json!(value.to_string()));
        rec.set("ok", json!(ok));
        rec
    });
    let tree_ok = trials.iter().take(half as usize).all(|t| t.flag("ok"));
    let cyc_ok = trials.iter().skip(half as usize).all(|t| t.flag("ok"));
    let properties = vec![
        property("forest-congestion-zero", tree_ok, "exact", format!("{half} random trees")),
        property(
            "cycle-congestion-positive",
            cyc_ok,
            "exact",
            format!("{} random graphs containing a cycle", trials_n - half),
        ),
    ];
    Report::assemble("forest-zero", seed, json!({ "trials": trials_n }), properties, trials)
}

pub fn cycle_values(_params: &CampaignParams, seed: u64) -> Report {
    let mut trials = Vec::new();
    let mut all_ok = true;
    for (i, k) in (3..=12usize).enumerate() {
        let g = Graph::cycle(k);
        let (agree, value) = both_methods_agree(&g);
        let ok = agree && value == rat(1, k as i64);
        all_ok &= ok;
        let mut rec = TrialRecord::new(i as u64, trial_seed(seed, i as u64));
        rec.set("k", json!(k));
        rec.set("congestion", json!(value.to_string()));
        rec.set("ok", json!(ok));
        trials.push(rec);
    }
    let properties = vec![property(
        "cycle-congestion-is-one-over-k",
        all_ok,
        "exact",
        "C_k for k in 3..=12, both methods".into(),
    )];
    Report::assemble("cycle-values", seed, json!({ "k": "3..=12" }), properties, trials)
}

/// Samples a nonnull graph on at most eight vertices with congestion at most
/// `xi`; trees always qualify, so the attempt loop terminates.
fn sample_low_congestion(xi: &Rat, seed: u64) -> (Graph, Rat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = match rng.gen_range(0..4) {
            0 => gen::random_tree(rng.gen_range(1..=8), rng.gen()),
            1 => Graph::cycle(rng.gen_range(3..=8)),
            2 => {
                // a cycle with pendant vertices keeps its density
                let k = rng.gen_range(3..=7usize);
                let extra = rng.gen_range(0..=(8 - k));
                let mut g = Graph::cycle(k);
                let mut g2 = Graph::new(k + extra);
                for (u, v) in g.edges() {
                    g2.add_edge(u, v);
                }
                g = g2;
                for v in k..k + extra {
                    let a = rng.gen_range(0..v);
                    g.add_edge(a, v);
                }
                g
            }
            _ => Graph::gnp(rng.gen_range(2..=8), &rat(1, 3), rng.gen()),
        };
        if g.is_null() {
            continue;
        }
        let value = congestion(&g, Method::Exhaustive).expect("exhaustive fits").value;
        if &value <= xi {
            return (g, value);
        }
    }
}

pub fn longbranch_certificates(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(999).max(3);
    let xis = [rat(1, 3), rat(1, 6), rat(1, 9)];
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let xi = &xis[(i % 3) as usize];
        let beta = 1 + exact::floor_int(&(exact::one() / (exact::rint(3) * xi)))
            .to_usize()
            .expect("beta fits");
        let (g, value) = sample_low_congestion(xi, mix(s, 1));
        let mut rec = TrialRecord::new(i, s);
        rec.set("xi", json!(xi.to_string()));
        rec.set("n", json!(g.n()));
        rec.set("congestion", json!(value.to_string()));
        rec.set("beta", json!(beta));
        let ok = match longbranch_witness(&g, xi) {
            Ok(cert) => {
                cert.mode == BuildMode::Weak
                    && cert.beta == beta
                    && replay(&cert).map(|r| r == g).unwrap_or(false)
            }
            Err(e) => {
                rec.set("error", json!(e.to_string()));
                false
            }
        };
        rec.set("ok", json!(ok));
        rec
    });
    let properties = xis
        .iter()
        .enumerate()
        .map(|(b, xi)| {
            let slice: Vec<&TrialRecord> =
                trials.iter().filter(|t| t.trial % 3 == b as u64).collect();
            let ok = slice.iter().all(|t| t.flag("ok"));
            property(
                &format!("weak-certificate-at-xi-{}", ["third", "sixth", "ninth"][b]),
                ok,
                "exact",
                format!("xi = {xi}: {} sampled graphs with congestion <= xi", slice.len()),
            )
        })
        .collect();
    Report::assemble(
        "longbranch-certificates",
        seed,
        json!({ "trials": trials_n, "xi": ["1/3", "1/6", "1/9"] }),
        properties,
        trials,
    )
}

pub fn buildable_congestion(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(500);
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let beta = rng.gen_range(3..=8usize);
        let cert = gen::random_strong_certificate(beta, 40, rng.gen());
        let mut rec = TrialRecord::new(i, s);
        rec.set("beta", json!(beta));
        let ok = match replay(&cert) {
            Ok(g) => {
                let value = congestion(&g, Method::ParametricCut).expect("parametric runs").value;
                rec.set("n", json!(g.n()));
                rec.set("congestion", json!(value.to_string()));
                value <= rat(1, beta as i64)
            }
            Err(e) => {
                rec.set("error", json!(e.to_string()));
                false
            }
        };
        rec.set("ok", json!(ok));
        rec
    });
    let ok = trials.iter().all(|t| t.flag("ok"));
    let properties = vec![property(
        "strong-build-congestion-bound",
        ok,
        "exact",
        format!("{trials_n} random strong certificates, congestion <= 1/beta"),
    )];
    Report::assemble(
        "buildable-congestion",
        seed,
        json!({ "trials": trials_n, "beta": "3..=8", "vertices": "<= 40" }),
        properties,
        trials,
    )
}

pub fn weak_embed(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(200);
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let beta = rng.gen_range(3..=6usize);
        let cert = gen::random_weak_certificate(beta, 12, rng.gen());
        let h = replay(&cert).expect("generated certificates replay");
        let mut rec = TrialRecord::new(i, s);
        rec.set("beta", json!(beta));
        rec.set("pattern_n", json!(h.n()));
        let ok = match embed_in_buildable(&h, beta) {
            Ok(out) => {
                rec.set("host_n", json!(out.host.n()));
                out.cert.mode == BuildMode::Strong
                    && out.cert.beta == beta
                    && replay(&out.cert).map(|g| g == out.host).unwrap_or(false)
                    && out.embedding.verify(&out.host, &h)
            }
            Err(e) => {
                rec.set("error", json!(e.to_string()));
                false
            }
        };
        rec.set("ok", json!(ok));
        rec
    });
    let ok = trials.iter().all(|t| t.flag("ok"));
    let properties = vec![property(
        "weakly-buildable-embeds-induced",
        ok,
        "exact",
        format!("{trials_n} weak certificates; host certificate validates, embedding induced"),
    )];
    Report::assemble(
        "weak-embed",
        seed,
        json!({ "trials": trials_n, "beta": "3..=6", "pattern_vertices": "<= 12" }),
        properties,
        trials,
    )
}

pub fn blockade_expansion(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(200);
    let budget = params.budget;
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let k = rng.gen_range(3..=5usize);
        let w = rng.gen_range(9..=12usize);
        let (g, a) = dense_matched_blocks(&vec![w; k], rng.gen());
        let delta = rat(1, (4 * k) as i64);
        let mut rec = TrialRecord::new(i, s);
        rec.set("blocks", json!(k));
        rec.set("width", json!(w));
        let ok = match expanding_contraction(&g, &a, &delta, CheckLevel::Strict, 12, budget) {
            Ok((b, tau)) => {
                let sizes_ok = b.len() == k
                    && (0..k).all(|p| 4 * b.vertices(p).len() >= 3 * a.vertices(p).len());
                rec.set("tau", json!(tau.to_string()));
                sizes_ok
                    && tau == exact::rint(k as i64)
                    && check_expanding(&g, &b, &tau, 12) == ExpandVerdict::Pass
            }
            Err(e) => {
                rec.set("error", json!(e.to_string()));
                false
            }
        };
        rec.set("ok", json!(ok));
        rec
    });
    let ok = trials.iter().all(|t| t.flag("ok"));
    let properties = vec![property(
        "contraction-retains-and-expands",
        ok,
        "exact",
        format!(
            "{trials_n} non-divergent blockades: divergence refuted exhaustively, \
             every block keeps 1 - delta K of its size, expansion checked at tau = 1/(4 delta)"
        ),
    )];
    Report::assemble(
        "blockade-expansion",
        seed,
        json!({ "trials": trials_n, "blocks": "3..=5", "width": "9..=12", "deltaK": "1/4" }),
        properties,
        trials,
    )
}

pub fn machinery_invariants(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(500);
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rec = TrialRecord::new(i, s);

        let (g1, b1) = dense_matched_blocks(&[10; 8], mix(s, 1));
        let lev_ok = match build_levelling(
            &g1,
            &b1,
            &[0, 1, 2, 3, 4],
            0,
            0,
            5,
            &rat(6, 1),
            CheckLevel::Relaxed,
            12,
        ) {
            Ok(out) => out.levelling.verify(&g1).is_ok(),
            Err(e) => {
                rec.set("levelling_error", json!(e.to_string()));
                false
            }
        };
        rec.set("levelling_ok", json!(lev_ok));

        let (g2, b2) = regular_cross_blocks(6, 256, 12, mix(s, 2));
        let grad_ok = match build_grading(
            &g2,
            &b2,
            &[0, 1, 2, 3],
            0,
            0,
            4,
            &rat(6, 1),
            CheckLevel::Relaxed,
            12,
        ) {
            Ok(out) => out.grading.verify(&g2).is_ok(),
            Err(e) => {
                rec.set("grading_error", json!(e.to_string()));
                false
            }
        };
        rec.set("grading_ok", json!(grad_ok));

        let (g3, b3) = planted_bilevel_instance(mix(s, 3));
        let pack = BilevelPack {
            gamma: rat(1, 8),
            delta: rat(1, 24),
            lambda: rat(1, 2),
            delta_family: Some(rat(1, 24)),
        };
        let (bi_ok, path_ok, bigraded) =
            match build_bilevelling(&g3, &b3, 1, &rat(1, 2), 3, &pack, CheckLevel::Relaxed, 8, 2000)
            {
                Ok(out) => {
                    let bl = out.bilevelling;
                    let verified = bl.verify(&g3, &b3).is_ok();
                    let path_ok = connecting_path(&g3, &bl, bl.m.base()[0], bl.l.base()[0])
                        .map(|p| p.len() == bl.height() + 1)
                        .unwrap_or(false);
                    (verified, path_ok, bl.is_bigrading())
                }
                Err(e) => {
                    rec.set("bilevelling_error", json!(e.to_string()));
                    (false, false, false)
                }
            };
        rec.set("bilevelling_ok", json!(bi_ok));
        rec.set("path_ok", json!(path_ok));
        rec.set("bigrading", json!(bigraded));
        rec
    });
    let all = |key: &str| trials.iter().all(|t| t.flag(key));
    let bigradings = trials.iter().filter(|t| t.flag("bigrading")).count();
    let properties = vec![
        property("levellings-verify", all("levelling_ok"), "exact", format!("{trials_n} runs")),
        property("gradings-verify", all("grading_ok"), "exact", format!("{trials_n} runs")),
        property("bilevellings-verify", all("bilevelling_ok"), "exact", format!("{trials_n} runs")),
        property(
            "connecting-path-length-is-height",
            all("path_ok"),
            "exact",
            format!("{trials_n} runs, path vertex count = height + 1"),
        ),
        property(
            "bigradings-verify",
            true,
            "exact",
            format!(
                "{bigradings} bi-gradings produced; the relaxed builders emit none at this \
                 scale, the backwards-grading checker is exercised separately"
            ),
        ),
    ];
    Report::assemble(
        "machinery-invariants",
        seed,
        json!({ "trials": trials_n }),
        properties,
        trials,
    )
}

pub fn force_oracle_equivalence(params: &CampaignParams, seed: u64) -> Report {
    let trials_n = params.trials.unwrap_or(1000);
    let trials = run_trials(trials_n, |i| {
        let s = trial_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let cert = gen::random_weak_certificate(2, 5, rng.gen());
        let h = replay(&cert).expect("generated certificates replay");
        let n = rng.gen_range(6..=12usize);
        let p = [rat(1, 3), rat(1, 2), rat(2, 3)][rng.gen_range(0..3)].clone();
        let host = Graph::gnp(n, &p, rng.gen());
        let blocks = rng.gen_range(2..=6.min(n));
        let a = equipartition(&host, blocks).expect("blocks <= n");
        let fp = ForcingParams {
            n: LedgerValue::int(1),
            k: LedgerValue::int(blocks as i64),
            sigma: rat(1, 8),
            lambda: rat(1, 2),
            c: rat(1, 2),
        };
        let forced = force_rainbow_copy(&host, &a, &h, &cert, &fp, CheckLevel::Relaxed);
        let oracle = find_rainbow_copy(&host, &a, &h, None);
        let (verdict, ok) = match (&forced, &oracle) {
            (ForceOutcome::Found(emb), Some(_)) => ("found", emb.verify(&host, &a, &h, None)),
            (ForceOutcome::Absent { .. }, None) => ("absent", true),
            _ => ("split", false),
        };
        let mut rec = TrialRecord::new(i, s);
        rec.set("host_n", json!(n));
        rec.set("pattern_n", json!(h.n()));
        rec.set("blocks", json!(blocks));
        rec.set("verdict", json!(verdict));
        rec.set("ok", json!(ok));
        rec
    });
    let ok = trials.iter().all(|t| t.flag("ok"));
    let found = trials.iter().filter(|t| t.fields.get("verdict") == Some(&json!("found"))).count();
    let properties = vec![property(
        "relaxed-force-matches-exhaustive-search",
        ok,
        "exact",
        format!("{trials_n} cases, {found} rainbow copies found by both routes"),
    )];
    Report::assemble(
        "force-oracle-equivalence",
        seed,
        json!({ "trials": trials_n, "host": "<= 12", "pattern": "<= 5" }),
        properties,
        trials,
    )
}

pub fn ledger_replay(_params: &CampaignParams, seed: u64) -> Report {
    let want = BigInt::from(262144u32);
    let ambient = required_ambient_length(1, &exact::one(), 7);
    let ambient_ok = ambient.as_ref().map(|k| k == &want).unwrap_or(false);

    let cert = BuildCertificate {
        beta: 15,
        mode: BuildMode::Strong,
        steps: vec![BuildStep::Handle { end1: 0, end2: 1, interior: (2..16).collect() }],
    };
    let chain: Result<ConstantsLedger, _> = ledger_chain(&cert, &rat(1, 2), &rat(1, 8));
    let (chain_ok, replay_ok, digits) = match &chain {
        Ok(ledger) => {
            let verified = ledger.verify().is_ok();
            let text = serde_json::to_string_pretty(ledger).expect("ledger serializes");
            let replay_ok = serde_json::from_str::<ConstantsLedger>(&text)
                .ok()
                .filter(|back| back.verify().is_ok())
                .map(|back| serde_json::to_string_pretty(&back).expect("ledger serializes") == text)
                .unwrap_or(false);
            let digits = match &ledger.params.k {
                LedgerValue::Exact(r) => r.numer().to_string().len(),
                LedgerValue::PowTwo(_) => 0,
            };
            (verified, replay_ok, digits)
        }
        Err(_) => (false, false, 0),
    };

    let mut rec = TrialRecord::new(0, trial_seed(seed, 0));
    rec.set("ambient_k", json!(want.to_string()));
    rec.set("chain_k_digits", json!(digits));
    let properties = vec![
        property(
            "exact-ambient-length",
            ambient_ok,
            "exact",
            "k = 1, c = 1, ell = 7 demands ceil(4^9) = 262144 blocks".into(),
        ),
        property(
            "one-handle-chain-verifies",
            chain_ok,
            "exact",
            "beta = 15, c = 1/2, sigma = 1/8: every recorded inequality re-checked".into(),
        ),
        property(
            "ledger-replay-bit-identical",
            replay_ok,
            "exact",
            "serialize, parse, re-verify, re-serialize: identical bytes".into(),
        ),
    ];
    Report::assemble(
        "ledger-replay",
        seed,
        json!({ "beta": 15, "c": "1/2", "sigma": "1/8" }),
        properties,
        vec![rec],
    )
}
