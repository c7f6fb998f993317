//! Property definitions shared by `properties.rs` (one test each) and the
//! acceptance target (which runs them all and reports one line).

#![allow(dead_code)]

use careloop::audit::{check_integrity, config_hash, read_records, replay_verify, to_ndjson, AuditRecord};
use careloop::control::{closed_loop_update, llm_mapping_decision, llm_mapping_update, ControlConfig};
use careloop::diagnosis::{
    aggregate, diagnose_population, parse_response, BackendKind, Diagnosis, DiagnosisBackend, MacroStats, RiskLabel,
};
use careloop::experiment::{run_condition, Condition, Experiment};
use careloop::sim::{DynamicsConfig, World};
use careloop::stats::{cohens_d, mean, t_test_two_sample, TTestKind};
use careloop::PolicyParams;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub mod backend;

pub const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

pub type Property = fn() -> Result<(), String>;

pub const ALL: &[(&str, Property)] = &[
    ("sim: determinism", sim_determinism),
    ("sim: state boundedness", sim_boundedness),
    ("sim: network symmetry and irreflexivity", network_symmetry),
    ("sim: event effect proportional to theta_s", event_proportionality),
    ("sim: eligibility monotone in theta_t", eligibility_monotonicity),
    ("sim: isolated loneliness never crosses baseline", isolation_convergence),
    (
        "diagnosis: aggregation permutation invariance",
        aggregation_permutation_invariance,
    ),
    ("diagnosis: r monotone in High count", r_monotone),
    (
        "diagnosis: parse after serialize is identity",
        parse_serialize_roundtrip,
    ),
    ("diagnosis: heuristic cycle is pure", heuristic_cycle_pure),
    ("control: per-parameter cap", control_cap),
    ("control: quiescence", control_quiescence),
    ("control: purity", control_purity),
    ("control: attribution completeness", control_attribution),
    ("audit: serialization round trip", audit_roundtrip),
    ("audit: closed-loop runs replay", audit_replay_runs),
    ("stats: cohens_d antisymmetric", d_antisymmetric),
    ("stats: p invariant under swap and shift", p_swap_shift_invariant),
    ("stats: scale equivariance", scale_equivariance),
    ("stats: textbook oracle at 1e-10", stats_oracle),
    ("stats: t CDF matches statrs at 1e-10", t_cdf_oracle),
];

// ---------------------------------------------------------------- sim

fn dynamics() -> impl Strategy<Value = DynamicsConfig> {
    (
        (
            0.0..0.3f64,
            0.0..0.05f64,
            0.0..1.0f64,
            1u32..8,
            0.0..0.2f64,
            0.0..0.2f64,
        ),
        (
            0.0..0.1f64,
            0.0..0.01f64,
            0.0..0.01f64,
            0.0..0.1f64,
            0.0..0.1f64,
            0.0..0.2f64,
        ),
        (
            0.0..1.0f64,
            0.0..1.0f64,
            0.5..10.0f64,
            0u32..30,
            prop::option::of(0.0..1.0f64),
        ),
    )
        .prop_map(
            |((al, bl, ip, ep, ee, vl), (vs, fd, fs, sc, er, ec), (gate, tie, sat, cand, init))| DynamicsConfig {
                alpha_l: al,
                beta_l: bl,
                interaction_prob: ip,
                event_period: ep,
                event_effect: ee,
                visit_loneliness_effect: vl,
                visit_stress_effect: vs,
                frailty_drift: fd,
                frailty_stress_coeff: fs,
                stress_coupling: sc,
                energy_recovery: er,
                event_energy_cost: ec,
                event_energy_gate: gate,
                tie_formation_rate: tie,
                degree_saturation: sat,
                candidate_pairs_per_week: cand,
                init_edge_prob: init,
            },
        )
}

fn params() -> impl Strategy<Value = PolicyParams> {
    (0.8..=1.5f64, 0.4..=0.6f64, 0.15..=0.5f64).prop_map(|(s, t, p)| PolicyParams::new(s, t, p))
}

fn schedule() -> impl Strategy<Value = Vec<Option<PolicyParams>>> {
    vec(prop::option::of(params()), 1..40)
}

fn simulate(seed: u64, n: usize, d: DynamicsConfig, plan: &[Option<PolicyParams>]) -> Vec<World> {
    let mut w = World::new(seed, n, d).unwrap();
    let mut snapshots = vec![w.clone()];
    for p in plan {
        w.step_day(p.as_ref());
        if w.day() % 7 == 0 {
            w.update_network();
        }
        snapshots.push(w.clone());
    }
    snapshots
}

pub fn sim_determinism() -> Result<(), String> {
    run(
        (any::<u64>(), 2usize..25, dynamics(), schedule()),
        |(seed, n, d, plan)| {
            prop_assert_eq!(simulate(seed, n, d, &plan), simulate(seed, n, d, &plan));
            Ok(())
        },
    )
}

pub fn sim_boundedness() -> Result<(), String> {
    run(
        (any::<u64>(), 2usize..25, dynamics(), schedule()),
        |(seed, n, d, plan)| {
            for w in simulate(seed, n, d, &plan) {
                prop_assert!(w.agents().iter().all(|a| a.is_bounded()), "day {}", w.day());
            }
            Ok(())
        },
    )
}

pub fn network_symmetry() -> Result<(), String> {
    run(
        (any::<u64>(), 2usize..30, 0.0..1.0f64, 0.0..1.0f64, 1u32..60),
        |(seed, n, init, rate, cand)| {
            let d = DynamicsConfig {
                init_edge_prob: Some(init),
                tie_formation_rate: rate,
                candidate_pairs_per_week: cand,
                ..Default::default()
            };
            let mut w = World::new(seed, n, d).unwrap();
            for _ in 0..6 {
                w.update_network();
                let net = w.network();
                prop_assert!(net.is_consistent());
                for i in 0..n {
                    prop_assert!(!net.has_edge(i, i));
                    for j in net.neighbors(i) {
                        prop_assert!(net.has_edge(j, i));
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn event_proportionality() -> Result<(), String> {
    run(
        (0.3..1.0f64, 0.8..=1.5f64, 0.8..=1.5f64, 0.001..0.1f64),
        |(l0, s1, s2, effect)| {
            let d = DynamicsConfig {
                event_effect: effect,
                init_edge_prob: Some(0.0),
                ..Default::default()
            };
            let reduce = |theta_s: f64| {
                let mut w = World::new(1, 2, d).unwrap();
                w.agents_mut()[0].loneliness = l0;
                w.agents_mut()[0].energy = 1.0;
                w.apply_social_event(theta_s);
                l0 - w.agents()[0].loneliness
            };
            let (r1, r2) = (reduce(s1), reduce(s2));
            prop_assert!((r1 * s2 - r2 * s1).abs() < 1e-12, "{r1} vs {r2}");
            prop_assert!((r1 - effect * s1).abs() < 1e-12);
            Ok(())
        },
    )
}

pub fn eligibility_monotonicity() -> Result<(), String> {
    run(
        (any::<u64>(), 2usize..40, 0.0..1.0f64, 0.0..1.0f64),
        |(seed, n, a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let w = World::new(seed, n, DynamicsConfig::default()).unwrap();
            let touched = |theta_t: f64| {
                let mut c = w.clone();
                c.apply_home_visits(theta_t, 1.0);
                (0..n).filter(|&i| c.agents()[i] != w.agents()[i]).collect::<Vec<_>>()
            };
            let (wide, narrow) = (touched(lo), touched(hi));
            prop_assert!(
                narrow.iter().all(|i| wide.contains(i)),
                "{narrow:?} not within {wide:?}"
            );
            Ok(())
        },
    )
}

pub fn isolation_convergence() -> Result<(), String> {
    run(
        (any::<u64>(), 2usize..20, 0.0..0.5f64, 1usize..120),
        |(seed, n, alpha, days)| {
            let d = DynamicsConfig {
                alpha_l: alpha,
                init_edge_prob: Some(0.0),
                candidate_pairs_per_week: 0,
                stress_coupling: 0.0,
                frailty_stress_coeff: 0.0,
                ..Default::default()
            };
            let mut w = World::new(seed, n, d).unwrap();
            let sign: Vec<f64> = w
                .agents()
                .iter()
                .map(|a| (a.loneliness - a.baseline_loneliness).signum())
                .collect();
            let mut gap: Vec<f64> = w
                .agents()
                .iter()
                .map(|a| (a.loneliness - a.baseline_loneliness).abs())
                .collect();
            for _ in 0..days {
                w.step_day(None);
                for (i, a) in w.agents().iter().enumerate() {
                    let diff = a.loneliness - a.baseline_loneliness;
                    prop_assert!(diff == 0.0 || diff.signum() == sign[i]);
                    prop_assert!(diff.abs() <= gap[i]);
                    gap[i] = diff.abs();
                }
            }
            Ok(())
        },
    )
}

// ---------------------------------------------------------- diagnosis

fn label() -> impl Strategy<Value = RiskLabel> {
    prop_oneof![Just(RiskLabel::Low), Just(RiskLabel::Medium), Just(RiskLabel::High)]
}

fn diagnosis() -> impl Strategy<Value = Diagnosis> {
    (
        0usize..1000,
        0.0..=1.0f64,
        label(),
        "[a-zA-Z][a-zA-Z ,.'-]{0,30}[a-z]",
        0.0..=1.0f64,
        0.0..=1.0f64,
    )
        .prop_map(|(id, risk, frailty, driver, ps, pv)| Diagnosis {
            agent_id: id,
            risk_loneliness: risk,
            risk_label: RiskLabel::from_score(risk),
            risk_frailty_label: frailty,
            primary_driver: driver,
            priority_social: ps,
            priority_visit: pv,
        })
}

pub fn aggregation_permutation_invariance() -> Result<(), String> {
    let input = vec(diagnosis(), 0..40).prop_flat_map(|ds| {
        let n = ds.len();
        (Just(ds), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 0usize..10)
    });
    run(input, |(ds, order, extra)| {
        let pop = ds.len() + extra + 1;
        let shuffled: Vec<Diagnosis> = order.iter().map(|&i| ds[i].clone()).collect();
        prop_assert_eq!(aggregate(&ds, pop, 7).unwrap(), aggregate(&shuffled, pop, 7).unwrap());
        Ok(())
    })
}

pub fn r_monotone() -> Result<(), String> {
    run((vec(diagnosis(), 1..40), 0usize..40), |(mut ds, idx)| {
        let pop = 50;
        let idx = idx % ds.len();
        let before = aggregate(&ds, pop, 0).unwrap().r;
        ds[idx].risk_loneliness = 0.95;
        ds[idx].risk_label = RiskLabel::High;
        let after = aggregate(&ds, pop, 0).unwrap().r;
        prop_assert!(after >= before);
        Ok(())
    })
}

pub fn parse_serialize_roundtrip() -> Result<(), String> {
    run(diagnosis(), |d| {
        let text = serde_json::to_string(&d).unwrap();
        prop_assert_eq!(parse_response(&text).unwrap(), d);
        Ok(())
    })
}

pub fn heuristic_cycle_pure() -> Result<(), String> {
    run((any::<u64>(), 2usize..40, 0u32..30), |(seed, n, days)| {
        let mut w = World::new(seed, n, DynamicsConfig::default()).unwrap();
        for _ in 0..days {
            w.step_day(Some(&PolicyParams::fixed()));
        }
        let backend = DiagnosisBackend::heuristic();
        let a = diagnose_population(&w, &backend).unwrap();
        let b = diagnose_population(&w, &backend).unwrap();
        prop_assert_eq!(a.stats, b.stats);
        Ok(())
    })
}

// ------------------------------------------------------------ control

fn stats() -> impl Strategy<Value = MacroStats> {
    let unit = prop_oneof![
        3 => 0.0..=1.0f64,
        1 => prop::sample::select(vec![0.0, 0.2, 0.4, 0.41, 0.75, 0.76, 1.0]),
    ];
    (unit.clone(), unit.clone(), unit).prop_map(|(r, ps, pv)| MacroStats::new(r, ps, pv))
}

fn control_config() -> impl Strategy<Value = ControlConfig> {
    (
        1u32..=100,
        0.05..0.95f64,
        0.05..0.95f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..0.5f64,
    )
        .prop_map(|(cap_milli, risk, prio, t_frac, p_frac, gain)| {
            let cap = cap_milli as f64 / 1000.0;
            ControlConfig {
                risk_threshold: risk,
                priority_threshold: prio,
                update_cap: cap,
                theta_t_step: (cap * t_frac * 1000.0).round() / 1000.0,
                theta_p_step: (cap * p_frac * 1000.0).round() / 1000.0,
                social_gain: gain,
                ..Default::default()
            }
        })
}

pub fn control_cap() -> Result<(), String> {
    run((stats(), params(), control_config()), |(s, p, c)| {
        let d = closed_loop_update(&s, &p, &c);
        prop_assert!(
            d.max_abs_delta() <= c.update_cap,
            "{} > {}",
            d.max_abs_delta(),
            c.update_cap
        );
        prop_assert!(d.new_params.is_within(&c.bounds));
        Ok(())
    })
}

pub fn control_quiescence() -> Result<(), String> {
    run((stats(), params(), control_config()), |(mut s, p, c)| {
        s.r = s.r.min(c.risk_threshold);
        s.p_v = s.p_v.min(c.priority_threshold);
        let d = closed_loop_update(&s, &p, &c);
        prop_assert!(d.is_zero());
        prop_assert!(d.fired_rules.is_empty());
        prop_assert_eq!(d.new_params, p);
        Ok(())
    })
}

pub fn control_purity() -> Result<(), String> {
    run((stats(), params(), control_config()), |(s, p, c)| {
        prop_assert_eq!(closed_loop_update(&s, &p, &c), closed_loop_update(&s, &p, &c));
        prop_assert_eq!(llm_mapping_update(&s), llm_mapping_update(&s));
        prop_assert_eq!(llm_mapping_decision(&s, &p), llm_mapping_decision(&s, &p));
        Ok(())
    })
}

pub fn control_attribution() -> Result<(), String> {
    run((stats(), params(), control_config()), |(s, p, c)| {
        for d in [closed_loop_update(&s, &p, &c), llm_mapping_decision(&s, &p)] {
            prop_assert!(d.is_attributed());
            prop_assert!(d.is_zero() || !d.fired_rules.is_empty());
            for f in &d.fired_rules {
                if f.rule != careloop::control::Rule::LlmMapping {
                    prop_assert!(f.conditions.iter().all(|c| c.holds), "{f:?}");
                }
            }
        }
        Ok(())
    })
}

// -------------------------------------------------------------- audit

fn chain() -> impl Strategy<Value = Vec<AuditRecord>> {
    (vec(stats(), 0..30), params(), any::<bool>()).prop_map(|(stream, start, mapping)| {
        let control = ControlConfig::default();
        let hash = config_hash(&control, &DynamicsConfig::default());
        let mut params = start;
        stream
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.day = 7 * (i as u32 + 1);
                let (condition, decision) = if mapping {
                    (Condition::LlmMapping, llm_mapping_decision(&s, &params))
                } else {
                    (Condition::ClosedLoop, closed_loop_update(&s, &params, &control))
                };
                let rec = AuditRecord {
                    day: s.day,
                    condition,
                    macro_stats: s,
                    prior_params: params,
                    decision,
                    backend_kind: BackendKind::Heuristic,
                    prompt_hash: None,
                    raw_responses: None,
                    config_hash: hash.clone(),
                };
                params = rec.decision.new_params;
                rec
            })
            .collect()
    })
}

pub fn audit_roundtrip() -> Result<(), String> {
    run(chain(), |records| {
        prop_assert!(check_integrity(&records).is_ok());
        let text = to_ndjson(&records);
        let back = read_records(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(to_ndjson(&back), text);
        prop_assert!(replay_verify(&back, &ControlConfig::default()).is_verified());
        Ok(())
    })
}

pub fn audit_replay_runs() -> Result<(), String> {
    run((any::<u64>(), 5usize..35, 7u32..100), |(seed, n, days)| {
        let exp = Experiment {
            n_agents: n,
            days,
            ..Default::default()
        };
        let run = run_condition(Condition::ClosedLoop, seed, &exp).unwrap();
        prop_assert_eq!(run.audit.len(), (days / 7) as usize);
        prop_assert!(replay_verify(&run.audit, &exp.control).is_verified());
        Ok(())
    })
}

// -------------------------------------------------------------- stats

fn samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (vec(-10.0..10.0f64, 2..12), vec(-10.0..10.0f64, 2..12))
        .prop_filter("non-degenerate", |(a, b)| spread(a) + spread(b) > 1e-3)
}

fn spread(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

pub fn d_antisymmetric() -> Result<(), String> {
    run(samples(), |(a, b)| {
        prop_assert_eq!(cohens_d(&a, &b).unwrap(), -cohens_d(&b, &a).unwrap());
        Ok(())
    })
}

pub fn p_swap_shift_invariant() -> Result<(), String> {
    run((samples(), -5.0..5.0f64), |((a, b), shift)| {
        for kind in [TTestKind::Student, TTestKind::Welch] {
            let p = t_test_two_sample(&a, &b, kind).unwrap().p_value;
            prop_assert_eq!(p, t_test_two_sample(&b, &a, kind).unwrap().p_value);
            let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
            let ps = t_test_two_sample(&sa, &sb, kind).unwrap().p_value;
            prop_assert!((p - ps).abs() < 1e-8, "{p} vs {ps}");
        }
        Ok(())
    })
}

pub fn scale_equivariance() -> Result<(), String> {
    run((samples(), 0.01..100.0f64), |((a, b), c)| {
        let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
        let (d, ds) = (cohens_d(&a, &b).unwrap(), cohens_d(&sa, &sb).unwrap());
        prop_assert!(close(d, ds, 1e-9) || (d - ds).abs() < 1e-12, "{d} vs {ds}");
        let p = t_test_two_sample(&a, &b, TTestKind::Student).unwrap().p_value;
        let ps = t_test_two_sample(&sa, &sb, TTestKind::Student).unwrap().p_value;
        prop_assert!((p - ps).abs() < 1e-9, "{p} vs {ps}");
        Ok(())
    })
}

/// Textbook formulas written out longhand, independent of the crate.
fn textbook(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb - 1.0);
    let d = (ma - mb) / ((va + vb) / 2.0).sqrt();
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    (d, t, na + nb - 2.0)
}

pub fn stats_oracle() -> Result<(), String> {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    run(samples(), |(a, b)| {
        let (d, t, df) = textbook(&a, &b);
        let ours = t_test_two_sample(&a, &b, TTestKind::Student).unwrap();
        prop_assert!(close(cohens_d(&a, &b).unwrap(), d, 1e-10), "d");
        prop_assert!(close(ours.t, t, 1e-10), "t {} vs {t}", ours.t);
        prop_assert_eq!(ours.df, df);
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        let p = 2.0 * dist.cdf(-t.abs());
        prop_assert!(
            close(ours.p_value, p, 1e-10) || (ours.p_value - p).abs() < 1e-14,
            "p {} vs {p}",
            ours.p_value
        );
        prop_assert!(mean(&a).is_finite());
        Ok(())
    })
}

pub fn t_cdf_oracle() -> Result<(), String> {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    run((-40.0..40.0f64, 1u32..=100), |(t, df)| {
        let reference = StudentsT::new(0.0, 1.0, df as f64).unwrap().cdf(t);
        let ours = careloop::stats::student_t_cdf(t, df as f64);
        prop_assert!((ours - reference).abs() < 1e-10, "t={t} df={df}: {ours} vs {reference}");
        Ok(())
    })
}
