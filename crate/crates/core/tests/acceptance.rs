//! Acceptance battery: every library-level guarantee exercised end to end
//! with exact rational arithmetic and zero tolerance. One test per
//! criterion; each prints a PASS or FAIL line (visible with --nocapture).
//!
//! Bulk batteries run on `FastRational` (exact, i128-backed, overflow
//! checks on); worked instances use arbitrary precision.

use agentmix::analysis::Sampler;
use agentmix::defects::{catalogue, DefectSubject};
use agentmix::{
    certify_strongly_well_behaved, check_dual_commutation, check_duality,
    check_factorization, check_measure_linearity, check_mixture_laws,
    check_mixture_laws_with, check_patch_formulas, check_self_mixture, check_symmetry,
    check_tail_soundness, env_dual, extrema_probe, fast_rat, mix_agents, rat, universal_env,
    upsilon, value_at, Agent, CheckReport, Dist, Env, Error, FastRational, History,
    Rational, Scalar, Spaces, WeightVector, WeightedMeasure,
};
use std::time::Instant;

fn verdict(criterion: &str, ok: bool, detail: String) {
    let line = if ok { "PASS" } else { "FAIL" };
    println!("{criterion}: {line} ({detail})");
    assert!(ok, "{criterion} failed: {detail}");
}

fn report_ok<S: Scalar>(report: &CheckReport<S>) -> (bool, String) {
    match &report.counterexample {
        None => (report.passed(), "no counterexample".into()),
        Some(c) => (
            report.passed(),
            format!("{}: {} vs {}", c.location, c.left, c.right),
        ),
    }
}

/// A two-observation or one-observation desk drawn from a seeded sampler.
fn desk_spaces(sampler: &mut Sampler) -> Spaces<FastRational> {
    let observations = if sampler.pick(4) == 0 { 2 } else { 1 };
    sampler.spaces(observations)
}

fn big_spaces() -> Spaces<Rational> {
    Spaces::new(
        vec!["a".into(), "b".into()],
        vec!["x0".into()],
        vec![rat(-1, 1), rat(0, 1), rat(1, 1)],
    )
    .unwrap()
}

fn reward_point(s: &Spaces<Rational>, r: &str) -> Dist<Rational> {
    let mut mass = vec![rat(0, 1); s.num_percepts()];
    let x = s.parse_percept(&format!("(x0,{r})")).unwrap();
    mass[s.percept_index(x)] = rat(1, 1);
    Dist::new(mass).unwrap()
}

/// Opens with a zero reward, then pays +1 after action b and -1 after
/// action a; quiet from the third step on.
fn worked_env(s: &Spaces<Rational>) -> Env<Rational> {
    let entries = vec![
        (History::empty(), reward_point(s, "0")),
        (s.parse_history("(x0,0) b").unwrap(), reward_point(s, "1")),
        (s.parse_history("(x0,0) a").unwrap(), reward_point(s, "-1")),
    ];
    Env::table(s, entries, None, Some(2)).unwrap()
}

fn constants(s: &Spaces<Rational>) -> (Agent<Rational>, Agent<Rational>) {
    (
        Agent::constant(s, s.action_by_name("b").unwrap()).unwrap(),
        Agent::constant(s, s.action_by_name("a").unwrap()).unwrap(),
    )
}

#[test]
fn criterion_01_mixture_laws_on_seeded_desks() {
    let start = Instant::now();
    let mut worst = (false, String::new());
    let mut all_ok = true;
    for seed in 0..100u64 {
        let mut sampler = Sampler::new(seed);
        let s = desk_spaces(&mut sampler);
        let n = 2 + sampler.pick(2);
        let components: Vec<Agent<FastRational>> =
            (0..n).map(|_| sampler.table_agent(&s, 2)).collect();
        let weights = sampler.weights::<FastRational>(n);
        let horizon = sampler.range(1, 3);
        let env = sampler.table_env(&s, horizon);
        let report = check_mixture_laws(&s, &weights, &components, &env, 5).unwrap();
        let (ok, detail) = report_ok(&report);
        if !ok {
            all_ok = false;
            worst = (ok, format!("seed {seed}: {detail}"));
            break;
        }
    }
    let elapsed = start.elapsed();
    let in_time = elapsed.as_secs() < 60;
    let detail = if all_ok {
        format!("100 desks at depth 5 in {elapsed:.2?}")
    } else {
        worst.1
    };
    verdict(
        "criterion 01 mixture laws",
        all_ok && in_time,
        detail,
    );
}

#[test]
fn criterion_02_score_linearity_and_worked_instance() {
    let mut all_ok = true;
    let mut detail = String::from("100 random instances, worked value -1/3");
    for seed in 100..200u64 {
        let mut sampler = Sampler::new(seed);
        let s = desk_spaces(&mut sampler);
        let m = 1 + sampler.pick(2);
        let env_weights = sampler.weights::<FastRational>(m.max(2));
        let entries: Vec<(FastRational, Env<FastRational>)> = (0..m)
            .map(|i| {
                let horizon = sampler.range(1, 3);
                (
                    env_weights.weights()[i].clone(),
                    sampler.table_env(&s, horizon),
                )
            })
            .collect();
        let measure = WeightedMeasure::new(entries).unwrap();
        let n = 2 + sampler.pick(2);
        let components: Vec<Agent<FastRational>> =
            (0..n).map(|_| sampler.table_agent(&s, 2)).collect();
        let weights = sampler.weights::<FastRational>(n);
        let report =
            check_measure_linearity(&s, &measure, &weights, &components, 3).unwrap();
        let (ok, d) = report_ok(&report);
        if !ok {
            all_ok = false;
            detail = format!("seed {seed}: {d}");
            break;
        }
    }
    if all_ok {
        let s = big_spaces();
        let (db, da) = constants(&s);
        let measure = WeightedMeasure::new(vec![(rat(1, 1), worked_env(&s))]).unwrap();
        let weights = WeightVector::new(vec![rat(1, 3), rat(2, 3)]).unwrap();
        let mixture = mix_agents(weights, vec![db, da]).unwrap();
        let score = upsilon(&s, &measure, &mixture, 2).unwrap().value;
        if score != rat(-1, 3) {
            all_ok = false;
            detail = format!("worked instance scored {score}, wanted -1/3");
        }
    }
    verdict("criterion 02 score linearity", all_ok, detail);
}

#[test]
fn criterion_03_factorization_and_step_masses() {
    let mut all_ok = true;
    let mut detail = String::from("50 agent/env pairs at depth 5");
    for seed in 200..250u64 {
        let mut sampler = Sampler::new(seed);
        let s = desk_spaces(&mut sampler);
        let agent = sampler.table_agent::<FastRational>(&s, 2);
        let horizon = sampler.range(1, 3);
        let env = sampler.table_env(&s, horizon);
        let report = check_factorization(&s, &agent, &env, 5).unwrap();
        let (ok, d) = report_ok(&report);
        if !ok {
            all_ok = false;
            detail = format!("seed {seed}: {d}");
            break;
        }
    }
    verdict("criterion 03 factorization", all_ok, detail);
}

/// Twenty agents: both constants, the uniform agent, two reward-greedy
/// agents, and fifteen seeded table agents.
fn duality_battery(s: &Spaces<FastRational>, sampler: &mut Sampler) -> Vec<Agent<FastRational>> {
    let a = s.action_by_name("a").unwrap();
    let b = s.action_by_name("b").unwrap();
    let mut battery: Vec<Agent<FastRational>> = vec![
        Agent::constant(s, a).unwrap(),
        Agent::constant(s, b).unwrap(),
        Agent::uniform(),
        Agent::last_reward_greedy(s, fast_rat(1, 1), b, a).unwrap(),
        Agent::last_reward_greedy(s, fast_rat(0, 1), a, b).unwrap(),
    ];
    while battery.len() < 20 {
        battery.push(sampler.table_agent(s, 2));
    }
    battery
}

#[test]
fn criterion_04_duality_suite() {
    let mut sampler = Sampler::new(404);
    let s: Spaces<FastRational> = sampler.spaces(1);
    let battery = duality_battery(&s, &mut sampler);
    let mut all_ok = true;
    let mut detail = format!("{} agents at depth 3", battery.len());
    for (i, agent) in battery.iter().enumerate() {
        let duality = check_duality(&s, agent, 3).unwrap();
        let n = 2 + sampler.pick(2);
        let weights = sampler.weights::<FastRational>(n);
        let self_mix = check_self_mixture(&s, agent, &weights, 3).unwrap();
        for report in [&duality, &self_mix] {
            let (ok, d) = report_ok(report);
            if !ok {
                all_ok = false;
                detail = format!("agent {i}, {}: {d}", report.check_name);
                break;
            }
        }
        if !all_ok {
            break;
        }
    }
    verdict("criterion 04 duality suite", all_ok, detail);
}

/// A horizon-1 environment whose opening percept distribution puts at least
/// 7/12 of its mass on reward +1, so every agent scores strictly above zero.
fn lopsided_env(s: &Spaces<FastRational>, sampler: &mut Sampler) -> Env<FastRational> {
    let plus = s.parse_percept("(x0,1)").unwrap();
    let zero = s.parse_percept("(x0,0)").unwrap();
    let minus = s.parse_percept("(x0,-1)").unwrap();
    let plus_counts = 7 + sampler.pick(6) as i64;
    let zero_counts = sampler.pick((12 - plus_counts) as usize + 1) as i64;
    let minus_counts = 12 - plus_counts - zero_counts;
    let mut mass = vec![fast_rat(0, 1); s.num_percepts()];
    mass[s.percept_index(plus)] = fast_rat(plus_counts, 12);
    mass[s.percept_index(zero)] = fast_rat(zero_counts, 12);
    mass[s.percept_index(minus)] = fast_rat(minus_counts, 12);
    let opening = Dist::new(mass).unwrap();
    Env::table(s, vec![(History::empty(), opening)], None, Some(1)).unwrap()
}

#[test]
fn criterion_05_symmetry_verdicts_agree() {
    let mut sampler = Sampler::new(505);
    let s: Spaces<FastRational> = sampler.spaces(1);
    let battery: Vec<Agent<FastRational>> = vec![
        Agent::constant(&s, s.action_by_name("b").unwrap()).unwrap(),
        Agent::constant(&s, s.action_by_name("a").unwrap()).unwrap(),
        Agent::uniform(),
        sampler.table_agent(&s, 2),
        sampler.table_agent(&s, 2),
    ];
    let mut all_ok = true;
    let mut detail = String::from("20 paired and 20 lopsided measures, 40/40 agreement");
    for case in 0..40usize {
        let paired = case < 20;
        let measure = if paired {
            let horizon = sampler.range(1, 2);
            let env = sampler.table_env(&s, horizon);
            let dual = env_dual(&s, &env).unwrap();
            WeightedMeasure::new(vec![
                (fast_rat(1, 2), env),
                (fast_rat(1, 2), dual),
            ])
            .unwrap()
        } else {
            WeightedMeasure::new(vec![(fast_rat(1, 1), lopsided_env(&s, &mut sampler))])
                .unwrap()
        };
        let outcome = check_symmetry(&s, &measure, &battery, 3).unwrap();
        let weak_ok = outcome.weak.passed();
        let strong_ok = outcome.strong.passed();
        if outcome.diverged || weak_ok != paired || strong_ok != paired {
            all_ok = false;
            detail = format!(
                "case {case}: weak {weak_ok}, strong {strong_ok}, expected both {paired}"
            );
            break;
        }
        if !paired
            && (outcome.weak.counterexample.is_none()
                || outcome.strong.counterexample.is_none())
        {
            all_ok = false;
            detail = format!("case {case}: lopsided measure lacks explicit witnesses");
            break;
        }
    }
    verdict("criterion 05 symmetry equivalence", all_ok, detail);
}

#[test]
fn criterion_06_universal_environment() {
    let mut sampler = Sampler::new(606);
    let s: Spaces<FastRational> = sampler.spaces(1);
    let mut all_ok = true;
    let mut detail = String::from("3 certified measures, 50 agents each, depth 2");
    'measures: for m in 0..3usize {
        let k = 2 + m % 2;
        let mut entries = Vec::new();
        for i in 0..k {
            let weight = fast_rat(1, (k + i) as i64);
            entries.push((weight, sampler.opening_env(&s)));
        }
        let measure = WeightedMeasure::new(entries).unwrap();
        if !measure.certify(&s, 2).unwrap() {
            all_ok = false;
            detail = format!("measure {m} failed certification");
            break;
        }
        let universal = universal_env(&s, &measure).unwrap();
        if certify_strongly_well_behaved(&s, &universal, 2).is_err() {
            all_ok = false;
            detail = format!("universal environment of measure {m} not well behaved");
            break;
        }
        for trial in 0..50usize {
            let agent = sampler.table_agent(&s, 2);
            let score = upsilon(&s, &measure, &agent, 2).unwrap().value;
            let realized = value_at(&s, &agent, &universal, 2).unwrap().value;
            if score != realized {
                all_ok = false;
                detail =
                    format!("measure {m}, agent {trial}: {realized} vs score {score}");
                break 'measures;
            }
        }
    }
    verdict("criterion 06 universal environment", all_ok, detail);
}

#[test]
fn criterion_07_extrema_probe() {
    let s = big_spaces();
    let env = worked_env(&s);
    let dual = env_dual(&s, &env).unwrap();
    let measure =
        WeightedMeasure::new(vec![(rat(1, 2), env), (rat(1, 2), dual)]).unwrap();
    let site = s.parse_history("(x0,0)").unwrap();
    let mut all_ok = true;
    let mut detail = String::from(
        "20 stochastic agents decomposed at exact distance, deterministic rejected",
    );
    for case in 0..20usize {
        let k = 1 + case as i64 % 11;
        let entry = Dist::new(vec![rat(k, 12), rat(12 - k, 12)]).unwrap();
        let agent = Agent::table(&s, vec![(site.clone(), entry)], None).unwrap();
        let eps = rat(1 + case as i64 % 6, 12);
        let outcome = extrema_probe(&s, &measure, &agent, &site, &eps, 2).unwrap();
        let (ok, d) = report_ok(&outcome.report);
        let straddles =
            outcome.raised_score >= outcome.score && outcome.lowered_score <= outcome.score;
        if !ok || !straddles {
            all_ok = false;
            detail = format!("case {case}: {d}");
            break;
        }
    }
    if all_ok {
        let (db, _) = constants(&s);
        match extrema_probe(&s, &measure, &db, &site, &rat(1, 4), 2) {
            Err(Error::SiteDeterministic) => {}
            other => {
                all_ok = false;
                detail = format!(
                    "deterministic agent produced {other:?} instead of SiteDeterministic"
                );
            }
        }
    }
    verdict("criterion 07 extrema construction", all_ok, detail);
}

#[test]
fn criterion_08_patch_formulas() {
    let mut all_ok = true;
    let mut detail = String::from("20 sampled (agent, site, replacement) triples, depth 4");
    for seed in 800..820u64 {
        let mut sampler = Sampler::new(seed);
        let s: Spaces<FastRational> = sampler.spaces(1);
        let agent = sampler.table_agent(&s, 2);
        let depth = 1 + sampler.pick(2);
        let site = sampler.act_site(&s, depth);
        let replacement = sampler.dist::<FastRational>(s.num_actions());
        let report = check_patch_formulas(&s, &agent, &site, &replacement, 4).unwrap();
        let (ok, d) = report_ok(&report);
        if !ok {
            all_ok = false;
            detail = format!("seed {seed}: {d}");
            break;
        }
    }
    verdict("criterion 08 patch formulas", all_ok, detail);
}

#[test]
fn criterion_09_defect_catalogue_is_caught() {
    let s = big_spaces();
    let env = worked_env(&s);
    let defects = catalogue(&s).unwrap();
    let mut all_ok = defects.len() == 5;
    let mut lines = Vec::new();
    for defect in &defects {
        let caught = match &defect.subject {
            DefectSubject::Mixture {
                claimed_weights,
                components,
                mixture,
            } => {
                let report = check_mixture_laws_with(
                    &s,
                    mixture,
                    claimed_weights,
                    components,
                    &env,
                    3,
                )
                .unwrap();
                !report.passed() && report.counterexample.is_some()
            }
            DefectSubject::Dual { base, dual } => {
                let report = check_dual_commutation(&s, base, dual, 2).unwrap();
                !report.passed() && report.counterexample.is_some()
            }
            DefectSubject::Environment { env: bad } => {
                let (db, da) = constants(&s);
                let weights =
                    WeightVector::new(vec![rat(1, 2), rat(1, 2)]).unwrap();
                let laws =
                    check_mixture_laws(&s, &weights, &[db.clone(), da], bad, 3).unwrap();
                let tail = check_tail_soundness(&s, bad, &[db], 3).unwrap();
                !laws.passed()
                    && laws.counterexample.is_some()
                    && !tail.passed()
                    && tail.counterexample.is_some()
            }
        };
        lines.push(format!("{} caught: {caught}", defect.name));
        if !caught {
            all_ok = false;
        }
    }
    verdict("criterion 09 mutation sensitivity", all_ok, lines.join("; "));
}
