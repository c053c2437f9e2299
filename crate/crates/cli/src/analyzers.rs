use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use povmlab::catalog::{covariance_check, parse_observable};
use povmlab::kernels::{continuity_modulus, kernel_axiom_report, MarkovKernel};
use povmlab::operators::State;
use povmlab::povm::{
    absolute_continuity_fit, check_commutative, dimension_scaling, norm1_scan, uniform_continuity_probe,
    Povm, Provenance, POVM_TOL,
};
use povmlab::report::{Report, TRUNCATION_CAVEAT};
use povmlab::reproduce::{random_arc_union, random_line_union};
use povmlab::sampler::{
    born_probabilities, chi_square_goodness, chi_square_homogeneity, max_sigma_deviation, sample_direct,
    sample_two_stage, tv_distance, OutcomeHistogram,
};
use povmlab::sets::{
    shrinking_family, CircleSet, Domain, LineSet, MeasurableSet, NatSet, ReferenceMeasure, ShrinkingKind,
};
use povmlab::spec::split_spec;
use povmlab::{Error, Result};

use crate::config::RunConfig;

pub const ANALYZERS: &[&str] = &[
    "norm1", "uc-probe", "abs-cont", "commute", "covariance", "scaling", "sample", "kernel-axioms",
];

/// Fully resolved inputs shared by every analyzer of one invocation.
pub struct Plan {
    pub spec: String,
    pub povm: Povm,
    pub config: RunConfig,
    pub seed: u64,
}

fn parse_sets(specs: &[String]) -> Result<Vec<MeasurableSet>> {
    specs.iter().map(|s| s.parse()).collect()
}

fn shrinking_kind(plan: &Plan) -> Result<ShrinkingKind> {
    let kind: ShrinkingKind = match plan.config.families.first() {
        Some(s) => s.parse()?,
        None => match plan.povm.domain() {
            Domain::Circle => ShrinkingKind::ShrinkingArc { start: 0.0, length: PI },
            Domain::Line => ShrinkingKind::EscapingHalfline { first: -1.0, step: 1.0 },
            Domain::Naturals => ShrinkingKind::NatTail { offset: 0 },
        },
    };
    if kind.domain() != plan.povm.domain() {
        return Err(Error::DomainMismatch { left: plan.povm.domain(), right: kind.domain() });
    }
    Ok(kind)
}

/// Explicit sets, or `count` seeded random sets of the observable's domain.
fn sets_or_random(plan: &Plan, count: usize, salt: u64) -> Result<Vec<MeasurableSet>> {
    if !plan.config.sets.is_empty() {
        let sets = parse_sets(&plan.config.sets)?;
        if let Some(s) = sets.iter().find(|s| s.domain() != plan.povm.domain()) {
            return Err(Error::DomainMismatch { left: plan.povm.domain(), right: s.domain() });
        }
        return Ok(sets);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ salt);
    let (lo, hi) = line_window(&plan.povm);
    Ok((0..count)
        .map(|_| match plan.povm.domain() {
            Domain::Circle => random_arc_union(&mut rng).into(),
            Domain::Line => random_line_union(&mut rng, lo, hi).into(),
            Domain::Naturals => {
                use rand::RngExt;
                let d = plan.povm.dim() as u64;
                let k = rng.random_range(1..=4);
                NatSet::finite((0..k).map(|_| rng.random_range(0..2 * d))).into()
            }
        })
        .collect())
}

/// Window for random line sets: the spectral grid padded by 0.5.
fn line_window(povm: &Povm) -> (f64, f64) {
    match povm.provenance() {
        Provenance::Smeared { spectral, .. } => {
            let p = spectral.points();
            let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo - 0.5, hi + 0.5)
        }
        _ => (-3.0, 3.0),
    }
}

fn base_report(plan: &Plan, analyzer: &str) -> Result<Report> {
    let mut r = Report::new(analyzer, Some(plan.spec.clone()));
    r.seed = Some(plan.seed);
    if matches!(plan.povm.domain(), Domain::Naturals | Domain::Circle) {
        r.caveats.push(TRUNCATION_CAVEAT.to_string());
    }
    let normalization = plan.povm.normalization_error()?;
    r.passed = normalization <= POVM_TOL;
    r.details = json!({ "normalization_error": normalization });
    Ok(r.tolerance("normalization", POVM_TOL))
}

fn merge_details(r: &mut Report, extra: serde_json::Value) {
    if let (Some(obj), serde_json::Value::Object(more)) = (r.details.as_object_mut(), extra) {
        obj.extend(more);
    }
}

fn default_singletons(domain: Domain) -> Result<Vec<MeasurableSet>> {
    let at: &[f64] = match domain {
        Domain::Line => &[-1.0, 0.0, 1.0],
        Domain::Circle => &[0.0, 1.0, PI],
        Domain::Naturals => &[0.0, 1.0, 2.0],
    };
    at.iter().map(|&x| MeasurableSet::point(domain, x)).collect()
}

fn norm1(plan: &Plan) -> Result<Report> {
    let family = if !plan.config.sets.is_empty() {
        parse_sets(&plan.config.sets)?
    } else if plan.povm.domain() == Domain::Naturals {
        (0..plan.povm.dim().min(21) as u64).map(|n| NatSet::singleton(n).into()).collect()
    } else {
        shrinking_family(shrinking_kind(plan)?, plan.config.count.unwrap_or(20))?
    };
    let singletons = default_singletons(plan.povm.domain())?;
    let scan = norm1_scan(&plan.povm, &family, &singletons)?;
    let mut r = base_report(plan, "norm1")?.tolerance("norm1", povmlab::povm::NORM1_TOL);
    r.inputs = json!({ "family": scan.sets, "singletons": scan.singletons });
    r.sequence = scan.norms.clone();
    r.verdict = if scan.norm1_on_family { "norm-1-on-family" } else { "norm-1-fails" }.into();
    merge_details(&mut r, serde_json::to_value(&scan).expect("serializes"));
    Ok(r)
}

fn uc_probe(plan: &Plan) -> Result<Report> {
    let kind = shrinking_kind(plan)?;
    let count = plan.config.count.unwrap_or(20);
    let probe = uniform_continuity_probe(&plan.povm, &shrinking_family(kind, count)?)?;
    let mut r = base_report(plan, "uc-probe")?
        .tolerance("decay_factor", povmlab::povm::DECAY_FACTOR)
        .tolerance("persist_level", povmlab::povm::OBSTRUCTION_LEVEL);
    r.inputs = json!({ "family": kind, "count": count });
    r.sequence = probe.norms.clone();
    r.verdict = serde_json::to_value(probe.verdict).expect("serializes").as_str().unwrap_or_default().into();
    merge_details(&mut r, json!({ "decay_rate": probe.decay_rate, "sets": probe.family }));
    Ok(r)
}

fn abs_cont(plan: &Plan) -> Result<Report> {
    let nu: ReferenceMeasure = match &plan.config.reference {
        Some(s) => s.parse()?,
        None => match plan.povm.domain() {
            Domain::Line => ReferenceMeasure::LebesgueLine,
            Domain::Circle => ReferenceMeasure::LebesgueCircle,
            Domain::Naturals => ReferenceMeasure::Counting,
        },
    };
    if nu.domain() != plan.povm.domain() {
        return Err(Error::DomainMismatch { left: plan.povm.domain(), right: nu.domain() });
    }
    let family = sets_or_random(plan, plan.config.count.unwrap_or(200), 0xab)?;
    let fit = absolute_continuity_fit(&plan.povm, &nu, &family)?;
    let mut r = base_report(plan, "abs-cont")?.tolerance("null_set_norm", povmlab::povm::NONZERO_TOL);
    r.inputs = json!({ "reference": nu, "sets": family.iter().map(ToString::to_string).collect::<Vec<_>>() });
    r.sequence = fit.ratios.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    r.verdict = if fit.is_absolutely_continuous() { "absolutely-continuous" } else { "not-absolutely-continuous" }
        .into();
    merge_details(&mut r, serde_json::to_value(&fit).expect("serializes"));
    Ok(r)
}

fn commute(plan: &Plan) -> Result<Report> {
    let family = sets_or_random(plan, plan.config.count.unwrap_or(20), 0xc0)?;
    let c = check_commutative(&plan.povm, &family, 400)?;
    let tol = 1e-10;
    let mut r = base_report(plan, "commute")?.tolerance("commutator", tol);
    r.inputs = json!({ "sets": family.iter().map(ToString::to_string).collect::<Vec<_>>() });
    r.sequence = vec![c.max_commutator_norm];
    r.verdict = if c.max_commutator_norm <= tol { "commutative" } else { "noncommutative" }.into();
    merge_details(&mut r, serde_json::to_value(&c).expect("serializes"));
    Ok(r)
}

fn covariance(plan: &Plan) -> Result<Report> {
    if !matches!(plan.povm.provenance(), Provenance::Explicit(_)) {
        return Err(Error::InvalidParameter(format!("covariance needs a phase observable, got {}", plan.spec)));
    }
    let sets: Vec<CircleSet> = sets_or_random(plan, plan.config.count.unwrap_or(20), 0xc1)?
        .into_iter()
        .map(|s| match s {
            MeasurableSet::Circle(c) => Ok(c),
            other => Err(Error::DomainMismatch { left: Domain::Circle, right: other.domain() }),
        })
        .collect::<Result<_>>()?;
    let thetas: Vec<f64> = {
        use rand::RngExt;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0xc2);
        (0..sets.len()).map(|_| rng.random_range(0.0..TAU)).collect()
    };
    let deviations = thetas
        .iter()
        .zip(&sets)
        .map(|(&t, s)| covariance_check(&plan.povm, &[t], std::slice::from_ref(s)))
        .collect::<Result<Vec<_>>>()?;
    let worst = deviations.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10;
    let mut r = base_report(plan, "covariance")?.tolerance("covariance", tol);
    r.inputs = json!({ "thetas": thetas, "sets": sets.iter().map(ToString::to_string).collect::<Vec<_>>() });
    r.sequence = deviations;
    r.passed &= worst <= tol;
    r.verdict = if worst <= tol { "covariant" } else { "not-covariant" }.into();
    merge_details(&mut r, json!({ "max_deviation": worst }));
    Ok(r)
}

/// The observable spec with its size parameter (`dim`, or `grid` for
/// positions) replaced.
pub fn with_size(spec: &str, size: usize) -> Result<String> {
    let (name, _) = split_spec(spec)?;
    let key = if name.ends_with("-pos") { "grid" } else { "dim" };
    let rest = spec.trim().split_once(':').map(|(_, r)| r).unwrap_or("");
    let mut parts: Vec<String> = rest
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty() && p.split('=').next().map(str::trim) != Some(key))
        .map(String::from)
        .collect();
    parts.push(format!("{key}={size}"));
    Ok(format!("{name}:{}", parts.join(",")))
}

fn scaling(plan: &Plan) -> Result<Report> {
    if plan.config.dims.is_empty() {
        return Err(Error::InvalidParameter("scaling needs --dims".into()));
    }
    let probe_set: MeasurableSet = match &plan.config.probe_set {
        Some(s) => s.parse()?,
        None => match plan.povm.domain() {
            Domain::Circle => CircleSet::arc(0.0, 0.1)?.into(),
            Domain::Line => LineSet::below(-1.0)?.into(),
            Domain::Naturals => NatSet::cofinite(0..=5).into(),
        },
    };
    if probe_set.domain() != plan.povm.domain() {
        return Err(Error::DomainMismatch { left: plan.povm.domain(), right: probe_set.domain() });
    }
    let specs = plan
        .config
        .dims
        .iter()
        .map(|&d| with_size(&plan.spec, d))
        .collect::<Result<Vec<_>>>()?;
    let report = dimension_scaling(
        &plan.config.dims,
        |d| {
            let i = plan.config.dims.iter().position(|&x| x == d).expect("dims come from the list");
            parse_observable(&specs[i])
        },
        |f| f.norm(&probe_set),
    )?;
    let mut r = base_report(plan, "scaling")?.tolerance("obstruction_level", povmlab::povm::OBSTRUCTION_LEVEL);
    r.inputs = json!({ "dims": report.dims, "probe_set": probe_set.to_string(), "specs": specs });
    r.sequence = report.values.clone();
    r.verdict = serde_json::to_value(report.verdict).expect("serializes").as_str().unwrap_or_default().into();
    Ok(r)
}

fn parse_state(spec: Option<&str>, dim: usize, seed: u64) -> Result<State> {
    let spec = spec.unwrap_or("uniform");
    let (name, p) = split_spec(spec)?;
    let state = match name {
        "uniform" => State::from_real(&vec![1.0 / (dim as f64).sqrt(); dim])?,
        "basis" => {
            let k = p.uint_or("k", 0)? as usize;
            if k >= dim {
                return Err(Error::InvalidParameter(format!("basis index {k} >= dim {dim}")));
            }
            State::basis(dim, k)
        }
        "random" => {
            use rand::RngExt;
            let mut rng = ChaCha8Rng::seed_from_u64(p.uint_or("seed", seed)?);
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            State::from_real(&raw.iter().map(|x| x / norm).collect::<Vec<_>>())?
        }
        other => return Err(Error::parse(spec, format!("unknown state {other:?}"))),
    };
    p.finish(spec)?;
    Ok(state)
}

/// `b_0,b_1,...` breaks for line/circle cells, or a cutoff for naturals.
pub fn parse_cells(spec: Option<&str>, povm: &Povm) -> Result<Vec<MeasurableSet>> {
    let domain = povm.domain();
    let numbers = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::parse(s, "cells must be numbers")))
            .collect()
    };
    match domain {
        Domain::Naturals => {
            let cutoff = match spec {
                Some(s) => s.trim().parse::<u64>().map_err(|_| Error::parse(s, "cutoff must be a natural number"))?,
                None => (povm.dim() as u64).min(10),
            };
            let mut cells: Vec<MeasurableSet> = (0..cutoff).map(|n| NatSet::singleton(n).into()).collect();
            cells.push(NatSet::cofinite(0..cutoff).into());
            Ok(cells)
        }
        Domain::Line => {
            let b = match spec {
                Some(s) => numbers(s)?,
                None => (-3..=3).map(f64::from).collect(),
            };
            if b.is_empty() || b.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter("breaks must increase strictly".into()));
            }
            let mut cells: Vec<MeasurableSet> = vec![LineSet::below(b[0])?.into()];
            for w in b.windows(2) {
                cells.push(LineSet::interval(w[0], w[1])?.into());
            }
            cells.push(LineSet::above(*b.last().unwrap())?.into());
            Ok(cells)
        }
        Domain::Circle => {
            let b = match spec {
                Some(s) => numbers(s)?,
                None => (0..8).map(|k| TAU * k as f64 / 8.0).collect(),
            };
            if b.len() < 2 || b.windows(2).any(|w| w[1] <= w[0]) || b[0] < 0.0 || *b.last().unwrap() >= TAU {
                return Err(Error::InvalidParameter("circle breaks must increase strictly inside [0, 2π)".into()));
            }
            let mut cells: Vec<MeasurableSet> = b
                .windows(2)
                .map(|w| CircleSet::arc(w[0], w[1]).map(Into::into))
                .collect::<Result<_>>()?;
            cells.push(CircleSet::arc(*b.last().unwrap(), b[0])?.into());
            Ok(cells)
        }
    }
}

pub struct SampleOutcome {
    pub report: Report,
    pub histogram: OutcomeHistogram,
}

pub fn sample(plan: &Plan) -> Result<SampleOutcome> {
    let psi = parse_state(plan.config.state.as_deref(), plan.povm.dim(), plan.seed)?;
    let cells = parse_cells(plan.config.cells.as_deref(), &plan.povm)?;
    let n = plan.config.samples.unwrap_or(100_000);
    let exact = born_probabilities(&plan.povm, &psi, &cells)?;
    let direct = sample_direct(&plan.povm, &psi, &cells, n, plan.seed)?;
    let fit = chi_square_goodness(&direct.counts, &exact)?;
    let mut r = base_report(plan, "sample")?
        .tolerance("chi_square_level", povmlab::sampler::CHI_SQUARE_LEVEL)
        .tolerance("sigma_bound", povmlab::sampler::SIGMA_BOUND);
    r.inputs = json!({ "state": plan.config.state.clone().unwrap_or_else(|| "uniform".into()),
                       "cells": direct.cells, "samples": n });
    r.sequence = exact.clone();
    let mut details = json!({
        "counts": direct.counts,
        "tv_distance": tv_distance(&direct.counts, &exact),
        "max_sigma": max_sigma_deviation(&direct.counts, &exact),
        "goodness_of_fit": fit,
    });
    let mut agree = fit.passed;
    if let Provenance::Smeared { spectral, kernel } = plan.povm.provenance() {
        let staged = sample_two_stage(spectral, kernel, &psi, &cells, n, plan.seed.wrapping_add(1))?;
        let chi = chi_square_homogeneity(&direct.counts, &staged.counts)?;
        agree &= chi.passed;
        details["two_stage_counts"] = json!(staged.counts);
        details["two_stage_homogeneity"] = json!(chi);
    }
    r.passed &= agree;
    r.verdict = if agree { "consistent" } else { "inconsistent" }.into();
    merge_details(&mut r, details);
    Ok(SampleOutcome { report: r, histogram: direct })
}

fn kernel_samples(kernel: &MarkovKernel, povm: Option<&Povm>) -> Vec<f64> {
    if let Some(Provenance::Smeared { spectral, .. }) = povm.map(Povm::provenance) {
        return spectral.points().to_vec();
    }
    match kernel.domain() {
        povmlab::kernels::KernelDomain::Naturals => (0..50).map(f64::from).collect(),
        povmlab::kernels::KernelDomain::UnitInterval => (0..=20).map(|k| k as f64 / 20.0).collect(),
        _ => (0..=60).map(|k| -3.0 + 0.1 * k as f64).collect(),
    }
}

pub fn kernel_axioms(plan: &Plan) -> Result<Report> {
    let kernel: MarkovKernel = match (&plan.config.kernel, plan.povm.provenance()) {
        (Some(s), _) => s.parse()?,
        (None, Provenance::Smeared { kernel, .. }) => kernel.clone(),
        (None, _) => {
            return Err(Error::InvalidParameter(format!(
                "kernel-axioms needs --kernel or a smeared observable, got {}",
                plan.spec
            )))
        }
    };
    let samples = kernel_samples(&kernel, Some(&plan.povm));
    let cells = parse_cells(plan.config.cells.as_deref(), &plan.povm)?;
    let axioms = kernel_axiom_report(&kernel, &samples, &cells)?;
    let moduli = cells
        .iter()
        .map(|c| continuity_modulus(&kernel, c, &samples, 0.1).map(|m| m.modulus()))
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new("kernel-axioms", Some(plan.spec.clone())).tolerance("axioms", povmlab::kernels::AXIOM_TOL);
    r.seed = Some(plan.seed);
    r.inputs = json!({ "kernel": kernel.to_string(), "samples": samples.len(),
                       "cells": cells.iter().map(ToString::to_string).collect::<Vec<_>>() });
    r.sequence = moduli.iter().map(|m| m.unwrap_or(f64::NAN)).collect();
    r.passed = axioms.passed();
    r.verdict = if axioms.passed() { "axioms-hold" } else { "axioms-violated" }.into();
    r.details = serde_json::to_value(&axioms).expect("serializes");
    Ok(r)
}

pub fn run(plan: &Plan, analyzer: &str) -> Result<Vec<(String, Report)>> {
    Ok(match analyzer {
        "norm1" => vec![("norm1".into(), norm1(plan)?)],
        "uc-probe" => vec![("uc-probe".into(), uc_probe(plan)?)],
        "abs-cont" => vec![("abs-cont".into(), abs_cont(plan)?)],
        "commute" => vec![("commute".into(), commute(plan)?)],
        "covariance" => vec![("covariance".into(), covariance(plan)?)],
        "scaling" => vec![("scaling".into(), scaling(plan)?)],
        "sample" => vec![("sample".into(), sample(plan)?.report)],
        "kernel-axioms" => vec![("kernel-axioms".into(), kernel_axioms(plan)?)],
        other => return Err(Error::parse(other, format!("unknown analyzer; expected one of {}", ANALYZERS.join(", ")))),
    })
}

/// Catches configuration problems before any analyzer runs.
pub fn validate(plan: &Plan) -> Result<()> {
    for a in &plan.config.analyzers {
        if !ANALYZERS.contains(&a.as_str()) {
            return Err(Error::parse(a, format!("unknown analyzer; expected one of {}", ANALYZERS.join(", "))));
        }
    }
    let needs_family = plan.config.analyzers.iter().any(|a| a == "uc-probe" || a == "norm1");
    if needs_family || !plan.config.families.is_empty() {
        shrinking_kind(plan)?;
    }
    for s in parse_sets(&plan.config.sets)? {
        if s.domain() != plan.povm.domain() {
            return Err(Error::DomainMismatch { left: plan.povm.domain(), right: s.domain() });
        }
    }
    if plan.config.analyzers.iter().any(|a| a == "covariance")
        && !matches!(plan.povm.provenance(), Provenance::Explicit(_))
    {
        return Err(Error::InvalidParameter(format!("covariance needs a phase observable, got {}", plan.spec)));
    }
    if plan.config.analyzers.iter().any(|a| a == "scaling") && plan.config.dims.is_empty() {
        return Err(Error::InvalidParameter("scaling needs --dims".into()));
    }
    if let Some(r) = &plan.config.reference {
        let nu: ReferenceMeasure = r.parse()?;
        if nu.domain() != plan.povm.domain() {
            return Err(Error::DomainMismatch { left: plan.povm.domain(), right: nu.domain() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_rewriting() {
        assert_eq!(with_size("phase-can:dim=8", 32).unwrap(), "phase-can:dim=32");
        assert_eq!(with_size("phase-can", 32).unwrap(), "phase-can:dim=32");
        assert_eq!(with_size("gauss-pos:l=1,grid=20,min=-5", 40).unwrap(), "gauss-pos:l=1,min=-5,grid=40");
        assert_eq!(
            with_size("unsharp-number:eps=0.5,dim=200", 50).unwrap(),
            "unsharp-number:eps=0.5,dim=50"
        );
    }

    #[test]
    fn cell_parsing() {
        let f = parse_observable("gauss-pos:l=1,min=-2,max=2,grid=10").unwrap();
        assert_eq!(parse_cells(Some("-1,0,1"), &f).unwrap().len(), 4);
        assert!(parse_cells(Some("1,0"), &f).is_err());
        let n = parse_observable("unsharp-number:eps=0.5,dim=6").unwrap();
        assert_eq!(parse_cells(None, &n).unwrap().len(), 7);
        let c = parse_observable("phase-can:dim=4").unwrap();
        assert_eq!(parse_cells(None, &c).unwrap().len(), 8);
    }
}
