//! Acceptance suite: runs every registered check on every built-in example at
//! the default seed and point count, and prints one PASS/FAIL line per
//! acceptance group.
//!
//! Some groups fail by a discrepancy that has been measured and reduced to a
//! closed form. Those are listed in `KNOWN`; each entry recomputes its
//! discrepancy independently and the run fails if the measured form stops
//! holding, if an unlisted check fails, or if a listed check starts passing.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use crtractor::checks::{run_suite, Group, RunOptions};
use crtractor::examples::{builtin_examples, example, ExampleGeometry};
use crtractor::fefferman::{FeffermanPoint, FeffermanSpace};
use crtractor::report::CheckRecord;
use crtractor::webster::{torsion_identities, WebsterPoint};

type Verify = fn(&CheckRecord, &ExampleGeometry) -> Result<String, String>;

struct Known {
    example: &'static str,
    id: &'static str,
    verify: Verify,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn diag(rec: &CheckRecord, key: &str) -> Result<f64, String> {
    rec.diagnostics.get(key).copied().flatten().ok_or_else(|| format!("missing diagnostic `{key}`"))
}

/// Fefferman points for every ℓ at a few fresh sample points.
fn fefferman_points(ex: &ExampleGeometry) -> Result<Vec<FeffermanPoint>, String> {
    let base = ex.sample_points(7, 4);
    let lifted = FeffermanSpace::lift_points(&base, &[0.1, 0.5, -0.3, 1.0]);
    let mut out = Vec::new();
    for ell in &ex.ells {
        let fs = FeffermanSpace::new(ex.structure.clone(), ell.lambda.clone()).map_err(|e| e.to_string())?;
        for p in &lifted {
            out.push(fs.at(p).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn nn_sum(fp: &FeffermanPoint) -> f64 {
    fp.web.cr.nij.iter().flatten().flatten().map(|v| v.value().powi(2)).sum()
}

fn scalar_gap(_: &CheckRecord, ex: &ExampleGeometry) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for fp in fefferman_points(ex)? {
        let gap = fp.scal_structural() - fp.oracle.scal.value();
        let predicted = nn_sum(&fp) / 16.0;
        if !close(gap, predicted, 1e-10) || predicted < 1e-3 {
            return Err(format!("structural − oracle = {gap:e}, |N|²/16 = {predicted:e}"));
        }
        worst = worst.max(predicted);
    }
    Ok(format!("structural − oracle = |N|²/16 exactly (up to {worst:.2e})"))
}

fn ricci_gap(_: &CheckRecord, ex: &ExampleGeometry) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for fp in fefferman_points(ex)? {
        let n = &fp.web.cr.nij;
        let h = fp.web.cr.h();
        for a in 0..h {
            for b in 0..h {
                let mut nnn = 0.0;
                for i in 0..h {
                    for d in 0..h {
                        nnn += n[a][i][d].value() * n[d][i][b].value();
                    }
                }
                let gap = fp.ric_hh_structural(a, b) - fp.oracle_ric(a, b);
                if (gap - nnn / 8.0).abs() > 1e-11 {
                    return Err(format!("Ric gap {gap:e} vs ⅛ΣN·N {:e}", nnn / 8.0));
                }
                worst = worst.max(gap.abs());
            }
        }
    }
    Ok(format!("structural − oracle = ⅛ Σ N(a,i,d)N(d,i,b) exactly (up to {worst:.2e})"))
}

fn nijenhuis_driven(rec: &CheckRecord, ex: &ExampleGeometry) -> Result<String, String> {
    let n = fefferman_points(ex)?.iter().map(nn_sum).fold(0.0, f64::max);
    if n < 1e-3 {
        return Err("Nijenhuis tensor unexpectedly small".into());
    }
    let measured = rec.measured().unwrap_or(f64::NAN);
    Ok(format!("residual {measured:.2e} on a non-integrable structure; same check passes on integrable examples"))
}

fn flat_ricci(rec: &CheckRecord, ex: &ExampleGeometry) -> Result<String, String> {
    let half_m = ex.m() as f64 / 2.0;
    let got = rec.max_abs_residual.ok_or("no residual")?;
    let st = diag(rec, "ric_s_t")?;
    let hh = diag(rec, "ric_horizontal")?;
    if !close(got, half_m, 1e-12) || st > 1e-9 || hh > 1e-9 {
        return Err(format!("Ric(S,S) = {got:e}, expected m/2 = {half_m}; Ric(S,T*) {st:e}, Ric(X*,V*) {hh:e}"));
    }
    Ok(format!("only Ric(S,S) = m/2 = {half_m} is nonzero; Ric(S,T*) and Ric(X*,V*) vanish"))
}

fn splitting_twice_u(rec: &CheckRecord, _: &ExampleGeometry) -> Result<String, String> {
    for ell in ["zero", "closed"] {
        let r = diag(rec, &format!("{ell}.residual"))?;
        if r > 1e-8 {
            return Err(format!("{ell}: residual {r:e}"));
        }
    }
    let u = diag(rec, "generic.u")?;
    let diff = diag(rec, "generic.splitting_minus_jcr")?;
    let res = diag(rec, "generic.residual")?;
    if !close(diff, 2.0 * u, 1e-9) || !close(res, u, 1e-9) || u < 1e-3 {
        return Err(format!("S(R) − J_CR = {diff:e}, U = {u:e}"));
    }
    Ok(format!("passes for closed ℓ; generic ℓ gives S(R) − J_CR = 2U exactly (|U| = {u:.2e})"))
}

fn splitting_nonintegrable(rec: &CheckRecord, _: &ExampleGeometry) -> Result<String, String> {
    let u = diag(rec, "zero.u")?;
    let r = diag(rec, "zero.residual")?;
    if u > 1e-12 || r < 1e-4 || diag(rec, "generic.u")? < 1e-3 {
        return Err(format!("ℓ = 0: U = {u:e}, residual {r:e}"));
    }
    Ok(format!("ℓ = 0 has U = 0 but S(R) − J_CR = {r:.2e} from the Nijenhuis term"))
}

fn torsion_rows(rec: &CheckRecord, ex: &ExampleGeometry) -> Result<String, String> {
    let failing: Vec<&str> =
        rec.diagnostics.iter().filter(|(_, v)| v.map_or(true, |v| v > 1e-8)).map(|(k, _)| k.as_str()).collect();
    if failing != ["b_j_invariance_xz", "b_skew_part"] {
        return Err(format!("failing rows {failing:?}"));
    }
    for p in ex.sample_points(11, 4) {
        let w = WebsterPoint::at(&ex.structure, &p).map_err(|e| e.to_string())?;
        for row in torsion_identities(&w) {
            let factor = match row.name {
                "b_skew_part" => 0.5,
                "b_j_invariance_xz" => 2.0,
                _ => continue,
            };
            if row.magnitude < 1e-3 || !close(row.residual, factor * row.magnitude, 1e-10) {
                return Err(format!("{}: residual {:e}, side {:e}", row.name, row.residual, row.magnitude));
            }
        }
    }
    Ok("skew part of 𝓑 is ¼N (not ½N); B(X,Y,Z) = +B(JX,JZ,Y); all other rows hold".into())
}

const KNOWN: &[Known] = &[
    Known { example: "deformed_m2", id: "fefferman.scalar_curvature", verify: scalar_gap },
    Known { example: "deformed_m2", id: "fefferman.ricci_horizontal", verify: ricci_gap },
    Known { example: "deformed_m2", id: "fefferman.laplacian_theta", verify: nijenhuis_driven },
    Known { example: "deformed_m2", id: "fefferman.p_theta", verify: nijenhuis_driven },
    Known { example: "deformed_m2", id: "fefferman.p_theta_equivalence", verify: nijenhuis_driven },
    Known { example: "deformed_m2", id: "torsion.symmetries", verify: torsion_rows },
    Known { example: "deformed_m2", id: "tractor.splitting_vs_jcr", verify: splitting_nonintegrable },
    Known { example: "heisenberg_m1", id: "tractor.splitting_vs_jcr", verify: splitting_twice_u },
    Known { example: "heisenberg_m2", id: "tractor.splitting_vs_jcr", verify: splitting_twice_u },
    Known { example: "heisenberg_m2_rescaled", id: "tractor.splitting_vs_jcr", verify: splitting_twice_u },
    Known { example: "heisenberg_m1", id: "flat.fefferman_ricci", verify: flat_ricci },
    Known { example: "heisenberg_m2", id: "flat.fefferman_ricci", verify: flat_ricci },
];

fn main() -> ExitCode {
    let start = Instant::now();
    let opts = RunOptions::default();
    let mut by_group: BTreeMap<Group, Vec<CheckRecord>> = BTreeMap::new();
    for ex in builtin_examples() {
        let report = run_suite(ex.name, &opts).expect("built-in example");
        for rec in report.checks {
            by_group.entry(rec.group).or_default().push(rec);
        }
    }

    let mut problems = Vec::new();
    let mut matched = vec![false; KNOWN.len()];
    for group in Group::ACCEPTANCE {
        let records = by_group.get(&group).map(Vec::as_slice).unwrap_or_default();
        if records.is_empty() {
            problems.push(format!("{}: no checks ran", group.name()));
        }
        let failed: Vec<&CheckRecord> = records.iter().filter(|r| !r.passed).collect();
        let status = if failed.is_empty() && !records.is_empty() { "PASS" } else { "FAIL" };
        let worst = records.iter().filter(|r| r.passed).filter_map(CheckRecord::measured).fold(0.0, f64::max);
        println!(
            "{status}  {}: {} ({} checks, largest passing residual {worst:.1e})",
            group.name(),
            group.title(),
            records.len()
        );
        for rec in failed {
            let measured = rec.measured().map_or("n/a".into(), |v| format!("{v:.2e}"));
            let known = KNOWN.iter().position(|k| k.example == rec.example && k.id == rec.id);
            let note = match known {
                Some(i) => {
                    matched[i] = true;
                    let ex = example(&rec.example).expect("built-in example");
                    match (KNOWN[i].verify)(rec, &ex) {
                        Ok(s) => s,
                        Err(e) => {
                            problems.push(format!(
                                "{} on {}: recorded discrepancy no longer holds: {e}",
                                rec.id, rec.example
                            ));
                            format!("UNEXPECTED: {e}")
                        }
                    }
                }
                None => {
                    problems.push(format!("{} on {}: unexplained failure {:?}", rec.id, rec.example, rec.error));
                    "UNEXPECTED".into()
                }
            };
            println!("        {} on {}: {measured} > {:.0e}; {note}", rec.id, rec.example, rec.tolerance);
        }
    }
    for (k, hit) in KNOWN.iter().zip(&matched) {
        if !hit {
            problems.push(format!("{} on {} was expected to fail but passed", k.id, k.example));
        }
    }
    println!("acceptance run took {:.1}s", start.elapsed().as_secs_f64());
    if problems.is_empty() {
        ExitCode::SUCCESS
    } else {
        for p in &problems {
            eprintln!("error: {p}");
        }
        ExitCode::FAILURE
    }
}
