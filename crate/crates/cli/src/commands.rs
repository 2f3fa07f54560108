use std::fs;

use serde::Serialize;
use serde_json::json;

use ymbvp::checks::{verify as run_suite, VerifyConfig};
use ymbvp::shooting::shot_events;
use ymbvp::variational::CrossingCurve;
use ymbvp::{
    classify as classify_shot, find_astar, integrate_x, seed_bracket, transform_to_r, Error,
    OutcomeTag, Trajectory, XState,
};

use crate::config::Settings;
use crate::{CliError, Format, EXIT_VERIFY};

fn write(path: &str, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::config(format!("cannot write {path}: {e}")))?;
    eprintln!("wrote {path}");
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn trajectory_json(t: &Trajectory) -> serde_json::Value {
    let ncols = t.columns().len();
    let rows: Vec<Vec<f64>> = t
        .nodes()
        .map(|(c, s)| {
            std::iter::once(c)
                .chain(s[..ncols - 1].iter().copied())
                .collect()
        })
        .collect();
    json!({
        "columns": t.columns(),
        "rows": rows,
        "events": t.hits(),
        "termination": format!("{:?}", t.termination()),
    })
}

pub fn solve(s: &Settings, a: f64) -> Result<(), CliError> {
    if !a.is_finite() {
        return Err(CliError::config(format!("invalid slope {a}")));
    }
    let xt = integrate_x(
        XState::new(0.0, 0.0, a),
        &s.ctrl,
        &shot_events(false),
        s.x_max,
    )?;
    if let ymbvp::Termination::StepLimit = xt.termination() {
        return Err(Error::StepLimitExceeded {
            t: xt.end(),
            steps: s.ctrl.max_steps,
        }
        .into());
    }
    let rt = transform_to_r(&xt)?;
    match s.format {
        Format::Csv => {
            write(&format!("{}.x.csv", s.out), &xt.to_csv())?;
            write(&format!("{}.r.csv", s.out), &rt.to_csv())?;
        }
        Format::Json => {
            let v = json!({ "a": a, "x": trajectory_json(&xt), "r": trajectory_json(&rt) });
            write(&format!("{}.solve.json", s.out), &to_json(&v))?;
        }
    }
    println!("{} nodes, {:?}", xt.len(), xt.termination());
    Ok(())
}

#[derive(Serialize)]
struct Row {
    a: f64,
    outcome: OutcomeTag,
    location: Option<f64>,
}

fn fmt_location(l: Option<f64>) -> String {
    l.map_or_else(String::new, |v| format!("{v:.16e}"))
}

pub fn classify(s: &Settings, a: f64) -> Result<(), CliError> {
    let o = classify_shot(a, &s.ctrl, s.x_max)?;
    match s.format {
        Format::Csv => {
            println!("a,outcome,location");
            println!("{:.16e},{},{}", a, o.tag, fmt_location(o.location));
        }
        Format::Json => print!(
            "{}",
            to_json(&Row {
                a,
                outcome: o.tag,
                location: o.location,
            })
        ),
    }
    Ok(())
}

pub fn astar(s: &Settings, tol: f64, bracket: Option<(f64, f64)>) -> Result<(), CliError> {
    let bracket = match bracket {
        Some(b) => b,
        None => seed_bracket(&s.ctrl, s.x_max)?,
    };
    let path = format!("{}.astar.json", s.out);
    match find_astar(bracket, tol, &s.ctrl, s.x_max) {
        Ok(res) => {
            write(&path, &to_json(&res))?;
            println!("{:.16e}", res.a_star);
            Ok(())
        }
        Err(Error::XMaxCapExceeded { a, partial }) => {
            write(&path, &to_json(&partial))?;
            println!("{:.16e}", partial.a_star);
            Err(Error::XMaxCapExceeded { a, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn verify(s: &Settings, only: Option<Vec<String>>, a: Option<f64>) -> Result<(), CliError> {
    let cfg = VerifyConfig {
        ctrl: s.ctrl,
        a,
        only,
    };
    cfg.validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    let reports = run_suite(&cfg)?;
    println!("{:<16} {:<6} detail", "check", "result");
    for r in &reports {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{:<16} {:<6} {}", r.check, verdict, r.detail);
    }
    write(&format!("{}.verify.json", s.out), &to_json(&reports))?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError {
            code: EXIT_VERIFY,
            msg: format!("{failed} of {} checks failed", reports.len()),
        });
    }
    Ok(())
}

/// `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text
        .trim()
        .trim_start_matches('{')
        .trim_end_matches('}')
        .trim();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| CliError::config(format!("bad grid value '{t}'")))
    };
    let grid: Vec<f64> = if text.is_empty() {
        Vec::new()
    } else if let [start, stop, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !(stop >= start) {
            return Err(CliError::config(format!("bad grid range '{text}'")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(CliError::config("empty grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::config("grid must be strictly increasing"));
    }
    if let Some(bad) = grid.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(CliError::config(format!(
            "grid slope {bad} must be positive"
        )));
    }
    Ok(grid)
}

pub fn sweep(s: &Settings, grid_text: &str) -> Result<(), CliError> {
    let grid = parse_grid(grid_text)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut curve = CrossingCurve { points: Vec::new() };
    for &a in &grid {
        let o = classify_shot(a, &s.ctrl, s.x_max)?;
        if let (OutcomeTag::CrossedOne, Some(x1)) = (o.tag, o.location) {
            curve.points.push((a, x1.exp()));
        }
        rows.push(Row {
            a,
            outcome: o.tag,
            location: o.location,
        });
    }
    match s.format {
        Format::Csv => {
            let mut body = String::from("a,outcome,location\n");
            for r in &rows {
                body.push_str(&format!(
                    "{:.16e},{},{}\n",
                    r.a,
                    r.outcome,
                    fmt_location(r.location)
                ));
            }
            write(&format!("{}.sweep.csv", s.out), &body)?;
            if !curve.points.is_empty() {
                write(&format!("{}.curve.csv", s.out), &curve.to_csv())?;
            }
        }
        Format::Json => {
            let v = json!({ "rows": rows, "curve": curve.points });
            write(&format!("{}.sweep.json", s.out), &to_json(&v))?;
        }
    }
    for r in &rows {
        println!(
            "{:.6} {} {}",
            r.a,
            r.outcome,
            r.location.map_or("-".into(), |l| format!("{l:.6}"))
        );
    }
    if curve.points.len() > 1 && !curve.is_strictly_decreasing() {
        eprintln!("warning: crossing radius is not strictly decreasing on this grid");
    }
    Ok(())
}
