//! CSV trace emission: `# key = value` header comments (config echo plus
//! bound report), one stable header row, then one row per record per
//! replicate. Floats carry 17 significant digits so parsing them back is
//! exact.

use crate::analysis::BoundReport;
use crate::config::ExperimentConfig;
use crate::engine::Trace;
use std::io::{self, Write};

/// 17-significant-digit scientific form; round-trips through f64 parsing.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Stable column list; per-thread distance columns appear only when the
/// config records per-thread solutions.
pub fn csv_header(cfg: &ExperimentConfig) -> String {
    let mut h = String::from("replicate,t,u,v_bar,f_mean,diverged");
    if cfg.record_per_thread {
        for i in 0..cfg.n_threads() {
            h.push_str(&format!(",dist_{i}"));
        }
    }
    h
}

/// Writes the full ensemble CSV: config echo and bound report as `#`
/// comments, a header row, then rows ordered by (replicate, t).
pub fn write_ensemble_csv<W: Write>(
    w: &mut W,
    cfg: &ExperimentConfig,
    traces: &[Trace],
    bounds: &BoundReport,
) -> io::Result<()> {
    for line in cfg.to_toml().lines() {
        writeln!(w, "# {line}")?;
    }
    for line in bounds.to_text().lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", csv_header(cfg))?;

    let obj = cfg
        .objective
        .build()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    let xstar = obj.optimum.clone();
    let m = cfg.dim();

    for (rep, trace) in traces.iter().enumerate() {
        let last = trace.records().saturating_sub(1);
        for r in 0..trace.records() {
            let diverged_row = trace.diverged.is_some() && r == last;
            write!(w, "{rep},{}", fmt_f64(trace.times[r]))?;
            match trace.u.as_ref() {
                Some(u) => write!(w, ",{}", fmt_f64(u[r]))?,
                None => write!(w, ",")?,
            }
            write!(w, ",{}", fmt_f64(trace.vbar[r]))?;
            write!(w, ",{}", fmt_f64(trace.f_xbar[r]))?;
            write!(w, ",{}", u8::from(diverged_row))?;
            if cfg.record_per_thread {
                let flat = trace.per_thread_at(r).expect("per-thread recording enabled");
                for i in 0..trace.n_states {
                    let sol = &flat[i * m..(i + 1) * m];
                    let d2: f64 = match &xstar {
                        Some(c) => sol.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum(),
                        None => {
                            let xbar = trace.xbar_at(r);
                            sol.iter().zip(xbar).map(|(a, b)| (a - b) * (a - b)).sum()
                        }
                    };
                    write!(w, ",{}", fmt_f64(d2.sqrt()))?;
                }
                // Centralized traces carry one state; pad the remaining
                // columns so the schema stays fixed.
                for _ in trace.n_states..cfg.n_threads() {
                    write!(w, ",")?;
                }
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Renders the ensemble CSV to a string.
pub fn ensemble_csv_string(
    cfg: &ExperimentConfig,
    traces: &[Trace],
    bounds: &BoundReport,
) -> io::Result<String> {
    let mut buf = Vec::new();
    write_ensemble_csv(&mut buf, cfg, traces, bounds)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
