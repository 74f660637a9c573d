use std::io::Write;

use anyhow::{anyhow, Context};
use decompose::lowrank::estimate_flops;

use crate::io::format_f64;
use crate::{Failure, FlopsArgs, UsageContext};

struct Row {
    k: usize,
    m_r: usize,
    n_r: usize,
    full: f64,
    reduced: f64,
}

impl Row {
    fn reduction_percent(&self) -> f64 {
        100.0 * (1.0 - self.reduced / self.full)
    }
}

pub fn cmd_flops(args: FlopsArgs) -> Result<(), Failure> {
    let (m, n) = (args.m, args.n);
    if m == 0 || n == 0 {
        return Err(anyhow!("dimensions must be positive, got {m}x{n}")).usage();
    }
    let n_r = args.n_r.unwrap_or(n);
    if n_r == 0 || n_r > n {
        return Err(anyhow!("--n-r must lie in [1, {n}], got {n_r}")).usage();
    }
    let mut rows = Vec::new();
    for &k in &args.k {
        for &m_r in &args.m_r {
            if k == 0 || m_r == 0 || m_r > m {
                return Err(anyhow!("need K >= 1 and 1 <= M_R <= {m}, got K={k}, M_R={m_r}")).usage();
            }
            rows.push(Row {
                k,
                m_r,
                n_r,
                full: estimate_flops(m, n, k, m, n, false),
                reduced: estimate_flops(m, n, k, m_r, n_r, true),
            });
        }
    }

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{:>6} {:>8} {:>8} {:>14} {:>14} {:>10}",
        "K", "M_R", "N_R", "full", "reduced", "reduction"
    )?;
    for r in &rows {
        writeln!(
            stdout,
            "{:>6} {:>8} {:>8} {:>14.4e} {:>14.4e} {:>9.2}%",
            r.k,
            r.m_r,
            r.n_r,
            r.full,
            r.reduced,
            r.reduction_percent()
        )?;
    }

    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record([
            "m",
            "n",
            "k",
            "m_r",
            "n_r",
            "full_flops",
            "reduced_flops",
            "reduction_percent",
        ])
        .map_err(anyhow::Error::from)?;
        for r in &rows {
            w.write_record([
                m.to_string(),
                n.to_string(),
                r.k.to_string(),
                r.m_r.to_string(),
                r.n_r.to_string(),
                format_f64(r.full),
                format_f64(r.reduced),
                format_f64(r.reduction_percent()),
            ])
            .map_err(anyhow::Error::from)?;
        }
        w.flush()?;
    }
    Ok(())
}
