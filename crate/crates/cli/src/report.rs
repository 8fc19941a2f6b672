//! Deterministic text and CSV renderings. Every number has four decimals;
//! text reports attach units, CSV headers carry them.

use std::fmt::Write;

use mpflex_core::avg::PwaValueFunction;
use mpflex_core::flexibility::FlexibilityReport;
use mpflex_core::market::{CentralSolution, Equilibrium, SimulationOutcome};

use crate::instance_file::LoadedInstance;

/// Four decimals, with `-0.0000` folded to `0.0000`.
pub fn num(x: f64) -> String {
    let s = format!("{x:.4}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn param_label(inst: &LoadedInstance, j: usize) -> String {
    match inst.parameter_names.get(j) {
        Some(n) if !n.is_empty() => n.clone(),
        _ => format!("p{j}"),
    }
}

fn theta_line(inst: &LoadedInstance, theta: &[f64]) -> String {
    theta
        .iter()
        .enumerate()
        .map(|(j, t)| format!("{} = {} kW", param_label(inst, j), num(*t)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub struct EquilibriumReport<'a> {
    pub instance: &'a LoadedInstance,
    pub theta: &'a [f64],
    pub quadratic: &'a Equilibrium,
    pub linearized: &'a CentralSolution,
}

pub fn equilibrium_text(r: &EquilibriumReport) -> String {
    let inst = r.instance;
    let mut s = String::new();
    let q = r.quadratic.cost;
    let l = r.linearized.cost;
    writeln!(s, "instance: {}", inst.name).unwrap();
    writeln!(s, "parameters: {}", theta_line(inst, r.theta)).unwrap();
    writeln!(s, "tau: {} $/kW^2", num(inst.market.tau())).unwrap();
    writeln!(s, "cost (quadratic): {} $", num(q)).unwrap();
    writeln!(
        s,
        "cost (linearized, {} breakpoints): {} $",
        inst.segments,
        num(l)
    )
    .unwrap();
    writeln!(s, "relative gap: {} %", num(100.0 * (l - q) / q)).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "equilibrium (quadratic):").unwrap();
    let e = r.quadratic;
    for (k, u) in inst.market.users().iter().enumerate() {
        writeln!(
            s,
            "  {}: delta_d {} kW, schedule {} kW, bid {} kW, gap {} kW, eta {} $/kW",
            u.name,
            num(e.delta_d[k]),
            num(e.schedules[k]),
            num(e.bids[k]),
            num(e.gaps[k]),
            num(e.eta[k])
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "equilibrium (linearized):").unwrap();
    let c = r.linearized;
    for (k, u) in inst.market.users().iter().enumerate() {
        writeln!(
            s,
            "  {}: delta_d {} kW, schedule {} kW, eta {} $/kW",
            u.name,
            num(c.delta_d[k]),
            num(c.schedules[k]),
            num(c.eta[k])
        )
        .unwrap();
    }
    s
}

pub fn trace_csv(inst: &LoadedInstance, out: &SimulationOutcome) -> String {
    let names: Vec<&str> = inst.market.users().iter().map(|u| u.name.as_str()).collect();
    let mut s = String::from("round,change_kW");
    for prefix in ["delta_d", "gap", "schedule"] {
        for n in &names {
            write!(s, ",{prefix}_{n}_kW").unwrap();
        }
    }
    s.push('\n');
    for r in &out.rounds {
        write!(s, "{},{}", r.iteration, num(r.change)).unwrap();
        for v in r.delta_d.iter().chain(&r.gaps).chain(&r.schedules) {
            write!(s, ",{}", num(*v)).unwrap();
        }
        s.push('\n');
    }
    s
}

fn affine_text(m: f64, n: &[f64]) -> String {
    let mut s = format!("{} $", num(m));
    for (j, c) in n.iter().enumerate() {
        let sign = if c.is_sign_negative() && num(*c) != "0.0000" { '-' } else { '+' };
        write!(s, " {sign} {} $/kW * theta[{j}]", num(c.abs())).unwrap();
    }
    s
}

pub fn pieces_text(pwa: &PwaValueFunction) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{} regions, certified error {} $",
        pwa.regions.len(),
        num(pwa.error)
    )
    .unwrap();
    for (r, (reg, err)) in pwa.regions.iter().zip(&pwa.region_errors).enumerate() {
        let pc = &pwa.pieces[reg.piece];
        writeln!(
            s,
            "region {r}: v = {} (error {} $)",
            affine_text(pc.m, &pc.n),
            num(*err)
        )
        .unwrap();
    }
    s
}

pub fn regions_text(pwa: &PwaValueFunction) -> String {
    let mut s = String::new();
    for (r, reg) in pwa.regions.iter().enumerate() {
        writeln!(s, "region {r}:").unwrap();
        for (row, b) in reg.poly.rows().iter().zip(reg.poly.rhs()) {
            let lhs = row
                .iter()
                .enumerate()
                .map(|(j, c)| format!("{} * theta[{j}]", num(*c)))
                .collect::<Vec<_>>()
                .join(" + ");
            writeln!(s, "  {lhs} <= {} kW", num(*b)).unwrap();
        }
    }
    s
}

pub fn error_trace_csv(pwa: &PwaValueFunction) -> String {
    let mut s = String::from("iteration,max_error_usd,pieces,regions\n");
    for r in &pwa.trace {
        writeln!(s, "{},{},{},{}", r.iteration, num(r.max_error), r.pieces, r.regions).unwrap();
    }
    s
}

/// One grid point: parameters, LP value and underestimate.
pub struct GridRow {
    pub theta: Vec<f64>,
    pub lp: f64,
    pub underestimate: f64,
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let p = rows.first().map_or(0, |r| r.theta.len());
    let mut s = String::new();
    for j in 0..p {
        write!(s, "theta{j}_kW,").unwrap();
    }
    s.push_str("lp_usd,underestimate_usd,gap_usd\n");
    for r in rows {
        for t in &r.theta {
            write!(s, "{},", num(*t)).unwrap();
        }
        writeln!(
            s,
            "{},{},{}",
            num(r.lp),
            num(r.underestimate),
            num(r.lp - r.underestimate)
        )
        .unwrap();
    }
    s
}

fn join_theta(t: &[f64]) -> String {
    t.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

fn join_idx(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn flexibility_csv(inst: &LoadedInstance, rep: &FlexibilityReport) -> String {
    let mut s = String::from(
        "rank,user,demand_kW,lower_kW,upper_kW,width_kW,min_demand_kW,max_demand_kW,\
         lower_exploited,upper_exploited,lower_theta_kW,upper_theta_kW,lower_regions,upper_regions\n",
    );
    for (rank, &k) in rep.ranking.iter().enumerate() {
        let u = &rep.users[k];
        let user = &inst.market.users()[k];
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            rank + 1,
            u.name,
            num(u.demand),
            num(u.lower),
            num(u.upper),
            num(u.width),
            num(user.lower),
            num(user.upper),
            u.lower_exploited,
            u.upper_exploited,
            join_theta(&u.lower_theta),
            join_theta(&u.upper_theta),
            join_idx(&u.lower_regions),
            join_idx(&u.upper_regions)
        )
        .unwrap();
    }
    s
}

pub fn flexibility_regions_csv(inst: &LoadedInstance, rep: &FlexibilityReport) -> String {
    let mut s = String::from("region,user,lower_kW,upper_kW\n");
    for (r, ivs) in rep.regions.iter().enumerate() {
        for (k, iv) in ivs.iter().enumerate() {
            writeln!(
                s,
                "{r},{},{},{}",
                inst.market.users()[k].name,
                num(iv.lower.value),
                num(iv.upper.value)
            )
            .unwrap();
        }
    }
    s
}

pub fn flexibility_text(inst: &LoadedInstance, rep: &FlexibilityReport) -> String {
    let mut s = String::new();
    for &k in &rep.ranking {
        let u = &rep.users[k];
        let user = &inst.market.users()[k];
        if user.is_pinned() {
            continue;
        }
        let mut flags = Vec::new();
        if u.lower_exploited {
            flags.push("lower range fully exploited");
        }
        if u.upper_exploited {
            flags.push("upper range fully exploited");
        }
        writeln!(
            s,
            "{}: [{} kW, {} kW], width {} kW{}",
            u.name,
            num(u.lower),
            num(u.upper),
            num(u.width),
            if flags.is_empty() {
                String::new()
            } else {
                format!(" ({})", flags.join(", "))
            }
        )
        .unwrap();
    }
    s
}
