//! File artifacts: episode CSVs, metrics JSON-lines, and the SVG dashboard.
//!
//! CSV floats use the shortest round-trip form, so re-ingesting a file
//! reproduces the source values bit for bit. The maker/taker spread columns
//! exist in `price_of_risk` mode only; the portfolio schema appends its
//! per-asset columns after the shared base set.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::env::portfolio::PortfolioRecord;
use crate::env::{Mode, StepRecord};
use crate::error::{Error, Result};
use crate::sac::EpochMetrics;

/// Base episode schema, one row per step, fixed order.
pub const EPISODE_COLUMNS: &[&str] = &[
    "step",
    "mid",
    "client_bid",
    "client_ask",
    "hedge_bid",
    "hedge_ask",
    "client_bid_size",
    "client_ask_size",
    "action_hedge",
    "action_skew",
    "client_pos",
    "hedge_pos",
    "net_pos",
    "client_pnl",
    "hedge_pnl",
    "market_pnl",
    "net_pnl",
    "penalty",
    "reward",
    "done",
];

/// Extra columns in `price_of_risk` mode.
pub const MAKER_TAKER_COLUMNS: &[&str] = &["maker_spread", "taker_spread"];

/// Extra columns in portfolio mode.
pub const PORTFOLIO_COLUMNS: &[&str] = &[
    "mid1",
    "mid2",
    "blended_mid",
    "hedge1_pos",
    "hedge2_pos",
    "hedge1_pnl",
    "hedge2_pnl",
    "portfolio_value",
    "overhedge",
];

fn ff(x: f64) -> String {
    format!("{x:?}")
}

fn base_row(out: &mut String, r: &StepRecord) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.step,
        ff(r.mid),
        ff(r.client_bid),
        ff(r.client_ask),
        ff(r.hedge_bid),
        ff(r.hedge_ask),
        ff(r.client_bid_size),
        ff(r.client_ask_size),
        ff(r.action_hedge),
        ff(r.action_skew),
        ff(r.client_pos),
        ff(r.hedge_pos),
        ff(r.net_pos),
        ff(r.client_pnl),
        ff(r.hedge_pnl),
        ff(r.market_pnl),
        ff(r.net_pnl),
        ff(r.penalty),
        ff(r.reward),
        r.done,
    );
}

/// Single-asset episode CSV. `mode` decides the maker/taker columns.
pub fn write_episode_csv(path: &Path, records: &[StepRecord], mode: Mode) -> Result<()> {
    let with_mt = mode == Mode::PriceOfRisk;
    let mut header = EPISODE_COLUMNS.join(",");
    if with_mt {
        header.push(',');
        header.push_str(&MAKER_TAKER_COLUMNS.join(","));
    }
    let mut text = header;
    text.push('\n');
    for r in records {
        base_row(&mut text, r);
        if with_mt {
            let cell = |o: Option<f64>| o.map(ff).unwrap_or_default();
            let _ = write!(text, ",{},{}", cell(r.maker_spread), cell(r.taker_spread));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Portfolio episode CSV: base schema over blended series plus per-asset
/// extension columns.
pub fn write_portfolio_csv(path: &Path, records: &[PortfolioRecord]) -> Result<()> {
    let mut text = EPISODE_COLUMNS.join(",");
    text.push(',');
    text.push_str(&PORTFOLIO_COLUMNS.join(","));
    text.push('\n');
    for r in records {
        base_row(&mut text, &r.base);
        let _ = write!(
            text,
            ",{},{},{},{},{},{},{},{},{}",
            ff(r.mid1),
            ff(r.mid2),
            ff(r.blended_mid),
            ff(r.hedge1_pos),
            ff(r.hedge2_pos),
            ff(r.hedge1_pnl),
            ff(r.hedge2_pnl),
            ff(r.portfolio_value),
            ff(r.overhedge)
        );
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_f(cell: &str, col: &str, line: usize) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::Data(format!("line {line}: bad {col} value '{cell}'")))
}

fn parse_base(cells: &[&str], line: usize) -> Result<StepRecord> {
    let f = |i: usize| parse_f(cells[i], EPISODE_COLUMNS[i], line);
    Ok(StepRecord {
        step: cells[0]
            .parse::<usize>()
            .map_err(|_| Error::Data(format!("line {line}: bad step '{}'", cells[0])))?,
        mid: f(1)?,
        client_bid: f(2)?,
        client_ask: f(3)?,
        hedge_bid: f(4)?,
        hedge_ask: f(5)?,
        client_bid_size: f(6)?,
        client_ask_size: f(7)?,
        action_hedge: f(8)?,
        action_skew: f(9)?,
        client_pos: f(10)?,
        hedge_pos: f(11)?,
        net_pos: f(12)?,
        client_pnl: f(13)?,
        hedge_pnl: f(14)?,
        market_pnl: f(15)?,
        net_pnl: f(16)?,
        penalty: f(17)?,
        reward: f(18)?,
        done: match cells[19] {
            "true" => true,
            "false" => false,
            other => return Err(Error::Data(format!("line {line}: bad done '{other}'"))),
        },
        maker_spread: None,
        taker_spread: None,
    })
}

/// Read a single-asset episode CSV back; detects the maker/taker variant.
pub fn read_episode_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty CSV", path.display())))?;
    let base = EPISODE_COLUMNS.join(",");
    let with_mt = format!("{base},{}", MAKER_TAKER_COLUMNS.join(","));
    let has_mt = if header == base {
        false
    } else if header == with_mt {
        true
    } else {
        return Err(Error::Data(format!("{}: unrecognized episode header", path.display())));
    };
    let want = EPISODE_COLUMNS.len() + if has_mt { 2 } else { 0 };
    let mut out = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != want {
            return Err(Error::Data(format!(
                "line {}: {} cells, expected {want}",
                idx + 1,
                cells.len()
            )));
        }
        let mut rec = parse_base(&cells, idx + 1)?;
        if has_mt {
            let opt = |cell: &str, col: &str| -> Result<Option<f64>> {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    parse_f(cell, col, idx + 1).map(Some)
                }
            };
            rec.maker_spread = opt(cells[20], "maker_spread")?;
            rec.taker_spread = opt(cells[21], "taker_spread")?;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Read a portfolio episode CSV back.
pub fn read_portfolio_csv(path: &Path) -> Result<Vec<PortfolioRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty CSV", path.display())))?;
    let want_header = format!("{},{}", EPISODE_COLUMNS.join(","), PORTFOLIO_COLUMNS.join(","));
    if header != want_header {
        return Err(Error::Data(format!("{}: unrecognized portfolio header", path.display())));
    }
    let want = EPISODE_COLUMNS.len() + PORTFOLIO_COLUMNS.len();
    let mut out = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != want {
            return Err(Error::Data(format!(
                "line {}: {} cells, expected {want}",
                idx + 1,
                cells.len()
            )));
        }
        let base = parse_base(&cells[..EPISODE_COLUMNS.len()], idx + 1)?;
        let f = |i: usize| parse_f(cells[20 + i], PORTFOLIO_COLUMNS[i], idx + 1);
        out.push(PortfolioRecord {
            base,
            mid1: f(0)?,
            mid2: f(1)?,
            blended_mid: f(2)?,
            hedge1_pos: f(3)?,
            hedge2_pos: f(4)?,
            hedge1_pnl: f(5)?,
            hedge2_pnl: f(6)?,
            portfolio_value: f(7)?,
            overhedge: f(8)?,
        });
    }
    Ok(out)
}

/// Append one metrics row as a JSON line.
pub fn append_metrics_line(w: &mut impl Write, m: &EpochMetrics) -> Result<()> {
    let line = serde_json::to_string(m).map_err(|e| Error::Data(format!("metrics row: {e}")))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_metrics_jsonl(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Data(format!("metrics line {}: {e}", i + 1)))
        })
        .collect()
}

const PALETTE: &[&str] = &["#4682b4", "#dc143c", "#2e8b57", "#ff8c00", "#6a5acd", "#555555"];

struct Series<'a> {
    name: &'a str,
    values: &'a [f64],
}

/// One titled line-chart panel at (x0, y0).
fn panel(svg: &mut String, x0: f64, y0: f64, w: f64, h: f64, title: &str, series: &[Series]) {
    let (ml, mr, mt, mb) = (52.0, 12.0, 26.0, 18.0);
    let (px, py, pw, ph) = (x0 + ml, y0 + mt, w - ml - mr, h - mt - mb);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut n = 0usize;
    for s in series {
        n = n.max(s.values.len());
        for &v in s.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let _ = write!(
        svg,
        r##"<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="#999" stroke-width="1"/>"##
    );
    let _ = write!(
        svg,
        r##"<text x="{}" y="{}" font-size="13" font-weight="bold" fill="#222">{title}</text>"##,
        px,
        y0 + 17.0
    );
    for (frac, v) in [(1.0, lo), (0.0, hi)] {
        let y = py + frac * ph;
        let _ = write!(
            svg,
            r##"<text x="{}" y="{}" font-size="10" fill="#444" text-anchor="end">{v:.3}</text>"##,
            px - 4.0,
            y + 3.0
        );
    }
    // zero line when the range crosses it
    if lo < 0.0 && hi > 0.0 {
        let yz = py + (1.0 - (0.0 - lo) / (hi - lo)) * ph;
        let _ = write!(
            svg,
            r##"<line x1="{px}" y1="{yz}" x2="{}" y2="{yz}" stroke="#ccc" stroke-width="1" stroke-dasharray="3,3"/>"##,
            px + pw
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if s.values.len() >= 2 {
            let mut points = String::new();
            let denom = (n - 1).max(1) as f64;
            for (i, &v) in s.values.iter().enumerate() {
                let x = px + (i as f64 / denom) * pw;
                let y = py + (1.0 - (v - lo) / (hi - lo)) * ph;
                let _ = write!(points, "{x:.2},{y:.2} ");
            }
            let _ = write!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.3"/>"#,
                points.trim_end()
            );
        }
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            px + pw - 110.0,
            py + 12.0 + 12.0 * k as f64,
            s.name
        );
    }
}

fn svg_document(panels: impl FnOnce(&mut String)) -> String {
    let mut svg = String::from(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="1000" height="760" viewBox="0 0 1000 760"><rect width="1000" height="760" fill="white"/>"#,
    );
    panels(&mut svg);
    svg.push_str("</svg>\n");
    svg
}

/// Four-panel dashboard: prices, positions, PNL components, reward/penalty.
pub fn export_dashboard(path: &Path, records: &[StepRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Param("cannot export an empty episode".into()));
    }
    let col = |f: fn(&StepRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mid = col(|r| r.mid);
    let cb = col(|r| r.client_bid);
    let ca = col(|r| r.client_ask);
    let hb = col(|r| r.hedge_bid);
    let ha = col(|r| r.hedge_ask);
    let cpos = col(|r| r.client_pos);
    let hpos = col(|r| r.hedge_pos);
    let npos = col(|r| r.net_pos);
    let cpnl = col(|r| r.client_pnl);
    let hpnl = col(|r| r.hedge_pnl);
    let mpnl = col(|r| r.market_pnl);
    let npnl = col(|r| r.net_pnl);
    let reward = col(|r| r.reward);
    let penalty = col(|r| r.penalty);
    let svg = svg_document(|s| {
        panel(
            s,
            0.0,
            0.0,
            500.0,
            380.0,
            "prices",
            &[
                Series { name: "mid", values: &mid },
                Series { name: "client_bid", values: &cb },
                Series { name: "client_ask", values: &ca },
                Series { name: "hedge_bid", values: &hb },
                Series { name: "hedge_ask", values: &ha },
            ],
        );
        panel(
            s,
            500.0,
            0.0,
            500.0,
            380.0,
            "positions",
            &[
                Series { name: "client_pos", values: &cpos },
                Series { name: "hedge_pos", values: &hpos },
                Series { name: "net_pos", values: &npos },
            ],
        );
        panel(
            s,
            0.0,
            380.0,
            500.0,
            380.0,
            "pnl components",
            &[
                Series { name: "client_pnl", values: &cpnl },
                Series { name: "hedge_pnl", values: &hpnl },
                Series { name: "market_pnl", values: &mpnl },
                Series { name: "net_pnl", values: &npnl },
            ],
        );
        panel(
            s,
            500.0,
            380.0,
            500.0,
            380.0,
            "reward / penalty",
            &[
                Series { name: "reward", values: &reward },
                Series { name: "penalty", values: &penalty },
            ],
        );
    });
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Portfolio dashboard: per-asset mids, positions and value, PNL split,
/// reward/penalty/overhedge.
pub fn export_portfolio_dashboard(path: &Path, records: &[PortfolioRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Param("cannot export an empty episode".into()));
    }
    let col = |f: fn(&PortfolioRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mid1 = col(|r| r.mid1);
    let mid2 = col(|r| r.mid2);
    let bl = col(|r| r.blended_mid);
    let cpos = col(|r| r.base.client_pos);
    let h1 = col(|r| r.hedge1_pos);
    let h2 = col(|r| r.hedge2_pos);
    let cpnl = col(|r| r.base.client_pnl);
    let h1pnl = col(|r| r.hedge1_pnl);
    let h2pnl = col(|r| r.hedge2_pnl);
    let npnl = col(|r| r.base.net_pnl);
    let pv = col(|r| r.portfolio_value);
    let oh = col(|r| r.overhedge);
    let reward = col(|r| r.base.reward);
    let penalty = col(|r| r.base.penalty);
    let svg = svg_document(|s| {
        panel(
            s,
            0.0,
            0.0,
            500.0,
            380.0,
            "prices",
            &[
                Series { name: "mid1", values: &mid1 },
                Series { name: "mid2", values: &mid2 },
                Series { name: "blended_mid", values: &bl },
            ],
        );
        panel(
            s,
            500.0,
            0.0,
            500.0,
            380.0,
            "positions",
            &[
                Series { name: "client_pos", values: &cpos },
                Series { name: "hedge1_pos", values: &h1 },
                Series { name: "hedge2_pos", values: &h2 },
            ],
        );
        panel(
            s,
            0.0,
            380.0,
            500.0,
            380.0,
            "pnl / value",
            &[
                Series { name: "client_pnl", values: &cpnl },
                Series { name: "hedge1_pnl", values: &h1pnl },
                Series { name: "hedge2_pnl", values: &h2pnl },
                Series { name: "net_pnl", values: &npnl },
                Series { name: "portfolio_value", values: &pv },
            ],
        );
        panel(
            s,
            500.0,
            380.0,
            500.0,
            380.0,
            "reward / penalty / overhedge",
            &[
                Series { name: "reward", values: &reward },
                Series { name: "penalty", values: &penalty },
                Series { name: "overhedge", values: &oh },
            ],
        );
    });
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}
