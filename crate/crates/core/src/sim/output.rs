//! Files written by runs. Every file opens with a `#`-prefixed JSON block
//! naming the artifact version, a SHA-256 of the configuration, the seed and
//! the configuration itself.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::{svg, ExperimentResult, PanelRecord};
use crate::error::Result;
use crate::model::IncomeState;

pub const ARTIFACT: &str = concat!("td-consumption ", env!("CARGO_PKG_VERSION"));

pub fn config_hash(config: &serde_json::Value) -> String {
    let canon = serde_json::to_string(config).expect("json value serializes");
    hex::encode(Sha256::digest(canon.as_bytes()))
}

/// Header lines without the leading `# `.
pub fn header_lines(config: &serde_json::Value, seed: Option<u64>) -> Vec<String> {
    let block = json!({
        "artifact": ARTIFACT,
        "config_sha256": config_hash(config),
        "seed": seed,
        "config": config,
    });
    serde_json::to_string_pretty(&block)
        .expect("json value serializes")
        .lines()
        .map(str::to_string)
        .collect()
}

pub fn write_header<W: Write>(w: &mut W, config: &serde_json::Value, seed: Option<u64>) -> std::io::Result<()> {
    for line in header_lines(config, seed) {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// SVG documents carry the same block inside a leading XML comment.
pub fn with_svg_header(doc: &str, config: &serde_json::Value, seed: Option<u64>) -> String {
    let mut out = String::from("<!--\n");
    for line in header_lines(config, seed) {
        out.push_str("# ");
        out.push_str(&line.replace("--", "- -"));
        out.push('\n');
    }
    out.push_str("-->\n");
    out.push_str(doc);
    out
}

/// Parse the header block back into JSON.
pub fn read_header(text: &str) -> Option<serde_json::Value> {
    let body: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start())
        .collect::<Vec<_>>()
        .join("\n");
    serde_json::from_str(&body).ok()
}

pub fn write_panel<W: Write>(mut w: W, config: &serde_json::Value, seed: Option<u64>, panel: &[PanelRecord]) -> Result<()> {
    write_header(&mut w, config, seed)?;
    let mut cw = csv::Writer::from_writer(w);
    for r in panel {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

pub fn read_panel<R: Read>(r: R) -> Result<Vec<PanelRecord>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn income_label(y: Option<IncomeState>) -> &'static str {
    y.map_or("", IncomeState::label)
}

/// Write `<stem>.csv` (group statistics and tests), `<stem>_measurements.csv`,
/// `<stem>_curves.csv`, `<stem>_scalars.csv`, and one SVG per curve kind.
pub fn write_experiment(dir: &Path, stem: &str, res: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let open = |name: String| -> Result<fs::File> {
        let mut f = fs::File::create(dir.join(name))?;
        write_header(&mut f, &res.config, res.seed)?;
        Ok(f)
    };

    let mut f = open(format!("{stem}.csv"))?;
    writeln!(f, "row,n,mean,std_error,difference,t_stat,df,p_value,stars")?;
    for g in &res.groups {
        writeln!(f, "{},{},{},{},,,,,", g.name, g.n, g.mean, g.std_error)?;
    }
    for w in &res.tests {
        writeln!(
            f,
            "welch,{},,,{},{},{},{},{}",
            w.n_a + w.n_b,
            w.mean_difference,
            w.t,
            w.df,
            w.p_value,
            w.stars
        )?;
    }
    for n in &res.notes {
        writeln!(f, "note: {n}")?;
    }

    let mut f = open(format!("{stem}_measurements.csv"))?;
    writeln!(f, "group,agent_id,t,value")?;
    for m in &res.measurements {
        writeln!(f, "{},{},{},{}", m.group, m.agent_id, m.t, m.value)?;
    }

    let mut f = open(format!("{stem}_curves.csv"))?;
    writeln!(f, "label,kind,income,t,x,y")?;
    for c in &res.curves {
        for (x, y) in c.x.iter().zip(&c.y) {
            writeln!(f, "{},{},{},{},{x},{y}", c.label, c.kind, income_label(c.income), c.t)?;
        }
    }

    let mut f = open(format!("{stem}_scalars.csv"))?;
    writeln!(f, "key,value")?;
    for (k, v) in &res.scalars {
        writeln!(f, "{k},{v}")?;
    }

    let mut kinds: Vec<&str> = res.curves.iter().map(|c| c.kind.as_str()).collect();
    kinds.dedup();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        let doc = with_svg_header(&svg::experiment_figure(res, kind), &res.config, res.seed);
        fs::write(dir.join(format!("{stem}_{kind}.svg")), doc)?;
    }
    Ok(())
}

/// `key,value` rows of a scalars file.
pub fn read_scalars<R: Read>(r: R) -> Result<Vec<(String, f64)>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}
